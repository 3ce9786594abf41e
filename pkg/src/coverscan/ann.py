"""Approximate nearest-neighbor indexes, built from scratch.

Float descriptors go into a forest of randomized k-d trees searched
best-first with a bounded number of point checks; binary descriptors go
into multi-table bit-sampling LSH with one-bit multiprobe.  Both builds
are deterministic for a fixed seed, and both guarantee exact results when
a query asks for as many neighbors as there are indexed points.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import MatchError
from .features import BinaryDescriptors, DescriptorSet, FloatDescriptors
from .matching import MatchSet, _check_sets, knn_exact

DEFAULT_TREES = 4
DEFAULT_CHECKS = 64
DEFAULT_TABLES = 8
DEFAULT_KEY_BITS = 16
_LEAF_SIZE = 8
_TOP_VARIANCE_DIMS = 5


class _KdTree:
    """One randomized k-d tree: split on a random high-variance dim at its mean."""

    def __init__(self, data: np.ndarray, rng: np.random.Generator):
        self.split_dim: list[int] = []
        self.split_val: list[float] = []
        self.children: list[tuple[int, int]] = []   # negative = ~leaf_id
        self.leaves: list[np.ndarray] = []
        self.root = self._build(data, np.arange(data.shape[0]), rng)

    def _build(self, data, ids, rng) -> int:
        if len(ids) <= _LEAF_SIZE:
            return self._leaf(ids)
        sub = data[ids]
        var = sub.var(axis=0)
        ndims = min(_TOP_VARIANCE_DIMS, data.shape[1])
        top = np.argsort(var)[::-1][:ndims]
        dim = int(rng.choice(top))
        val = float(sub[:, dim].mean())
        mask = sub[:, dim] < val
        if not mask.any() or mask.all():
            return self._leaf(ids)  # constant dim, cannot split
        node = len(self.split_dim)
        self.split_dim.append(dim)
        self.split_val.append(val)
        self.children.append((0, 0))
        left = self._build(data, ids[mask], rng)
        right = self._build(data, ids[~mask], rng)
        self.children[node] = (left, right)
        return node

    def _leaf(self, ids) -> int:
        self.leaves.append(np.asarray(ids, dtype=np.int64))
        return ~len(self.leaves) + 1  # ~leaf_id


class KdForest:
    """FLANN-style forest of randomized k-d trees over float descriptors."""

    kind = "float"

    def __init__(self, values: np.ndarray, trees: int = DEFAULT_TREES,
                 checks: int = DEFAULT_CHECKS, seed: int = 42):
        self.data = np.ascontiguousarray(values, dtype=np.float64)
        self.checks = checks
        rng = np.random.default_rng(seed)
        self.trees = [_KdTree(self.data, rng) for _ in range(trees)]

    def __len__(self) -> int:
        return self.data.shape[0]

    def knn(self, query: np.ndarray, k: int):
        """Best-first search over all trees, scoring at most ``checks`` points."""
        q = np.asarray(query, dtype=np.float64)
        heap: list[tuple[float, int, int]] = []  # (bound, tree_id, node)
        for t, tree in enumerate(self.trees):
            heapq.heappush(heap, (0.0, t, tree.root))
        seen = np.zeros(len(self), dtype=bool)
        best: list[tuple[float, int]] = []  # sorted (dist, id), len <= k
        checked = 0
        while heap and checked < self.checks:
            bound, t, node = heapq.heappop(heap)
            if len(best) == k and bound > best[-1][0]:
                continue
            tree = self.trees[t]
            while node >= 0:  # descend to the near leaf, queueing far branches
                dim = tree.split_dim[node]
                diff = q[dim] - tree.split_val[node]
                near, far = tree.children[node]
                if diff >= 0:
                    near, far = far, near
                heapq.heappush(heap, (max(bound, abs(diff)), t, far))
                node = near
            for i in tree.leaves[~node]:
                if seen[i]:
                    continue
                seen[i] = True
                checked += 1
                d = float(np.sqrt(((self.data[i] - q) ** 2).sum()))
                entry = (d, int(i))
                if len(best) < k:
                    best.append(entry)
                    best.sort()
                elif entry < best[-1]:
                    best[-1] = entry
                    best.sort()
        return best


class LshIndex:
    """Multi-table LSH hashing random bit subsets of binary descriptors.

    Query keys are probed together with all one-bit-flip neighbors, which
    is what makes near-duplicate lookups reliable at small table counts.
    """

    kind = "binary"

    def __init__(self, descriptors: BinaryDescriptors, tables: int = DEFAULT_TABLES,
                 key_bits: int = DEFAULT_KEY_BITS, seed: int = 42):
        self.nbits = descriptors.nbits
        self.words = descriptors.words()
        rng = np.random.default_rng(seed)
        self.bit_subsets = [np.sort(rng.choice(self.nbits, size=key_bits, replace=False))
                            for _ in range(tables)]
        keys = self._keys(descriptors.packed)  # (n, tables)
        self.buckets: list[dict[int, np.ndarray]] = []
        for t in range(tables):
            table: dict[int, list[int]] = {}
            for i, key in enumerate(keys[:, t]):
                table.setdefault(int(key), []).append(i)
            self.buckets.append({k: np.asarray(v, dtype=np.int64)
                                 for k, v in table.items()})

    def __len__(self) -> int:
        return self.words.shape[0]

    def _keys(self, packed: np.ndarray) -> np.ndarray:
        keys = np.zeros((packed.shape[0], len(self.bit_subsets)), dtype=np.int64)
        for t, bits in enumerate(self.bit_subsets):
            for j, p in enumerate(bits):
                bit = (packed[:, p // 8] >> (7 - p % 8)) & 1
                keys[:, t] |= bit.astype(np.int64) << j
        return keys

    def candidates_for(self, packed_queries: np.ndarray) -> list[np.ndarray]:
        keys = self._keys(packed_queries)
        key_bits = len(self.bit_subsets[0])
        out = []
        for qi in range(packed_queries.shape[0]):
            found = []
            for t, table in enumerate(self.buckets):
                key = int(keys[qi, t])
                hit = table.get(key)
                if hit is not None:
                    found.append(hit)
                for b in range(key_bits):  # one-bit multiprobe
                    hit = table.get(key ^ (1 << b))
                    if hit is not None:
                        found.append(hit)
            if found:
                out.append(np.unique(np.concatenate(found)))
            else:
                out.append(np.zeros(0, dtype=np.int64))
        return out

    def knn(self, query: BinaryDescriptors, k: int):
        """(indices, distances) with -1 rows filled by exact fallback upstream."""
        cand = self.candidates_for(query.packed)
        counts = np.asarray([c.size for c in cand], dtype=np.int64)
        flat = (np.concatenate(cand) if cand else np.zeros(0, dtype=np.int64))
        if flat.size == 0:
            flat = np.zeros(0, dtype=np.int64)
        idx, dist = kernels.hamming_select(query.words(), self.words, flat, counts, k)
        return np.asarray(idx), np.asarray(dist, dtype=np.float64)


@dataclass(frozen=True, eq=False)
class AnnIndex:
    """Immutable approximate index over one reference descriptor set."""

    reference: DescriptorSet
    impl: object = field(repr=False)
    seed: int = 42

    @property
    def kind(self) -> str:
        return self.reference.kind

    def __len__(self) -> int:
        return len(self.reference)


def build_ann_index(reference: DescriptorSet, seed: int = 42, *,
                    trees: int = DEFAULT_TREES, checks: int = DEFAULT_CHECKS,
                    tables: int = DEFAULT_TABLES,
                    key_bits: int = DEFAULT_KEY_BITS) -> AnnIndex:
    if len(reference) == 0:
        raise MatchError("cannot index an empty descriptor set")
    if isinstance(reference, FloatDescriptors):
        impl = KdForest(reference.values, trees=trees, checks=checks, seed=seed)
    else:
        impl = LshIndex(reference, tables=tables,
                        key_bits=min(key_bits, reference.nbits), seed=seed)
    return AnnIndex(reference, impl, seed)


def ann_knn(idx: AnnIndex, query: DescriptorSet, k: int) -> MatchSet:
    """Approximate k nearest neighbors per query, k best-first per query.

    The pair schema matches the exact matchers, so NNDR filtering applies
    unchanged.  ``k == len(idx)`` falls back to brute force (exact result);
    queries whose LSH probes return fewer than k candidates are also
    resolved exactly, keeping the result total.
    """
    _check_sets(query, idx.reference)
    if k > len(idx):
        raise MatchError(f"k={k} exceeds indexed size {len(idx)}")
    if len(query) == 0:
        return MatchSet((), retained_count=0, total_queries=0)
    indices, dists = ann_knn_arrays(idx, query, k)
    pairs = []
    for qi in range(len(query)):
        for j in range(k):
            pairs.append((qi, int(indices[qi, j]), float(dists[qi, j])))
    return MatchSet(tuple(pairs), retained_count=len(query),
                    total_queries=len(query))


def ann_knn_arrays(idx: AnnIndex, query: DescriptorSet, k: int):
    """Array form of ann_knn: (indices, distances), each (nq, k)."""
    _check_sets(query, idx.reference)
    if k > len(idx) or k < 1:
        raise MatchError(f"k={k} out of range for index of {len(idx)}")
    if k == len(idx) or (isinstance(query, FloatDescriptors) and k > 2):
        return _exhaustive(idx, query, k)
    if isinstance(query, FloatDescriptors):
        indices = np.empty((len(query), k), dtype=np.int64)
        dists = np.empty((len(query), k), dtype=np.float64)
        for qi in range(len(query)):
            best = idx.impl.knn(query.values[qi], k)
            while len(best) < k:  # exhausted forest below k hits
                best.append((np.inf, -1))
            for j, (d, i) in enumerate(best[:k]):
                indices[qi, j] = i
                dists[qi, j] = d
        bad = indices.min(axis=1) < 0
    else:
        if k > 2:
            return _exhaustive(idx, query, k)
        indices, dists = idx.impl.knn(query, k)
        bad = indices.min(axis=1) < 0
    if bad.any():
        sub = _subset(query, np.flatnonzero(bad))
        fi, fd = knn_exact(sub, idx.reference, k)
        indices[bad] = fi
        dists[bad] = fd
    return indices, dists


def _subset(ds: DescriptorSet, rows: np.ndarray) -> DescriptorSet:
    if isinstance(ds, FloatDescriptors):
        return FloatDescriptors(ds.values[rows], dim=ds.length)
    return BinaryDescriptors(ds.packed[rows], ds.nbits)


def _exhaustive(idx: AnnIndex, query: DescriptorSet, k: int):
    if k <= 2:
        return knn_exact(query, idx.reference, k)
    # full sort, only reachable for tiny indexes (k == n)
    if isinstance(query, FloatDescriptors):
        q = query.values.astype(np.float64)
        r = idx.reference.values.astype(np.float64)
        d = np.sqrt(np.maximum(
            (q * q).sum(1)[:, None] + (r * r).sum(1)[None, :] - 2 * (q @ r.T), 0))
    else:
        qw = query.words()
        rw = idx.reference.words()
        d = np.bitwise_count(qw[:, None, :] ^ rw[None, :, :]).sum(axis=2).astype(np.float64)
    order = np.argsort(d, axis=1, kind="stable")[:, :k]
    return order, np.take_along_axis(d, order, axis=1)


def match_2nn_nndr_ann(query: DescriptorSet, idx: AnnIndex, tau: float) -> MatchSet:
    """Ratio-test matching on top of the approximate 2-NN search."""
    if not 0.0 < tau <= 1.0:
        raise MatchError(f"tau must be in (0,1], got {tau}")
    if len(idx) < 2:
        raise MatchError("reference needs >= 2 descriptors for the ratio test")
    if len(query) == 0:
        return MatchSet((), retained_count=0, total_queries=0)
    indices, dists = ann_knn_arrays(idx, query, 2)
    from .matching import _nndr_filter
    return _nndr_filter(indices, dists, tau, len(query))
