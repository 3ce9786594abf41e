"""Descriptor distances, 1-NN / 2-NN(NNDR) matching, discrimination scores.

Float descriptors use Euclidean distance, binary ones Hamming distance.
Ties always resolve to the lowest reference index, so results are
deterministic and independent of reference permutation up to relabeling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from . import kernels
from .errors import MatchError
from .features import BinaryDescriptors, Descriptor, DescriptorSet, FloatDescriptors


@dataclass(frozen=True)
class MatcherParams:
    """k-NN matcher settings; the metric is implied by the descriptor kind."""

    k: int = 2
    nndr_threshold: float = 0.7

    def __post_init__(self):
        if self.k not in (1, 2):
            raise ValueError(f"k must be 1 or 2, got {self.k}")
        if not 0.0 < self.nndr_threshold <= 1.0:
            raise ValueError(f"nndr_threshold must be in (0,1], got {self.nndr_threshold}")


@dataclass(frozen=True)
class MatchSet:
    """Matched (query, reference, distance) pairs plus retention bookkeeping."""

    pairs: Tuple[Tuple[int, int, float], ...]
    retained_count: int
    total_queries: int

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(self.pairs))
        if self.retained_count > self.total_queries:
            raise ValueError("retained_count exceeds total_queries")
        if any(d < 0 for _, _, d in self.pairs):
            raise ValueError("negative match distance")


def descriptor_distance(a: Descriptor, b: Descriptor) -> float:
    if a.kind != b.kind or a.length != b.length:
        raise MatchError(
            f"descriptor mismatch: {a.kind}/{a.length} vs {b.kind}/{b.length}")
    if a.kind == "float":
        return float(np.linalg.norm(np.asarray(a.data, dtype=np.float64)
                                    - np.asarray(b.data, dtype=np.float64)))
    return int(np.bitwise_count(np.bitwise_xor(a.data, b.data)).sum())


def _check_sets(query: DescriptorSet, reference: DescriptorSet):
    if query.kind != reference.kind or query.length != reference.length:
        raise MatchError(
            f"descriptor set mismatch: {query.kind}/{query.length} vs "
            f"{reference.kind}/{reference.length}")


def knn_exact(query: DescriptorSet, reference: DescriptorSet, k: int):
    """Exact k-NN (k in {1,2}); returns (indices, distances) of shape (nq, k).

    Lowest reference index wins ties.  This is the brute-force route the
    approximate index is benchmarked against.
    """
    _check_sets(query, reference)
    if k not in (1, 2):
        raise MatchError(f"k must be 1 or 2, got {k}")
    if len(reference) < k:
        raise MatchError(f"reference holds {len(reference)} < k={k} descriptors")
    if isinstance(query, BinaryDescriptors):
        idx, dist = kernels.hamming_knn(query.words(), reference.words(), k)
        return np.asarray(idx), np.asarray(dist, dtype=np.float64)
    q = query.values.astype(np.float64)
    r = reference.values.astype(np.float64)
    d2 = np.maximum(
        (q * q).sum(axis=1)[:, None] + (r * r).sum(axis=1)[None, :] - 2.0 * (q @ r.T),
        0.0)
    rows = np.arange(d2.shape[0])
    first = d2.argmin(axis=1)
    idx = np.empty((len(q), k), dtype=np.int64)
    dist = np.empty((len(q), k), dtype=np.float64)
    idx[:, 0] = first
    dist[:, 0] = np.sqrt(d2[rows, first])
    if k == 2:
        d2[rows, first] = np.inf
        second = d2.argmin(axis=1)
        idx[:, 1] = second
        dist[:, 1] = np.sqrt(d2[rows, second])
    return idx, dist


def match_1nn(query: DescriptorSet, reference: DescriptorSet) -> MatchSet:
    """Best match in the reference set for every query descriptor."""
    if len(query) == 0 or len(reference) == 0:
        raise MatchError("cannot match empty descriptor sets")
    idx, dist = knn_exact(query, reference, 1)
    pairs = tuple((int(i), int(idx[i, 0]), float(dist[i, 0]))
                  for i in range(len(query)))
    return MatchSet(pairs, retained_count=len(pairs), total_queries=len(query))


def match_2nn_nndr(query: DescriptorSet, reference: DescriptorSet,
                   tau: float) -> MatchSet:
    """Keep a query's best match only when d1 <= tau * d2 (ratio test).

    d2 == 0 implies d1 == 0, a perfect duplicate, and is always retained.
    """
    if not 0.0 < tau <= 1.0:
        raise MatchError(f"tau must be in (0,1], got {tau}")
    if len(reference) < 2:
        raise MatchError("reference needs >= 2 descriptors for the ratio test")
    if len(query) == 0:
        return MatchSet((), retained_count=0, total_queries=0)
    idx, dist = knn_exact(query, reference, 2)
    return _nndr_filter(idx, dist, tau, len(query))


def _nndr_filter(idx, dist, tau: float, nq: int) -> MatchSet:
    keep = dist[:, 0] <= tau * dist[:, 1]
    pairs = tuple((int(i), int(idx[i, 0]), float(dist[i, 0]))
                  for i in np.flatnonzero(keep))
    return MatchSet(pairs, retained_count=len(pairs), total_queries=nq)


def score_sum_distances(m: MatchSet) -> float:
    """Sum of matched distances; +inf for an empty pair list.  Lower is better."""
    if not m.pairs:
        return math.inf
    return float(sum(d for _, _, d in m.pairs))


def matching_rate(m: MatchSet) -> float:
    """Percentage of queries surviving the ratio test.  Higher is better."""
    if m.total_queries == 0:
        return 0.0
    return 100.0 * m.retained_count / m.total_queries
