import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coverscan.errors import MatchError
from coverscan.features import BinaryDescriptors, Descriptor, FloatDescriptors
from coverscan.matching import (
    MatcherParams,
    MatchSet,
    descriptor_distance,
    match_1nn,
    match_2nn_nndr,
    matching_rate,
    score_sum_distances,
)


def float_set(rows):
    return FloatDescriptors(np.asarray(rows, dtype=np.float32))


def binary_set(bit_rows):
    return BinaryDescriptors.from_bits(np.asarray(bit_rows, dtype=np.uint8))


class TestDescriptorDistance:
    def test_identical_is_zero(self, rng):
        v = rng.random(64)
        assert descriptor_distance(Descriptor.from_floats(v),
                                   Descriptor.from_floats(v)) == 0.0
        bits = rng.integers(0, 2, 256)
        assert descriptor_distance(Descriptor.from_bits(bits),
                                   Descriptor.from_bits(bits)) == 0

    def test_complement_is_full_length(self, rng):
        bits = rng.integers(0, 2, 256)
        assert descriptor_distance(Descriptor.from_bits(bits),
                                   Descriptor.from_bits(1 - bits)) == 256

    def test_small_xor_popcount(self):
        a = Descriptor.from_bits([1, 0, 1, 0])
        b = Descriptor.from_bits([0, 1, 1, 0])
        assert descriptor_distance(a, b) == 2

    def test_kind_mismatch(self):
        with pytest.raises(MatchError):
            descriptor_distance(Descriptor.from_floats([1.0] * 4),
                                Descriptor.from_bits([1, 0, 1, 0]))
        with pytest.raises(MatchError):
            descriptor_distance(Descriptor.from_floats([1.0] * 4),
                                Descriptor.from_floats([1.0] * 5))

    def test_metric_sanity_1000_random_pairs(self, rng):
        # symmetry + identity of indiscernibles; Hamming bounded by bit length
        for _ in range(500):
            a = Descriptor.from_floats(rng.random(16))
            b = Descriptor.from_floats(rng.random(16))
            assert descriptor_distance(a, b) == descriptor_distance(b, a)
            assert descriptor_distance(a, a) == 0.0
        for _ in range(500):
            a = Descriptor.from_bits(rng.integers(0, 2, 96))
            b = Descriptor.from_bits(rng.integers(0, 2, 96))
            d = descriptor_distance(a, b)
            assert d == descriptor_distance(b, a)
            assert 0 <= d <= 96
            assert descriptor_distance(b, b) == 0


class TestMatch1nn:
    def test_self_match(self, rng):
        s = float_set(rng.random((10, 8)))
        m = match_1nn(s, s)
        assert m.retained_count == m.total_queries == 10
        for qi, ri, d in m.pairs:
            assert qi == ri and d == 0.0

    def test_single_reference(self, rng):
        q = binary_set(rng.integers(0, 2, (7, 32)))
        r = binary_set(rng.integers(0, 2, (1, 32)))
        m = match_1nn(q, r)
        assert all(ri == 0 for _, ri, _ in m.pairs)

    @pytest.mark.parametrize("kind", ["float", "binary"])
    def test_matches_double_loop_oracle(self, rng, kind):
        if kind == "float":
            q = float_set(rng.random((50, 12)))
            r = float_set(rng.random((50, 12)))
        else:
            q = binary_set(rng.integers(0, 2, (50, 64)))
            r = binary_set(rng.integers(0, 2, (50, 64)))
        m = match_1nn(q, r)
        for qi, ri, d in m.pairs:
            dists = [descriptor_distance(q.get(qi), r.get(j)) for j in range(len(r))]
            best = min(range(len(r)), key=lambda j: (dists[j], j))
            assert ri == best
            assert d == pytest.approx(dists[best], abs=1e-9)

    def test_empty_raises(self):
        with pytest.raises(MatchError):
            match_1nn(float_set(np.zeros((0, 4), dtype=np.float32)),
                      float_set(np.ones((2, 4))))

    def test_kind_mismatch(self, rng):
        with pytest.raises(MatchError):
            match_1nn(float_set(rng.random((3, 4))),
                      binary_set(rng.integers(0, 2, (3, 4))))


class TestNndr:
    def test_ratio_below_threshold_retained(self):
        # query at distance 0.3 from ref0 and 0.6 from ref1: ratio 0.5
        q = float_set([[0.3, 0.0]])
        r = float_set([[0.0, 0.0], [0.9, 0.0]])
        m = match_2nn_nndr(q, r, 0.7)
        assert m.retained_count == 1
        assert m.pairs[0] == (0, 0, pytest.approx(0.3))

    def test_equal_distances_discarded(self):
        q = float_set([[0.0, 0.0]])
        r = float_set([[1.0, 0.0], [-1.0, 0.0]])
        for tau in (0.3, 0.7, 0.99):
            assert match_2nn_nndr(q, r, tau).retained_count == 0
        assert match_2nn_nndr(q, r, 1.0).retained_count == 1

    def test_tau_one_retains_everything(self, rng):
        q = binary_set(rng.integers(0, 2, (25, 48)))
        r = binary_set(rng.integers(0, 2, (40, 48)))
        m = match_2nn_nndr(q, r, 1.0)
        assert m.retained_count == m.total_queries == 25
        assert matching_rate(m) == 100.0

    def test_duplicate_reference_retained(self):
        # d2 == 0 implies d1 == 0: perfect duplicates stay
        q = float_set([[1.0, 1.0]])
        r = float_set([[1.0, 1.0], [1.0, 1.0]])
        m = match_2nn_nndr(q, r, 0.5)
        assert m.retained_count == 1

    def test_reference_too_small(self, rng):
        with pytest.raises(MatchError):
            match_2nn_nndr(float_set(rng.random((3, 4))),
                           float_set(rng.random((1, 4))), 0.7)

    @given(seed=st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_retained_count_monotone_in_tau(self, seed):
        g = np.random.default_rng(seed)
        q = float_set(g.random((15, 6)))
        r = float_set(g.random((20, 6)))
        counts = [match_2nn_nndr(q, r, t).retained_count
                  for t in (0.2, 0.4, 0.6, 0.8, 1.0)]
        assert counts == sorted(counts)


class TestScores:
    def test_sum(self):
        m = MatchSet(((0, 0, 1.0), (1, 1, 2.0), (2, 2, 3.0)), 3, 3)
        assert score_sum_distances(m) == 6.0

    def test_empty_is_infinite(self):
        assert score_sum_distances(MatchSet((), 0, 5)) == math.inf

    def test_rate(self):
        assert matching_rate(MatchSet((), 40, 200)) == 20.0
        assert matching_rate(MatchSet((), 0, 0)) == 0.0


class TestOrderInsensitivity:
    @given(seed=st.integers(0, 2**32 - 1))
    @settings(max_examples=20, deadline=None)
    def test_reference_permutation_preserves_distances(self, seed):
        g = np.random.default_rng(seed)
        q = float_set(g.random((10, 5)))
        ref = g.random((12, 5)).astype(np.float32)
        perm = g.permutation(12)
        m1 = match_1nn(q, FloatDescriptors(ref))
        m2 = match_1nn(q, FloatDescriptors(ref[perm]))
        inv = np.argsort(perm)
        for (q1, r1, d1), (q2, r2, d2) in zip(m1.pairs, m2.pairs):
            assert q1 == q2
            assert d1 == pytest.approx(d2, abs=1e-9)


class TestMatcherParams:
    def test_validation(self):
        MatcherParams(k=2, nndr_threshold=0.7)
        with pytest.raises(ValueError):
            MatcherParams(k=3)
        with pytest.raises(ValueError):
            MatcherParams(nndr_threshold=0.0)
        with pytest.raises(ValueError):
            MatcherParams(nndr_threshold=1.2)
