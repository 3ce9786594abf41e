"""Backend kernels: numpy/native parity plus the diffusion and FAST oracles."""

import numpy as np
import pytest

from coverscan import kernels
from coverscan.image import GrayImage, gaussian_blur, gaussian_kernel
from coverscan.kernels import _python

backends = list(kernels.backends().items())


def fast_oracle(img, x, y, t):
    """Exhaustive 16-arc FAST-9 check, independent of the shipped kernel."""
    diffs = [img[y + int(dy), x + int(dx)] - img[y, x]
             for dx, dy in zip(_python.CIRCLE_DX, _python.CIRCLE_DY)]
    best = 0.0
    corner = False
    for start in range(16):
        arc = [diffs[(start + j) % 16] for j in range(9)]
        if all(d > t for d in arc):
            corner = True
            best = max(best, min(abs(d) for d in arc))
        if all(d < -t for d in arc):
            corner = True
            best = max(best, min(abs(d) for d in arc))
    return corner, best


@pytest.mark.parametrize("name,impl", backends)
class TestBackends:
    def test_conv_matches_reference(self, name, impl, rng):
        img = rng.random((30, 41))
        k = gaussian_kernel(1.3)
        got = np.asarray(impl.conv_sep_replicate(img, k))
        want = _python.conv_sep_replicate(img, k)
        assert np.allclose(got, want, atol=1e-12)

    def test_fed_conserves_mass(self, name, impl, rng):
        L = rng.random((25, 33))
        g = 0.2 + 0.8 * rng.random((25, 33))
        out = np.asarray(impl.fed_step(L, g, 0.24))
        assert out.sum() == pytest.approx(L.sum(), rel=1e-6)

    def test_fed_constant_fixed_point(self, name, impl):
        L = np.full((12, 14), 0.3)
        g = np.full((12, 14), 0.7)
        out = np.asarray(impl.fed_step(L, g, 0.25))
        assert np.abs(out - 0.3).max() <= 1e-15

    def test_fed_linear_limit_matches_gaussian(self, name, impl, rng):
        # with g == 1 diffusion to time T equals Gaussian blur sigma=sqrt(2T)
        base = gaussian_blur(GrayImage(rng.random((40, 52))), 1.0).pixels
        g = np.ones_like(base)
        T, tau = 2.0, 0.1
        L = base
        for _ in range(int(T / tau)):
            L = np.asarray(impl.fed_step(L, g, tau))
        want = gaussian_blur(GrayImage(base), np.sqrt(2 * T)).pixels
        m = 10
        assert np.abs(L[m:-m, m:-m] - want[m:-m, m:-m]).max() <= 5e-3

    def test_fast_scores_match_oracle(self, name, impl, rng):
        img = rng.random((20, 22))
        t = 0.12
        scores = np.asarray(impl.fast_score_map(img, t))
        for y in range(3, 17):
            for x in range(3, 19):
                corner, best = fast_oracle(img, x, y, t)
                assert corner == (scores[y, x] > 0)
                if corner:
                    assert scores[y, x] == pytest.approx(best, abs=1e-12)

    def test_hamming_knn_matches_double_loop(self, name, impl, rng):
        q = rng.integers(0, 2**63, (17, 3)).astype(np.uint64)
        r = rng.integers(0, 2**63, (29, 3)).astype(np.uint64)
        idx, dist = impl.hamming_knn(q, r, 2)
        for i in range(len(q)):
            d = [int(np.bitwise_count(q[i] ^ r[j]).sum()) for j in range(len(r))]
            order = sorted(range(len(r)), key=lambda j: (d[j], j))
            assert list(idx[i]) == order[:2]
            assert list(dist[i]) == [d[order[0]], d[order[1]]]


@pytest.mark.skipif(len(backends) < 2, reason="native kernels not built")
class TestBackendParity:
    def test_all_kernels_agree(self, rng):
        nat = kernels.backends()["native"]
        py = kernels.backends()["python"]
        img = rng.random((33, 47))
        k = gaussian_kernel(2.1)
        assert np.allclose(np.asarray(nat.conv_sep_replicate(img, k)),
                           py.conv_sep_replicate(img, k), atol=1e-12)
        g = 0.1 + 0.9 * rng.random(img.shape)
        assert np.allclose(np.asarray(nat.fed_step(img, g, 0.2)),
                           py.fed_step(img, g, 0.2), atol=1e-14)
        assert np.allclose(np.asarray(nat.fast_score_map(img, 0.08)),
                           py.fast_score_map(img, 0.08), atol=1e-14)
        q = rng.integers(0, 2**63, (40, 8)).astype(np.uint64)
        r = rng.integers(0, 2**63, (60, 8)).astype(np.uint64)
        for k_ in (1, 2):
            ia, da = nat.hamming_knn(q, r, k_)
            ib, db = py.hamming_knn(q, r, k_)
            assert np.array_equal(np.asarray(ia), ib)
            assert np.array_equal(np.asarray(da), db)
        cand = np.concatenate([rng.permutation(60)[:7] for _ in range(40)]).astype(np.int64)
        counts = np.full(40, 7, dtype=np.int64)
        ia, da = nat.hamming_select(q, r, cand, counts, 2)
        ib, db = py.hamming_select(q, r, cand, counts, 2)
        assert np.array_equal(np.asarray(ia), ib)
        assert np.array_equal(np.asarray(da), db)
