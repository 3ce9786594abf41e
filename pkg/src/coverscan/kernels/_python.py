"""Numpy implementations of the hot kernels.

Used when the compiled extension is unavailable (or forced via
``COVERSCAN_KERNELS=python``).  Semantics match ``_native.pyx`` exactly;
only speed differs.
"""

import numpy as np

BACKEND_NAME = "python"

# Offsets of the 16-pixel Bresenham circle of radius 3, clockwise from 12
# o'clock (dx, dy with y growing downward).
CIRCLE_DX = np.array([0, 1, 2, 3, 3, 3, 2, 1, 0, -1, -2, -3, -3, -3, -2, -1])
CIRCLE_DY = np.array([-3, -3, -2, -1, 0, 1, 2, 3, 3, 3, 2, 1, 0, -1, -2, -3])


def conv_sep_replicate(img, kernel):
    """Separable 2-D convolution (same kernel on both axes), replicated edges."""
    out = _conv_axis(img, kernel, axis=1)
    return _conv_axis(out, kernel, axis=0)


def _conv_axis(img, kernel, axis):
    r = (len(kernel) - 1) // 2
    pad = [(0, 0), (0, 0)]
    pad[axis] = (r, r)
    padded = np.pad(img, pad, mode="edge")
    out = np.zeros_like(img)
    n = img.shape[axis]
    for i, w in enumerate(kernel):
        sl = [slice(None), slice(None)]
        sl[axis] = slice(i, i + n)
        out += w * padded[tuple(sl)]
    return out


def fed_step(L, g, tau):
    """One explicit diffusion step L + tau*div(g grad L).

    Conductivity at half points is the mean of the two neighbours; borders
    are zero-flux, which makes the scheme exactly conservative.
    """
    flux_e = np.zeros_like(L)
    flux_s = np.zeros_like(L)
    # flux through the east face of each pixel (0 on the last column)
    flux_e[:, :-1] = 0.5 * (g[:, :-1] + g[:, 1:]) * (L[:, 1:] - L[:, :-1])
    flux_s[:-1, :] = 0.5 * (g[:-1, :] + g[1:, :]) * (L[1:, :] - L[:-1, :])
    div = flux_e.copy()
    div[:, 1:] -= flux_e[:, :-1]
    div += flux_s
    div[1:, :] -= flux_s[:-1, :]
    return L + tau * div


def fast_score_map(img, t):
    """FAST-9 segment-test score for every pixel.

    Score is 0 for non-corners; otherwise the maximum over all contiguous
    9-pixel arcs (all brighter than center+t or all darker than center-t)
    of the arc's minimum absolute center difference.  A 3-pixel border is
    always 0.
    """
    h, w = img.shape
    scores = np.zeros((h, w))
    if h < 7 or w < 7:
        return scores
    center = img[3:h - 3, 3:w - 3]
    diffs = np.empty((16, h - 6, w - 6))
    for k in range(16):
        dx, dy = int(CIRCLE_DX[k]), int(CIRCLE_DY[k])
        diffs[k] = img[3 + dy:h - 3 + dy, 3 + dx:w - 3 + dx] - center

    for signed in (diffs - t, -diffs - t):
        # signed[k] > 0 where the ring pixel passes the bright (resp. dark)
        # test; the margin itself is the candidate score contribution.
        best = np.full(center.shape, -np.inf)
        for start in range(16):
            idx = [(start + j) % 16 for j in range(9)]
            arc_min = signed[idx].min(axis=0)
            best = np.maximum(best, arc_min)
        mask = best > 0
        scores[3:h - 3, 3:w - 3][mask] = np.maximum(
            scores[3:h - 3, 3:w - 3][mask], best[mask] + t)
    return scores


def hamming_knn(query, ref, k):
    """Exact k nearest neighbours under Hamming distance, k in {1, 2}.

    ``query``/``ref`` are uint64 arrays of packed descriptor words.  Ties
    resolve to the lowest reference index.  Returns (indices, distances)
    of shape (nq, k).
    """
    nq = query.shape[0]
    idx = np.empty((nq, k), dtype=np.int64)
    dist = np.empty((nq, k), dtype=np.int64)
    chunk = max(1, 4_000_000 // max(1, ref.shape[0]))
    for lo in range(0, nq, chunk):
        q = query[lo:lo + chunk]
        d = np.bitwise_count(q[:, None, :] ^ ref[None, :, :]).sum(
            axis=2, dtype=np.int64)
        first = d.argmin(axis=1)
        rows = np.arange(d.shape[0])
        idx[lo:lo + chunk, 0] = first
        dist[lo:lo + chunk, 0] = d[rows, first]
        if k == 2:
            d[rows, first] = np.iinfo(np.int64).max
            second = d.argmin(axis=1)
            idx[lo:lo + chunk, 1] = second
            dist[lo:lo + chunk, 1] = d[rows, second]
    return idx, dist


def hamming_select(query, ref, candidates, counts, k):
    """k-NN among per-query candidate subsets (LSH probing support).

    ``candidates`` is a flat int64 array of reference row ids; query i owns
    the slice ``candidates[starts[i]:starts[i]+counts[i]]`` where ``starts``
    is the running sum of ``counts``.  Queries with zero candidates get
    index -1 / distance -1 entries.
    """
    nq = query.shape[0]
    idx = np.full((nq, k), -1, dtype=np.int64)
    dist = np.full((nq, k), -1, dtype=np.int64)
    start = 0
    for i in range(nq):
        c = candidates[start:start + counts[i]]
        start += counts[i]
        if c.size == 0:
            continue
        d = np.bitwise_count(ref[c] ^ query[i][None, :]).sum(
            axis=1, dtype=np.int64)
        order = np.lexsort((c, d))
        take = min(k, c.size)
        idx[i, :take] = c[order[:take]]
        dist[i, :take] = d[order[:take]]
    return idx, dist
