"""Grayscale raster core: loading, integral images, blurs, warps, gradients.

Every value is immutable after construction and every operation is a pure
function, so everything here is safe to call from any number of workers.
Intensities are kept as float64 in [0, 1]; color inputs are reduced with
the ITU-R 601 luma weights.
"""

from __future__ import annotations

import io
import math
import re
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import GeometryError, ImageError

LUMA_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Single-channel raster with row-major intensities in [0, 1]."""

    pixels: np.ndarray

    def __post_init__(self):
        a = np.ascontiguousarray(self.pixels, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise ImageError(f"expected a 2-D raster with positive size, got shape {a.shape}")
        if not np.isfinite(a).all():
            raise ImageError("image contains non-finite intensities")
        if a.min() < 0.0 or a.max() > 1.0:
            raise ImageError("intensities must lie in [0, 1]")
        a.setflags(write=False)
        object.__setattr__(self, "pixels", a)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def allclose(self, other: "GrayImage", tol: float = 1e-9) -> bool:
        return (self.pixels.shape == other.pixels.shape
                and bool(np.allclose(self.pixels, other.pixels, atol=tol, rtol=0)))


def _clip_unit(a: np.ndarray) -> np.ndarray:
    # guards against float-eps excursions outside [0, 1]
    return np.clip(a, 0.0, 1.0)


@dataclass(frozen=True, eq=False)
class IntegralImage:
    """Cumulative-sum raster: sums[y, x] = sum of all pixels at coords <= (x, y)."""

    width: int
    height: int
    _padded: np.ndarray = field(repr=False)

    @property
    def sums(self) -> np.ndarray:
        return self._padded[1:, 1:]

    def box_sum(self, x0: int, y0: int, x1: int, y1: int) -> float:
        """Exact sum of source pixels over the closed rectangle [x0,x1]x[y0,y1]."""
        if not (0 <= x0 <= x1 < self.width and 0 <= y0 <= y1 < self.height):
            raise GeometryError(
                f"rectangle ({x0},{y0})-({x1},{y1}) outside {self.width}x{self.height}")
        p = self._padded
        return float(p[y1 + 1, x1 + 1] - p[y0, x1 + 1] - p[y1 + 1, x0] + p[y0, x0])


def integral_image(img: GrayImage) -> IntegralImage:
    p = np.zeros((img.height + 1, img.width + 1), dtype=np.float64)
    np.cumsum(np.cumsum(img.pixels, axis=0), axis=1, out=p[1:, 1:])
    p.setflags(write=False)
    return IntegralImage(img.width, img.height, p)


def box_sum(ii: IntegralImage, x0: int, y0: int, x1: int, y1: int) -> float:
    return ii.box_sum(x0, y0, x1, y1)


# ---------------------------------------------------------------------------
# raster IO: binary PGM (P5) is native, PNG goes through Pillow


def load_image(path) -> GrayImage:
    try:
        with open(path, "rb") as f:
            raw = f.read()
    except OSError as exc:
        raise ImageError(f"cannot read {path}: {exc}") from exc
    if raw[:2] == b"P5":
        return _decode_pgm(raw, path)
    if raw[:8] == b"\x89PNG\r\n\x1a\n":
        return _decode_png(raw, path)
    raise ImageError(f"{path}: unsupported raster format (need binary PGM or PNG)")


def _decode_pgm(raw: bytes, path) -> GrayImage:
    # header = magic, width, height, maxval as whitespace-separated tokens,
    # with '#' comments allowed between them
    pos = 2
    fields = []
    while len(fields) < 3:
        m = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\d+)").match(raw, pos)
        if m is None:
            raise ImageError(f"{path}: malformed PGM header")
        fields.append(int(m.group(1)))
        pos = m.end()
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise ImageError(f"{path}: zero-dimension image")
    if not 0 < maxval <= 255:
        raise ImageError(f"{path}: unsupported PGM maxval {maxval}")
    pos += 1  # single whitespace byte after maxval
    data = raw[pos:pos + width * height]
    if len(data) != width * height:
        raise ImageError(f"{path}: truncated PGM payload")
    a = np.frombuffer(data, dtype=np.uint8).reshape(height, width)
    return GrayImage(a.astype(np.float64) / maxval)


def _decode_png(raw: bytes, path) -> GrayImage:
    try:
        from PIL import Image as PilImage
    except ImportError as exc:  # pragma: no cover
        raise ImageError("PNG support requires Pillow") from exc
    try:
        with PilImage.open(io.BytesIO(raw)) as im:
            im.load()
            mode = im.mode
            a = np.asarray(im)
    except Exception as exc:
        raise ImageError(f"{path}: undecodable PNG ({exc})") from exc
    if mode == "L":
        return GrayImage(a.astype(np.float64) / 255.0)
    if mode == "RGB":
        rgb = a.astype(np.float64) / 255.0
        gray = (LUMA_WEIGHTS[0] * rgb[:, :, 0]
                + LUMA_WEIGHTS[1] * rgb[:, :, 1]
                + LUMA_WEIGHTS[2] * rgb[:, :, 2])
        return GrayImage(_clip_unit(gray))
    raise ImageError(f"{path}: unsupported PNG mode {mode!r} (need 8-bit gray or RGB)")


def save_image(img: GrayImage, path) -> None:
    """Write as binary PGM (maxval 255) or PNG, chosen by file extension."""
    q = np.clip(np.rint(img.pixels * 255.0), 0, 255).astype(np.uint8)
    name = str(path).lower()
    if name.endswith(".pgm"):
        header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
        with open(path, "wb") as f:
            f.write(header)
            f.write(q.tobytes())
    elif name.endswith(".png"):
        from PIL import Image as PilImage
        PilImage.fromarray(q, mode="L").save(path, format="PNG")
    else:
        raise ImageError(f"unsupported output extension for {path} (use .pgm or .png)")


# ---------------------------------------------------------------------------
# smoothing / resampling


def gaussian_kernel(sigma: float) -> np.ndarray:
    """1-D Gaussian taps with radius ceil(3*sigma), normalized to sum 1."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    r = math.ceil(3.0 * sigma)
    x = np.arange(-r, r + 1, dtype=np.float64)
    k = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return k / k.sum()


def gaussian_blur(img: GrayImage, sigma: float) -> GrayImage:
    return GrayImage(blur_array(img.pixels, sigma))


def blur_array(a: np.ndarray, sigma: float) -> np.ndarray:
    """gaussian_blur on a bare array (used on internal scale-space rasters)."""
    out = kernels.conv_sep_replicate(np.ascontiguousarray(a, dtype=np.float64),
                                     gaussian_kernel(sigma))
    return np.asarray(out)


def downsample_half(img: GrayImage) -> GrayImage:
    if img.width < 2 or img.height < 2:
        raise ImageError(f"cannot halve a {img.width}x{img.height} image")
    return GrayImage(img.pixels[::2, ::2].copy())


def resize_bilinear(img: GrayImage, out_w: int, out_h: int) -> GrayImage:
    """Bilinear resample to out_w x out_h (pixel-center aligned, edges clamped)."""
    if out_w < 1 or out_h < 1:
        raise ImageError(f"bad target size {out_w}x{out_h}")
    sx = img.width / out_w
    sy = img.height / out_h
    xs = (np.arange(out_w) + 0.5) * sx - 0.5
    ys = (np.arange(out_h) + 0.5) * sy - 0.5
    gx, gy = np.meshgrid(np.clip(xs, 0, img.width - 1),
                         np.clip(ys, 0, img.height - 1))
    return GrayImage(_clip_unit(sample_bilinear(img.pixels, gx, gy)))


def sample_bilinear(a: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Bilinear lookup at float coords; samples outside the raster read as 0."""
    h, w = a.shape
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    fx = xs - x0
    fy = ys - y0

    def tap(yy, xx):
        inside = (xx >= 0) & (xx < w) & (yy >= 0) & (yy < h)
        v = a[np.clip(yy, 0, h - 1), np.clip(xx, 0, w - 1)]
        return np.where(inside, v, 0.0)

    return ((1 - fy) * ((1 - fx) * tap(y0, x0) + fx * tap(y0, x0 + 1))
            + fy * ((1 - fx) * tap(y0 + 1, x0) + fx * tap(y0 + 1, x0 + 1)))


# ---------------------------------------------------------------------------
# homographies


@dataclass(frozen=True, eq=False)
class Homography:
    """3x3 projective map from source to target pixel coordinates."""

    m: np.ndarray

    def __post_init__(self):
        a = np.ascontiguousarray(self.m, dtype=np.float64)
        if a.shape != (3, 3):
            raise GeometryError(f"homography must be 3x3, got {a.shape}")
        if abs(np.linalg.det(a)) <= 1e-12:
            raise GeometryError("homography is singular")
        a.setflags(write=False)
        object.__setattr__(self, "m", a)

    @staticmethod
    def identity() -> "Homography":
        return Homography(np.eye(3))

    @staticmethod
    def translation(tx: float, ty: float) -> "Homography":
        return Homography(np.array([[1.0, 0.0, tx], [0.0, 1.0, ty], [0.0, 0.0, 1.0]]))

    @staticmethod
    def scaling(sx: float, sy: float) -> "Homography":
        return Homography(np.diag([float(sx), float(sy), 1.0]))

    @staticmethod
    def rotation_about(angle: float, cx: float, cy: float) -> "Homography":
        c, s = math.cos(angle), math.sin(angle)
        rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        t_in = Homography.translation(-cx, -cy).m
        t_out = Homography.translation(cx, cy).m
        return Homography(t_out @ rot @ t_in)

    @staticmethod
    def from_points(src, dst) -> "Homography":
        """Least-squares homography from >= 4 point correspondences (DLT)."""
        src = np.asarray(src, dtype=np.float64)
        dst = np.asarray(dst, dtype=np.float64)
        if src.shape != dst.shape or src.shape[0] < 4 or src.shape[1] != 2:
            raise GeometryError("need matching (n>=4, 2) point arrays")
        rows = []
        for (x, y), (u, v) in zip(src, dst):
            rows.append([x, y, 1, 0, 0, 0, -u * x, -u * y, -u])
            rows.append([0, 0, 0, x, y, 1, -v * x, -v * y, -v])
        a = np.asarray(rows)
        _, _, vt = np.linalg.svd(a)
        h = vt[-1].reshape(3, 3)
        if abs(h[2, 2]) < 1e-12:
            raise GeometryError("degenerate correspondences")
        return Homography(h / h[2, 2])

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.m))

    def compose(self, other: "Homography") -> "Homography":
        """self after other: (self.compose(other))(p) = self(other(p))."""
        return Homography(self.m @ other.m)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Project (n, 2) points; raises if any point maps to infinity."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        ones = np.ones((pts.shape[0], 1))
        p = np.hstack([pts, ones]) @ self.m.T
        w = p[:, 2]
        if np.any(np.abs(w) < 1e-12):
            raise GeometryError("point projects to infinity")
        return p[:, :2] / w[:, None]


def warp_homography(img: GrayImage, h: Homography, out_w: int, out_h: int) -> GrayImage:
    """Inverse-map warp with bilinear interpolation; outside reads as 0."""
    if out_w < 1 or out_h < 1:
        raise GeometryError(f"bad output size {out_w}x{out_h}")
    hinv = h.inverse().m
    gx, gy = np.meshgrid(np.arange(out_w, dtype=np.float64),
                         np.arange(out_h, dtype=np.float64))
    w = hinv[2, 0] * gx + hinv[2, 1] * gy + hinv[2, 2]
    w = np.where(np.abs(w) < 1e-12, 1e-12, w)
    sx = (hinv[0, 0] * gx + hinv[0, 1] * gy + hinv[0, 2]) / w
    sy = (hinv[1, 0] * gx + hinv[1, 1] * gy + hinv[1, 2]) / w
    return GrayImage(_clip_unit(sample_bilinear(img.pixels, sx, sy)))


# ---------------------------------------------------------------------------
# gradients


def _correlate1d_replicate(a: np.ndarray, taps, axis: int) -> np.ndarray:
    taps = np.asarray(taps, dtype=np.float64)
    r = (len(taps) - 1) // 2
    pad = [(0, 0), (0, 0)]
    pad[axis] = (r, r)
    padded = np.pad(a, pad, mode="edge")
    out = np.zeros_like(a, dtype=np.float64)
    n = a.shape[axis]
    for i, w in enumerate(taps):
        sl = [slice(None), slice(None)]
        sl[axis] = slice(i, i + n)
        out += w * padded[tuple(sl)]
    return out


def sobel_gradient(img) -> tuple[np.ndarray, np.ndarray]:
    """3x3 Sobel responses (gx, gy) with replicated edges.

    Scaled by 1/8 so that on a linear ramp the response equals the
    central-difference slope.  Accepts a GrayImage or a bare float raster.
    """
    a = img.pixels if isinstance(img, GrayImage) else np.asarray(img, dtype=np.float64)
    smooth = (0.25, 0.5, 0.25)
    deriv = (-0.5, 0.0, 0.5)
    gx = _correlate1d_replicate(_correlate1d_replicate(a, deriv, 1), smooth, 0)
    gy = _correlate1d_replicate(_correlate1d_replicate(a, deriv, 0), smooth, 1)
    return gx, gy
