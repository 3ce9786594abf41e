"""Keypoints, descriptor sets, and the structured-text features format."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import MatchError


@dataclass(frozen=True)
class Keypoint:
    """Salient point: subpixel position, diameter, orientation, saliency.

    ``angle`` is radians in [0, 2*pi), or None when the orientation is
    undefined (callers substitute 0 where an angle is required).
    """

    x: float
    y: float
    size: float
    angle: Optional[float]
    response: float
    octave: int

    def __post_init__(self):
        if self.size <= 0:
            raise ValueError(f"keypoint size must be positive, got {self.size}")
        if self.angle is not None and not 0.0 <= self.angle < 2.0 * math.pi:
            object.__setattr__(self, "angle", self.angle % (2.0 * math.pi))


@dataclass(frozen=True)
class Descriptor:
    """One descriptor: a float vector or a packed bit string."""

    kind: str                 # "float" | "binary"
    data: np.ndarray          # float array, or packed uint8 (MSB-first)
    nbits: int = 0

    @property
    def length(self) -> int:
        return self.nbits if self.kind == "binary" else len(self.data)

    @staticmethod
    def from_floats(values) -> "Descriptor":
        return Descriptor("float", np.asarray(values, dtype=np.float64))

    @staticmethod
    def from_bits(bits) -> "Descriptor":
        bits = np.asarray(list(bits), dtype=np.uint8)
        return Descriptor("binary", np.packbits(bits), nbits=len(bits))


class FloatDescriptors:
    """(n, dim) block of float descriptors (SIFT: 128, SURF: 64)."""

    kind = "float"

    def __init__(self, values: np.ndarray, dim: Optional[int] = None):
        v = np.ascontiguousarray(values, dtype=np.float32)
        if v.ndim != 2:
            if v.size == 0 and dim is not None:
                v = v.reshape(0, dim)
            else:
                raise MatchError(f"float descriptors must be (n, dim), got {v.shape}")
        v.setflags(write=False)
        self.values = v

    @property
    def length(self) -> int:
        return self.values.shape[1]

    def __len__(self) -> int:
        return self.values.shape[0]

    def get(self, i: int) -> Descriptor:
        return Descriptor("float", self.values[i])


class BinaryDescriptors:
    """(n, nbits) block of binary descriptors, stored packed MSB-first."""

    kind = "binary"

    def __init__(self, packed: np.ndarray, nbits: int):
        p = np.ascontiguousarray(packed, dtype=np.uint8)
        nbytes = (nbits + 7) // 8
        if p.ndim != 2 or p.shape[1] != nbytes:
            raise MatchError(f"packed shape {p.shape} does not fit {nbits} bits")
        p.setflags(write=False)
        self.packed = p
        self.nbits = nbits

    @staticmethod
    def from_bits(bits: np.ndarray) -> "BinaryDescriptors":
        """Pack an (n, nbits) array of 0/1 values."""
        bits = np.asarray(bits)
        if bits.ndim != 2:
            raise MatchError(f"bit matrix must be 2-D, got {bits.shape}")
        return BinaryDescriptors(np.packbits(bits.astype(np.uint8), axis=1),
                                 bits.shape[1])

    @property
    def length(self) -> int:
        return self.nbits

    def __len__(self) -> int:
        return self.packed.shape[0]

    def get(self, i: int) -> Descriptor:
        return Descriptor("binary", self.packed[i], nbits=self.nbits)

    def words(self) -> np.ndarray:
        """uint64 view (n, ceil(nbytes/8)), zero-padded; for popcount kernels."""
        n, nbytes = self.packed.shape
        nwords = (nbytes + 7) // 8
        buf = np.zeros((n, nwords * 8), dtype=np.uint8)
        buf[:, :nbytes] = self.packed
        return np.ascontiguousarray(buf.view(np.uint64))


DescriptorSet = Union[FloatDescriptors, BinaryDescriptors]


@dataclass(frozen=True)
class Features:
    """Extraction result: keypoints aligned index-for-index with descriptors."""

    keypoints: tuple
    descriptors: DescriptorSet
    extract_time: float

    def __post_init__(self):
        object.__setattr__(self, "keypoints", tuple(self.keypoints))
        if len(self.keypoints) != len(self.descriptors):
            raise ValueError(
                f"{len(self.keypoints)} keypoints vs {len(self.descriptors)} descriptors")
        if self.extract_time < 0:
            raise ValueError("extract_time must be >= 0")

    def __len__(self) -> int:
        return len(self.keypoints)

    def same_output(self, other: "Features") -> bool:
        """Equality of keypoints and descriptors (timing excluded)."""
        if self.keypoints != other.keypoints:
            return False
        if self.descriptors.kind != other.descriptors.kind:
            return False
        if self.descriptors.kind == "float":
            return np.array_equal(self.descriptors.values, other.descriptors.values)
        return (self.descriptors.nbits == other.descriptors.nbits
                and np.array_equal(self.descriptors.packed, other.descriptors.packed))


# ---------------------------------------------------------------------------
# structured-text export (one record per keypoint), shared with the CLI

_UNDEF_ANGLE = -1.0


def write_features(features: Features, path, detector: str, params: dict) -> None:
    desc = features.descriptors
    lines = [
        "# coverscan-features 1",
        f"# detector: {detector}",
        f"# params: {json.dumps(params, sort_keys=True)}",
        f"# descriptor: {desc.kind} {desc.length}",
        f"# count: {len(features)}",
    ]
    for i, kp in enumerate(features.keypoints):
        angle = _UNDEF_ANGLE if kp.angle is None else kp.angle
        if desc.kind == "binary":
            payload = desc.packed[i].tobytes().hex()
        else:
            payload = ",".join(f"{v:.9g}" for v in desc.values[i])
        lines.append(f"{kp.x!r} {kp.y!r} {kp.size!r} {angle!r} "
                     f"{kp.response!r} {kp.octave} {payload}")
    with open(path, "w", encoding="ascii") as f:
        f.write("\n".join(lines) + "\n")


def read_features(path):
    """Parse a features file; returns (Features, detector, params)."""
    with open(path, "r", encoding="ascii") as f:
        lines = [ln.rstrip("\n") for ln in f]
    meta = {}
    body = []
    for ln in lines:
        if ln.startswith("#"):
            if ":" in ln:
                key, _, val = ln[1:].partition(":")
                meta[key.strip()] = val.strip()
        elif ln.strip():
            body.append(ln)
    if "descriptor" not in meta or "detector" not in meta:
        raise MatchError(f"{path}: not a coverscan features file")
    kind, length = meta["descriptor"].split()
    length = int(length)
    params = json.loads(meta.get("params", "{}"))

    kps = []
    float_rows = []
    packed_rows = []
    for ln in body:
        x, y, size, angle, response, octave, payload = ln.split(" ", 6)
        angle = float(angle)
        kps.append(Keypoint(float(x), float(y), float(size),
                            None if angle == _UNDEF_ANGLE else angle,
                            float(response), int(octave)))
        if kind == "binary":
            packed_rows.append(np.frombuffer(bytes.fromhex(payload), dtype=np.uint8))
        else:
            float_rows.append([float(v) for v in payload.split(",")])
    if kind == "binary":
        nbytes = (length + 7) // 8
        packed = (np.vstack(packed_rows) if packed_rows
                  else np.zeros((0, nbytes), dtype=np.uint8))
        descs: DescriptorSet = BinaryDescriptors(packed, length)
    else:
        arr = (np.asarray(float_rows, dtype=np.float32) if float_rows
               else np.zeros((0, length), dtype=np.float32))
        descs = FloatDescriptors(arr, dim=length)
    return Features(tuple(kps), descs, 0.0), meta["detector"], params
