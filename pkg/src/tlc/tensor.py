"""Feature-map data model, the TLCT on-disk tensor format, and PSNR/MSE.

File format (little-endian):
    bytes 0-3   magic ``TLCT``
    bytes 4-7   u32 version (currently 1)
    bytes 8-19  u32 C, u32 H, u32 W
    then        C*H*W float32 values, row-major within channel,
                channels outermost. No padding, no checksum.

Values live on disk as float32; in memory everything is float64 so that
window sums over large windows do not lose precision.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import (
    IoFailure,
    MalformedHeader,
    NonFiniteValue,
    ShapeMismatch,
    TruncatedPayload,
)

MAGIC = b"TLCT"
VERSION = 1
_HEADER = struct.Struct("<4sIIII")


@dataclass(frozen=True)
class FeatureMap:
    """A C x H x W grid of finite real-valued activations.

    ``data`` is a float64 array of shape (C, H, W); it is never mutated
    after construction and may be shared freely across threads.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 3:
            raise ShapeMismatch(f"expected (C, H, W), got shape {arr.shape}")
        if any(d < 1 for d in arr.shape):
            raise ShapeMismatch(f"all dims must be positive, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise NonFiniteValue("feature map contains NaN or Inf")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


class Alignment(Enum):
    CENTERED = "centered"


class EdgeMode(Enum):
    REPLICATE_RESULT = "replicate-result"


@dataclass(frozen=True)
class WindowSpec:
    """Local window size plus alignment/edge semantics.

    The window is clamped to the map (effective size min(k, dim)), so a
    window at least as large as the map degenerates to the global
    operator. Window centers sit at top-left + (k-1)//2 and the interior
    result is replicate-padded back to full size.
    """

    k_h: int
    k_w: int
    alignment: Alignment = Alignment.CENTERED
    edge_mode: EdgeMode = EdgeMode.REPLICATE_RESULT

    def __post_init__(self):
        if self.k_h < 1 or self.k_w < 1:
            raise ValueError(f"window must be >= 1, got ({self.k_h}, {self.k_w})")

    def effective(self, h: int, w: int) -> tuple[int, int]:
        return min(self.k_h, h), min(self.k_w, w)

    def covers(self, h: int, w: int) -> bool:
        return self.k_h >= h and self.k_w >= w


@dataclass(frozen=True)
class MetricReport:
    mse: float
    psnr_db: float

    def __post_init__(self):
        if (self.mse == 0.0) != math.isinf(self.psnr_db):
            raise ValueError("psnr_db must be +inf exactly when mse is zero")


def read_tensor(path) -> FeatureMap:
    """Read a TLCT file back into a FeatureMap, bit-exactly."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if len(raw) < _HEADER.size:
        raise MalformedHeader(f"{path}: file shorter than header")
    magic, version, c, h, w = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise MalformedHeader(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise MalformedHeader(f"{path}: unsupported version {version}")
    if c < 1 or h < 1 or w < 1:
        raise MalformedHeader(f"{path}: non-positive dims ({c}, {h}, {w})")
    count = c * h * w
    payload = raw[_HEADER.size:]
    if len(payload) < 4 * count:
        raise TruncatedPayload(
            f"{path}: expected {4 * count} payload bytes, got {len(payload)}"
        )
    values = np.frombuffer(payload[: 4 * count], dtype="<f4").astype(np.float64)
    return FeatureMap(values.reshape(c, h, w))


def write_tensor(fmap: FeatureMap, path) -> None:
    """Write a FeatureMap as a TLCT file readable by read_tensor."""
    header = _HEADER.pack(MAGIC, VERSION, fmap.channels, fmap.height, fmap.width)
    payload = fmap.data.astype("<f4").tobytes()
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(payload)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def psnr(reference: FeatureMap, candidate: FeatureMap, peak: float) -> MetricReport:
    """Mean squared error and 10*log10(peak^2 / mse) in dB.

    Identical inputs give mse 0 and psnr_db +inf.
    """
    if reference.data.shape != candidate.data.shape:
        raise ShapeMismatch(
            f"{reference.data.shape} vs {candidate.data.shape}"
        )
    if peak <= 0:
        raise ValueError("peak must be positive")
    diff = reference.data - candidate.data
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return MetricReport(mse=0.0, psnr_db=math.inf)
    return MetricReport(mse=mse, psnr_db=10.0 * math.log10(peak * peak / mse))
