"""Convertible feature modules: SE, IN/GN, GE (gather-only), CBAM channel
attention.

Each forward pass runs in one of two modes sharing the same parameters:

* global (``window=None``): statistics pooled over the whole spatial
  extent, one gate or (mu, sigma) per channel/group -- the training-time
  semantics.
* local (``window=WindowSpec``): the pooled scalar becomes a per-pixel
  map of windowed statistics and the rest of the module is applied
  pointwise. No parameter changes, no retraining.

For every pixel whose window lies fully inside the map, the local output
equals the global module applied to the window-sized crop centered there.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidGroupCount, ShapeMismatch
from .integral import PointwiseMap, local_aggregate, local_max
from .tensor import FeatureMap, WindowSpec


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


@dataclass(frozen=True)
class SeParams:
    """Squeeze-excite MLP weights: C -> C/ratio -> C, ReLU then sigmoid."""

    reduce_weights: np.ndarray  # (C, C // ratio)
    expand_weights: np.ndarray  # (C // ratio, C)
    ratio: int

    def __post_init__(self):
        r = np.asarray(self.reduce_weights, dtype=np.float64)
        e = np.asarray(self.expand_weights, dtype=np.float64)
        if r.ndim != 2 or e.ndim != 2:
            raise ShapeMismatch("SE weights must be 2-D matrices")
        c, hidden = r.shape
        if self.ratio < 1 or c % self.ratio != 0 or hidden != c // self.ratio:
            raise ShapeMismatch(
                f"reduce weights {r.shape} inconsistent with ratio {self.ratio}"
            )
        if e.shape != (hidden, c):
            raise ShapeMismatch(f"expand weights {e.shape}, expected {(hidden, c)}")
        object.__setattr__(self, "reduce_weights", r)
        object.__setattr__(self, "expand_weights", e)

    @property
    def channels(self) -> int:
        return self.reduce_weights.shape[0]


@dataclass(frozen=True)
class NormParams:
    """Per-channel affine plus group count: groups=C is instance norm,
    any other divisor of C is group norm."""

    gamma: np.ndarray  # (C,)
    beta: np.ndarray  # (C,)
    eps: float = 1e-5
    groups: int = 1

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=np.float64).reshape(-1)
        b = np.asarray(self.beta, dtype=np.float64).reshape(-1)
        if g.shape != b.shape:
            raise ShapeMismatch(f"gamma {g.shape} vs beta {b.shape}")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.groups < 1 or g.size % self.groups != 0:
            raise InvalidGroupCount(
                f"groups {self.groups} does not divide C={g.size}"
            )
        object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "beta", b)

    @property
    def channels(self) -> int:
        return self.gamma.size


def _check_channels(x: FeatureMap, c: int):
    if x.channels != c:
        raise ShapeMismatch(f"feature map has {x.channels} channels, params want {c}")


def _se_mlp(pooled: np.ndarray, p: SeParams) -> np.ndarray:
    # pooled: (..., C) -> gate (..., C)
    hidden = np.maximum(pooled @ p.reduce_weights, 0.0)
    return _sigmoid(hidden @ p.expand_weights)


def _channel_means(x: FeatureMap, window: WindowSpec | None) -> np.ndarray:
    if window is None:
        return x.data.mean(axis=(1, 2))  # (C,)
    return np.stack(
        [local_aggregate(ch, PointwiseMap.IDENTITY, window) for ch in x.data]
    )  # (C, H, W)


def se_forward(x: FeatureMap, p: SeParams, window: WindowSpec | None = None) -> FeatureMap:
    """Squeeze-and-excitation gating; local mode gates every pixel by the
    MLP of its windowed channel means."""
    _check_channels(x, p.channels)
    pooled = _channel_means(x, window)
    if window is None:
        gate = _se_mlp(pooled, p)  # (C,)
        return FeatureMap(x.data * gate[:, None, None])
    c, h, w = pooled.shape
    gate = _se_mlp(pooled.reshape(c, -1).T, p).T.reshape(c, h, w)
    return FeatureMap(x.data * gate)


def norm_forward(x: FeatureMap, p: NormParams, window: WindowSpec | None = None) -> FeatureMap:
    """Instance/group normalization with affine.

    Group statistics are means over the group's channels of per-channel
    aggregates (spatially global or windowed), so groups=C gives IN.
    """
    _check_channels(x, p.channels)
    c = x.channels
    gs = c // p.groups
    grouped = x.data.reshape(p.groups, gs, x.height, x.width)
    if window is None:
        mu = grouped.mean(axis=(1, 2, 3), keepdims=True)
        var = (grouped * grouped).mean(axis=(1, 2, 3), keepdims=True) - mu * mu
        var = np.maximum(var, 0.0)
    else:
        mu = np.empty_like(grouped)
        sq = np.empty_like(grouped)
        for g in range(p.groups):
            for i in range(gs):
                ch = grouped[g, i]
                mu[g, i] = local_aggregate(ch, PointwiseMap.IDENTITY, window)
                sq[g, i] = local_aggregate(ch, PointwiseMap.SQUARE, window)
        mu = mu.mean(axis=1, keepdims=True)
        var = np.maximum(sq.mean(axis=1, keepdims=True) - mu * mu, 0.0)
    normed = (grouped - mu) / np.sqrt(var + p.eps)
    normed = normed.reshape(c, x.height, x.width)
    out = normed * p.gamma[:, None, None] + p.beta[:, None, None]
    return FeatureMap(out)


def ge_forward(x: FeatureMap, window: WindowSpec | None = None) -> FeatureMap:
    """Parameter-free gather gate: sigmoid of the pooled channel mean."""
    pooled = _channel_means(x, window)
    if window is None:
        return FeatureMap(x.data * _sigmoid(pooled)[:, None, None])
    return FeatureMap(x.data * _sigmoid(pooled))


def cbam_channel_forward(
    x: FeatureMap, p: SeParams, window: WindowSpec | None = None
) -> FeatureMap:
    """CBAM channel branch: shared MLP over avg-pooled and max-pooled
    statistics, summed before the sigmoid."""
    _check_channels(x, p.channels)
    avg = _channel_means(x, window)
    if window is None:
        mx = x.data.max(axis=(1, 2))
        hidden = np.maximum(avg @ p.reduce_weights, 0.0) @ p.expand_weights
        hidden += np.maximum(mx @ p.reduce_weights, 0.0) @ p.expand_weights
        gate = _sigmoid(hidden)
        return FeatureMap(x.data * gate[:, None, None])
    mx = np.stack([local_max(ch, window) for ch in x.data])
    c, h, w = avg.shape
    flat_avg = avg.reshape(c, -1).T
    flat_max = mx.reshape(c, -1).T
    pre = np.maximum(flat_avg @ p.reduce_weights, 0.0) @ p.expand_weights
    pre += np.maximum(flat_max @ p.reduce_weights, 0.0) @ p.expand_weights
    gate = _sigmoid(pre).T.reshape(c, h, w)
    return FeatureMap(x.data * gate)


# --- multiply-accumulate accounting -----------------------------------------
#
# Convention: dense (MLP) multiply-adds and elementwise gating multiplies
# are counted; pooling accumulation, maxima and normalization statistics
# count as zero, as in the usual conv-net MAC counters. Overheads are
# reported against a host-network budget: a 4-stage UNet stand-in with
# two 3x3 convs per stage in the encoder and decoder, channels doubling
# as resolution halves, which costs 16 * 9 * C^2 * H * W MACs.

HOST_CONVS_PER_STAGE = 4
HOST_STAGES = 4


def host_macs(c: int, h: int, w: int) -> int:
    # Channel doubling cancels resolution quartering, so every conv costs
    # the same 9 * C^2 * H * W.
    return HOST_STAGES * HOST_CONVS_PER_STAGE * 9 * c * c * h * w


def module_macs(kind: str, c: int, h: int, w: int, ratio: int = 16) -> dict:
    """Global and local MAC counts for one module plus host-relative overhead."""
    hw = h * w
    gate = c * hw
    mlp = 2 * c * (c // ratio)
    if kind == "se":
        g, l = mlp + gate, mlp * hw + gate
    elif kind == "cbam":
        g, l = 2 * mlp + gate, 2 * mlp * hw + gate
    elif kind == "ge":
        g = l = gate
    elif kind in ("in", "gn"):
        g = l = 2 * c * hw
    else:
        raise ValueError(f"unknown module kind {kind!r}")
    host = host_macs(c, h, w)
    return {
        "global_macs": g,
        "local_macs": l,
        "host_macs": host,
        "overhead": (l - g) / (host + g),
    }
