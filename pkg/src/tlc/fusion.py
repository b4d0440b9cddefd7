"""Overlapping-window slicing and overlap-averaging fusion.

This is the conversion route for operators whose local form cannot be
expressed through integral tables (channel-wise transposed attention):
slice the map into overlapping windows, run the operator independently
on each window, and average the overlaps back together. The same
machinery, driven by a whole-model pipeline instead of a single
operator, is the patch-inference baseline whose seams the seam metric
quantifies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OpShapeViolation, ShapeMismatch
from .tensor import FeatureMap


@dataclass(frozen=True)
class TilePlan:
    """Window size, stride, and the top-left placements covering a map.

    Placements sit at multiples of the stride; the final placement per
    axis is clamped so the last window ends exactly at the map edge, so
    coverage is total without padding.
    """

    window: tuple[int, int]
    stride: tuple[int, int]
    placements: tuple[tuple[int, int], ...]
    shape: tuple[int, int]  # (H, W) of the planned map


@dataclass(frozen=True)
class AttnParams:
    """Temperature of the channel-attention stand-in."""

    temperature: float = 1.0

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")


def _axis_starts(length: int, k: int, s: int) -> list[int]:
    starts = list(range(0, length - k + 1, s))
    if starts[-1] != length - k:
        starts.append(length - k)
    return starts


def plan_tiles(h: int, w: int, window: tuple[int, int], stride: tuple[int, int]) -> TilePlan:
    """Row-major overlapping-window placements with clamped final tiles."""
    k_h, k_w = min(window[0], h), min(window[1], w)
    s_h, s_w = stride
    if k_h < 1 or k_w < 1 or s_h < 1 or s_w < 1:
        raise ValueError("window and stride must be >= 1")
    s_h, s_w = min(s_h, k_h), min(s_w, k_w)
    rows = _axis_starts(h, k_h, s_h)
    cols = _axis_starts(w, k_w, s_w)
    placements = tuple((r, c) for r in rows for c in cols)
    return TilePlan(window=(k_h, k_w), stride=(s_h, s_w),
                    placements=placements, shape=(h, w))


def coverage_counts(plan: TilePlan) -> np.ndarray:
    """How many windows cover each pixel; always >= 1 by construction."""
    h, w = plan.shape
    k_h, k_w = plan.window
    counts = np.zeros((h, w), dtype=np.int64)
    for r, c in plan.placements:
        counts[r:r + k_h, c:c + k_w] += 1
    return counts


def apply_and_fuse(x: FeatureMap, plan: TilePlan, op) -> FeatureMap:
    """Run op on every window and average the overlaps.

    op maps a (C, k_h, k_w) array to a same-shape array. Windows are
    accumulated in plan order into one float64 sum buffer, so the result
    is deterministic; overlap averaging makes it order-independent up to
    float addition reordering.
    """
    if plan.shape != (x.height, x.width):
        raise ShapeMismatch(f"plan is for {plan.shape}, map is "
                            f"({x.height}, {x.width})")
    k_h, k_w = plan.window
    acc = np.zeros_like(x.data)
    for r, c in plan.placements:
        win = x.data[:, r:r + k_h, c:c + k_w]
        out = np.asarray(op(win), dtype=np.float64)
        if out.shape != win.shape:
            raise OpShapeViolation(f"op returned {out.shape}, expected {win.shape}")
        acc[:, r:r + k_h, c:c + k_w] += out
    counts = coverage_counts(plan)
    return FeatureMap(acc / counts[None, :, :])


def transposed_attention(window: np.ndarray, p: AttnParams) -> np.ndarray:
    """Channels-as-tokens attention over one (C, k_h, k_w) window.

    Each channel's flattened spatial vector is query, key and value at
    once; queries and keys are L2-normalized, similarities scaled by the
    temperature, rows softmaxed, and the values mixed. A single channel
    therefore passes through unchanged.
    """
    window = np.asarray(window, dtype=np.float64)
    c = window.shape[0]
    v = window.reshape(c, -1)
    norms = np.linalg.norm(v, axis=1, keepdims=True)
    # Zero-norm channels stay as zero vectors; softmax is still defined.
    q = np.divide(v, norms, out=np.zeros_like(v), where=norms > 0)
    logits = (q @ q.T) * p.temperature
    logits -= logits.max(axis=1, keepdims=True)
    a = np.exp(logits)
    a /= a.sum(axis=1, keepdims=True)
    return (a @ v).reshape(window.shape)


def patch_inference_baseline(x: FeatureMap, plan: TilePlan, pipeline) -> FeatureMap:
    """Run a whole-map pipeline on each window independently and fuse.

    This is the crop-and-stitch baseline; its output shows seams exactly
    where the independently restored tiles meet.
    """
    def op(win: np.ndarray) -> np.ndarray:
        return pipeline(FeatureMap(win)).data

    return apply_and_fuse(x, plan, op)


def seam_metric(x: FeatureMap, plan: TilePlan) -> float:
    """Mean |difference| across tile-boundary pixel pairs minus the mean
    over all other adjacent pairs; positive values flag seams."""
    if plan.shape != (x.height, x.width):
        raise ShapeMismatch(f"plan is for {plan.shape}, map is "
                            f"({x.height}, {x.width})")
    h, w = plan.shape
    k_h, k_w = plan.window
    # Interior tile edges: the gap between columns c-1 and c (rows r-1, r).
    edge_cols = np.zeros(w - 1, dtype=bool) if w > 1 else np.zeros(0, dtype=bool)
    edge_rows = np.zeros(h - 1, dtype=bool) if h > 1 else np.zeros(0, dtype=bool)
    for r, c in plan.placements:
        for b in (c, c + k_w):
            if 1 <= b <= w - 1:
                edge_cols[b - 1] = True
        for b in (r, r + k_h):
            if 1 <= b <= h - 1:
                edge_rows[b - 1] = True

    dh = np.abs(np.diff(x.data, axis=2))  # (C, H, W-1), pair (j, j+1)
    dv = np.abs(np.diff(x.data, axis=1))  # (C, H-1, W)
    seam_vals, other_vals = [], []
    if dh.size:
        seam_vals.append(dh[:, :, edge_cols].ravel())
        other_vals.append(dh[:, :, ~edge_cols].ravel())
    if dv.size:
        seam_vals.append(dv[:, edge_rows, :].ravel())
        other_vals.append(dv[:, ~edge_rows, :].ravel())
    seam = np.concatenate(seam_vals) if seam_vals else np.zeros(0)
    other = np.concatenate(other_vals) if other_vals else np.zeros(0)
    if seam.size == 0 or other.size == 0:
        return 0.0
    return float(seam.mean() - other.mean())
