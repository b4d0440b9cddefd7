"""Shared oracles and helpers.

The sliding-window oracles here are deliberately naive: one window per
valid top-left, summed directly, O(K^2) work per pixel. They share the
library's center/replication convention but none of its integral-table
code path.
"""

import numpy as np
import pytest

from tlc.tensor import FeatureMap, WindowSpec


def replicate_oracle(interior: np.ndarray, h: int, w: int, k_h: int, k_w: int) -> np.ndarray:
    """Replicate-pad by index clipping (independent of np.pad edge mode)."""
    top = (k_h - 1) // 2
    left = (k_w - 1) // 2
    out = np.empty((h, w))
    for i in range(h):
        for j in range(w):
            out[i, j] = interior[
                min(max(i - top, 0), interior.shape[0] - 1),
                min(max(j - left, 0), interior.shape[1] - 1),
            ]
    return out


def sliding_stats_oracle(x: np.ndarray, w: WindowSpec):
    """Brute-force window (mean, variance, max) maps, two-pass variance."""
    x = np.asarray(x, dtype=np.float64)
    h, wid = x.shape
    k_h, k_w = min(w.k_h, h), min(w.k_w, wid)
    mean = np.empty((h - k_h + 1, wid - k_w + 1))
    var = np.empty_like(mean)
    mx = np.empty_like(mean)
    for r in range(mean.shape[0]):
        for c in range(mean.shape[1]):
            win = x[r:r + k_h, c:c + k_w]
            m = win.sum() / win.size
            mean[r, c] = m
            var[r, c] = np.sum((win - m) ** 2) / win.size
            mx[r, c] = win.max()
    return (
        replicate_oracle(mean, h, wid, k_h, k_w),
        replicate_oracle(var, h, wid, k_h, k_w),
        replicate_oracle(mx, h, wid, k_h, k_w),
    )


def random_map(rng, c=1, h=8, w=8) -> FeatureMap:
    return FeatureMap(rng.standard_normal((c, h, w)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
