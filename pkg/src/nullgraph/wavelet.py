"""Separable orthogonal wavelet transform with periodic boundary.

Only orthogonal filter banks are offered (Haar and the 4-tap Daubechies
family), so the 2-D transform is exactly orthonormal and soft-thresholding
the detail bands yields a nonexpansive map.  Band lengths must stay even and
at least the filter length at every level, which periodized orthogonality
requires.
"""

from __future__ import annotations

import math

import numpy as np

_SQRT2 = math.sqrt(2.0)
_SQRT3 = math.sqrt(3.0)

FILTERS = {
    "haar": np.array([1.0, 1.0]) / _SQRT2,
    "db4": np.array([1.0 + _SQRT3, 3.0 + _SQRT3, 3.0 - _SQRT3, 1.0 - _SQRT3])
    / (4.0 * _SQRT2),
}


def _highpass(h):
    g = h[::-1].copy()
    g[1::2] *= -1.0
    return g


def _analysis_axis(a, h, g, axis):
    """One periodic decimating filter level along an axis; returns (low, high)."""
    a = np.moveaxis(a, axis, -1)
    n = a.shape[-1]
    idx = (2 * np.arange(n // 2)[:, None] + np.arange(h.size)[None, :]) % n
    gathered = a[..., idx]  # (..., n/2, taps)
    low = gathered @ h
    high = gathered @ g
    return np.moveaxis(low, -1, axis), np.moveaxis(high, -1, axis)


def _synthesis_axis(low, high, h, g, axis):
    low = np.moveaxis(low, axis, -1)
    high = np.moveaxis(high, axis, -1)
    half = low.shape[-1]
    n = 2 * half
    out = np.zeros(low.shape[:-1] + (n,))
    idx = (2 * np.arange(half)[:, None] + np.arange(h.size)[None, :]) % n
    contrib = low[..., :, None] * h + high[..., :, None] * g
    np.add.at(out, (..., idx), contrib)
    return np.moveaxis(out, -1, axis)


def _check_dims(height, width, levels, taps):
    h, w = height, width
    for _ in range(levels):
        if h % 2 or w % 2 or h < taps or w < taps:
            raise ValueError(
                f"cannot run {levels} periodic levels with {taps}-tap filters "
                f"on a {height}x{width} image"
            )
        h //= 2
        w //= 2


def wavedec2(image, filt="haar", levels=1):
    """Multi-level 2-D decomposition: (approx, [(LH, HL, HH) coarse..fine])."""
    h = FILTERS[filt]
    g = _highpass(h)
    image = np.asarray(image, dtype=float)
    _check_dims(image.shape[-2], image.shape[-1], levels, h.size)
    details = []
    ll = image
    for _ in range(levels):
        low, high = _analysis_axis(ll, h, g, axis=-2)
        ll, lh = _analysis_axis(low, h, g, axis=-1)
        hl, hh = _analysis_axis(high, h, g, axis=-1)
        details.append((lh, hl, hh))
    return ll, details[::-1]


def waverec2(approx, details, filt="haar"):
    h = FILTERS[filt]
    g = _highpass(h)
    ll = np.asarray(approx, dtype=float)
    for lh, hl, hh in details:
        low = _synthesis_axis(ll, lh, h, g, axis=-1)
        high = _synthesis_axis(hl, hh, h, g, axis=-1)
        ll = _synthesis_axis(low, high, h, g, axis=-2)
    return ll


def soft_threshold(x, t):
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def wavelet_soft_denoise(image, filt="haar", levels=1, threshold=0.0):
    """Soft-threshold every detail band; the approximation band is untouched.

    Orthogonal transform + soft threshold makes this nonexpansive in l2.
    Operates on the trailing two (spatial) axes, so (C, H, W) stacks are
    denoised per channel.
    """
    approx, details = wavedec2(image, filt, levels)
    details = [tuple(soft_threshold(b, threshold) for b in bands) for bands in details]
    return waverec2(approx, details, filt)
