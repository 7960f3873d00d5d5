"""Full-reference image quality metrics: SSIM, GMSD, MSE, PSNR.

SAR magnitudes are unbounded, so dynamic_range / peak default to the joint
maximum over both images when not supplied. All functions are pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate
from scipy.signal import fftconvolve

from .core import RealImage, ValidationError, _require

__all__ = [
    "MetricReport",
    "ssim",
    "gmsd",
    "mse",
    "psnr",
    "compute_report",
    "report_to_dict",
]

_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_K1, _K2 = 0.01, 0.03
_GMSD_T = 170.0
# canonical Prewitt pair, 1/3 normalization
_PREWITT_X = np.array([[1.0, 0.0, -1.0]] * 3) / 3.0
_PREWITT_Y = _PREWITT_X.T


@dataclass(frozen=True)
class MetricReport:
    """One full-reference comparison: ssim, gmsd, mse, psnr (psnr may be +inf)."""

    ssim: float
    gmsd: float
    mse: float
    psnr: float

    def __post_init__(self):
        for name in ("ssim", "gmsd", "mse", "psnr"):
            object.__setattr__(self, name, float(getattr(self, name)))
        _require(-1.0 <= self.ssim <= 1.0, "ssim must lie in [-1, 1]")
        _require(self.gmsd >= 0.0, "gmsd must be nonnegative")
        _require(self.mse >= 0.0, "mse must be nonnegative")
        _require(not math.isnan(self.psnr), "psnr must not be NaN")


def _pair(x, y):
    _require(isinstance(x, RealImage) and isinstance(y, RealImage),
             "metric inputs must be RealImage")
    _require((x.height, x.width) == (y.height, y.width),
             f"image shapes differ: {(x.height, x.width)} vs {(y.height, y.width)}")
    return x.data, y.data


def _joint_peak(a, b):
    peak = max(float(a.max()), float(b.max()))
    return peak if peak > 0.0 else 1.0


def _gaussian_mask():
    i = np.arange(_SSIM_WINDOW, dtype=float) - (_SSIM_WINDOW - 1) / 2.0
    g = np.exp(-(i ** 2) / (2.0 * _SSIM_SIGMA ** 2))
    g /= g.sum()
    return np.outer(g, g)


def ssim(x, y, dynamic_range=None):
    """Mean structural similarity over the fully interior window positions.

    11x11 Gaussian-weighted moments (sigma 1.5), K1 = 0.01, K2 = 0.03.
    dynamic_range defaults to the joint maximum of both images.
    """
    a, b = _pair(x, y)
    _require(min(a.shape) >= _SSIM_WINDOW,
             f"image {a.shape} smaller than the {_SSIM_WINDOW}x{_SSIM_WINDOW} ssim window")
    if dynamic_range is None:
        dynamic_range = _joint_peak(a, b)
    dynamic_range = float(dynamic_range)
    _require(dynamic_range > 0.0, "dynamic_range must be positive")

    w = _gaussian_mask()
    # the mask is symmetric, so 'valid' fftconvolve is a weighted moment scan
    ua = fftconvolve(a, w, mode="valid")
    ub = fftconvolve(b, w, mode="valid")
    uaa = fftconvolve(a * a, w, mode="valid")
    ubb = fftconvolve(b * b, w, mode="valid")
    uab = fftconvolve(a * b, w, mode="valid")
    va = uaa - ua * ua
    vb = ubb - ub * ub
    vab = uab - ua * ub
    c1 = (_K1 * dynamic_range) ** 2
    c2 = (_K2 * dynamic_range) ** 2
    num = (2.0 * ua * ub + c1) * (2.0 * vab + c2)
    den = (ua ** 2 + ub ** 2 + c1) * (va + vb + c2)
    return float(np.mean(num / den))


def _half_pixel_average(a):
    # 2x2 mean anchored so out[i, j] averages a[i-1:i+1, j-1:j+1] with a
    # symmetric top/left border, then keep every second sample
    p = np.pad(a, ((1, 0), (1, 0)), mode="symmetric")
    avg = (p[:-1, :-1] + p[:-1, 1:] + p[1:, :-1] + p[1:, 1:]) / 4.0
    return avg[0::2, 0::2]


def gmsd(x, y):
    """Gradient-magnitude-similarity deviation.

    Joint rescale to [0, 255], 2x2 mean prefilter with downsample by 2,
    Prewitt gradients, similarity constant 170, std pooling.
    """
    a, b = _pair(x, y)
    peak = max(float(a.max()), float(b.max()))
    if peak > 0.0:
        a = a * (255.0 / peak)
        b = b * (255.0 / peak)
    a = _half_pixel_average(a)
    b = _half_pixel_average(b)
    ga = np.sqrt(correlate(a, _PREWITT_X, mode="reflect") ** 2
                 + correlate(a, _PREWITT_Y, mode="reflect") ** 2)
    gb = np.sqrt(correlate(b, _PREWITT_X, mode="reflect") ** 2
                 + correlate(b, _PREWITT_Y, mode="reflect") ** 2)
    gms = (2.0 * ga * gb + _GMSD_T) / (ga ** 2 + gb ** 2 + _GMSD_T)
    return float(np.std(gms))


def mse(x, y):
    """Mean squared error."""
    a, b = _pair(x, y)
    d = a - b
    return float(np.mean(d * d))


def psnr(x, y, peak=None):
    """Peak signal-to-noise ratio in dB; +inf for identical images."""
    a, b = _pair(x, y)
    err = mse(x, y)
    if err == 0.0:
        return math.inf
    if peak is None:
        peak = _joint_peak(a, b)
    peak = float(peak)
    _require(peak > 0.0, "peak must be positive")
    return float(10.0 * math.log10(peak * peak / err))


def compute_report(ref, test, dynamic_range=None):
    """Evaluate all four metrics on one image pair."""
    return MetricReport(ssim=ssim(ref, test, dynamic_range),
                        gmsd=gmsd(ref, test),
                        mse=mse(ref, test),
                        psnr=psnr(ref, test, dynamic_range))


def report_to_dict(report):
    return {"ssim": report.ssim, "gmsd": report.gmsd,
            "mse": report.mse, "psnr": report.psnr}
