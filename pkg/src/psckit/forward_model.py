"""Point-scattering forward model and the circulant imaging dictionary.

The phase-history response of a set of ideal point scatterers is

    E(f, phi) = sum_i A_i * exp(-j * 4*pi*f/c * (x_i cos phi + y_i sin phi))

sampled on a uniform (frequency, aspect) grid.  The imaging dictionary
realizes convolution with the band's point-spread function as
F^H diag(d) F with F the unitary 2D DFT and d a window spectrum obtained by
nearest-neighbor resampling of the polar (f, phi) support onto the image's
rectangular Fourier grid (small-angle regime, band shifted to baseband).
Boundary handling is circular by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    ComplexImage,
    RealImage,
    SparseCoeffs,
    ValidationError,
    _require,
    devectorize,
)


def _freq_samples(config):
    if config.num_freq == 1:
        return np.array([config.center_freq_hz])
    return np.linspace(config.center_freq_hz - config.bandwidth_hz / 2,
                       config.center_freq_hz + config.bandwidth_hz / 2,
                       config.num_freq)


def _aspect_samples(config):
    if config.num_aspect == 1:
        return np.array([config.center_aspect_rad])
    return np.linspace(config.center_aspect_rad - config.aspect_span_rad / 2,
                       config.center_aspect_rad + config.aspect_span_rad / 2,
                       config.num_aspect)


def psc_response(pscs, config):
    """Ideal phase-history samples of a scattering-center set.

    Returns a ComplexImage of shape (num_freq, num_aspect); sample (m, n) is
    the coherent sum over centers at frequency f_m and aspect phi_n.
    """
    half = config.scene_extent_m / 2
    for c in pscs.centers:
        _require(abs(c.x) <= half and abs(c.y) <= half,
                 f"center at ({c.x}, {c.y}) m lies outside the scene extent")
    f = _freq_samples(config)[:, None]
    phi = _aspect_samples(config)[None, :]
    out = np.zeros((config.num_freq, config.num_aspect), dtype=np.complex128)
    for c in pscs.centers:
        rng_m = c.x * np.cos(phi) + c.y * np.sin(phi)
        out += c.amplitude * np.exp(-4j * np.pi * f / config.c_mps * rng_m)
    return ComplexImage(config.num_freq, config.num_aspect, out)


# ---------------------------------------------------------------------------
# dictionary


@dataclass(frozen=True)
class Dictionary:
    """Circulant dictionary F^H diag(d) F over the reconstruction grid.

    epsilon regularizes the Gram inverse diag(1/(|d|^2 + epsilon)); zero is
    allowed (exact inverse on the support, divisions by zero off it).
    """

    config: object
    window_spectrum: ComplexImage
    epsilon: float = 1e-8
    is_real: bool = field(init=False)
    gram_is_real: bool = field(init=False)

    def __post_init__(self):
        _require(self.epsilon >= 0, "epsilon must be nonnegative")
        _require((self.window_spectrum.height, self.window_spectrum.width)
                 == (self.config.grid_h, self.config.grid_w),
                 "window spectrum shape must match the reconstruction grid")
        object.__setattr__(self, "epsilon", float(self.epsilon))
        spec = self.window_spectrum.data
        mirrored = np.roll(np.flip(spec, axis=(0, 1)), shift=(1, 1), axis=(0, 1))
        # Hermitian window: the operator maps real grids to real grids
        object.__setattr__(self, "is_real",
                           bool(np.allclose(spec, np.conj(mirrored), atol=1e-12)))
        # the Gram diagonal |d|^2 only needs even symmetry for that
        object.__setattr__(self, "gram_is_real",
                           bool(np.allclose(np.abs(spec), np.abs(mirrored), atol=1e-12)))


def _mirror(window):
    return np.roll(np.flip(window, axis=(0, 1)), shift=(1, 1), axis=(0, 1))


def build_dictionary(config, real_mode=True, taper=False, epsilon=1e-8):
    """Resample the polar (f, phi) support onto the image DFT grid.

    Each sample maps to baseband spatial frequencies
    u = 2 (f cos phi - fc cos phi_c) / c and v = 2 (f sin phi - fc sin phi_c) / c
    (cycles/m) and is rounded to the nearest DFT bin.  The window is the 0/1
    indicator of the hit bins; with real_mode the support is united with its
    Hermitian mirror so the operator maps real images to real images.  With
    taper, a separable Taylor profile over the support's bounding box replaces
    the flat indicator values.
    """
    h, w = config.grid_h, config.grid_w
    f = _freq_samples(config)[:, None]
    phi = _aspect_samples(config)[None, :]
    fc, pc = config.center_freq_hz, config.center_aspect_rad
    u = 2.0 * (f * np.cos(phi) - fc * np.cos(pc)) / config.c_mps
    v = 2.0 * (f * np.sin(phi) - fc * np.sin(pc)) / config.c_mps
    # bin spacing is 1/extent cycles/m on each axis
    ku = np.rint(u * config.scene_extent_m).astype(int)
    kv = np.rint(v * config.scene_extent_m).astype(int)
    if (ku.min() < -(h // 2) or ku.max() > (h - 1) // 2
            or kv.min() < -(w // 2) or kv.max() > (w - 1) // 2):
        raise ValidationError(
            "resampled band exceeds the grid Nyquist range; enlarge the grid "
            "or reduce bandwidth/aspect span")
    window = np.zeros((h, w))
    window[ku % h, kv % w] = 1.0
    if real_mode:
        window = np.maximum(window, _mirror(window))
    if taper:
        window = _apply_taylor_taper(window)
    return Dictionary(config=config, window_spectrum=ComplexImage(h, w, window),
                      epsilon=epsilon)


def _apply_taylor_taper(window):
    from scipy.signal.windows import taylor

    h, w = window.shape
    occ = np.argwhere(np.fft.fftshift(window) > 0)
    lo, hi = occ.min(axis=0), occ.max(axis=0)
    shifted = np.fft.fftshift(window).astype(float)
    for axis, (a, b) in enumerate(zip(lo, hi)):
        length = b - a + 1
        profile = taylor(length, nbar=4, sll=30, norm=True) if length > 1 else np.ones(1)
        idx = occ[:, axis] - a
        taps = profile[idx]
        shifted[occ[:, 0], occ[:, 1]] *= taps
    return np.fft.ifftshift(shifted)


# internal array-level transforms shared by every operator


def _fft2(x):
    return np.fft.fft2(x, norm="ortho")


def _ifft2(x):
    return np.fft.ifft2(x, norm="ortho")


def _as_grid(dic, x):
    if isinstance(x, SparseCoeffs):
        return x.data
    arr = np.asarray(x)
    if arr.ndim == 1:
        return devectorize(arr, dic.config.grid_h, dic.config.grid_w)
    _require(arr.shape == (dic.config.grid_h, dic.config.grid_w),
             f"array shape {arr.shape} does not match the grid")
    return arr


def _apply_grid(dic, grid):
    out = _ifft2(dic.window_spectrum.data * _fft2(grid))
    if dic.is_real and not np.iscomplexobj(grid):
        return out.real
    return out


def _adjoint_grid(dic, grid):
    out = _ifft2(np.conj(dic.window_spectrum.data) * _fft2(grid))
    if dic.is_real and not np.iscomplexobj(grid):
        return out.real
    return out


def _gram_inverse_grid(dic, grid):
    diag = 1.0 / (np.abs(dic.window_spectrum.data) ** 2 + dic.epsilon)
    out = _ifft2(diag * _fft2(grid))
    if dic.gram_is_real and not np.iscomplexobj(grid):
        return out.real
    return out


def dict_apply(dic, coeffs):
    """Flat measurement vector of the dictionary applied to a coefficient grid."""
    return _apply_grid(dic, _as_grid(dic, coeffs)).reshape(-1)


def dict_adjoint(dic, r):
    """Adjoint of the dictionary applied to a flat measurement vector."""
    grid = _adjoint_grid(dic, _as_grid(dic, r))
    return SparseCoeffs(dic.config.grid_h, dic.config.grid_w, grid)


def gram_inverse_apply(dic, v):
    """Regularized Gram inverse (Psi Psi^H + eps I)^-1 on a flat vector."""
    return _gram_inverse_grid(dic, _as_grid(dic, v)).reshape(-1)


def reconstruct_image(dic, coeffs):
    """Magnitude image of the dictionary applied to a coefficient grid."""
    mag = np.abs(_apply_grid(dic, _as_grid(dic, coeffs)))
    return RealImage(dic.config.grid_h, dic.config.grid_w, mag)
