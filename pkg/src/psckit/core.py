"""Core data types, vectorization conventions, and file formats.

Conventions used throughout the package:

* images and coefficient grids are stored as 2D numpy arrays (row-major);
  the flat view of pixel (i, j) lives at index i*w + j
* complex data is complex128 in memory and interleaved float32 on disk
* angles are degrees at API boundaries (azimuth fields) and radians internally
* all value types are frozen dataclasses holding read-only arrays
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SPEED_OF_LIGHT_MPS = 2.99792458e8

_MAGIC = b"PSCI"
_FORMAT_VERSION = 1
_DTYPE_REAL = 0
_DTYPE_COMPLEX = 1


class PsckitError(Exception):
    """Base class for package errors."""


class ValidationError(PsckitError, ValueError):
    """Invalid argument or configuration value."""


class FormatError(PsckitError, ValueError):
    """Malformed binary payload; carries the offending byte offset."""

    def __init__(self, message, byte_offset):
        super().__init__(f"{message} (byte offset {byte_offset})")
        self.byte_offset = byte_offset


class NumericalError(ValidationError, ArithmeticError):
    """Non-finite values where finite ones are required."""


def _require(cond, message):
    if not cond:
        raise ValidationError(message)


def _finite(*values):
    return all(math.isfinite(v.real) and math.isfinite(v.imag) for v in map(complex, values))


def _freeze(arr):
    out = np.array(arr, copy=True)
    out.flags.writeable = False
    return out


# ---------------------------------------------------------------------------
# value types


@dataclass(frozen=True)
class ScatteringCenter:
    """One ideal point scatterer: complex amplitude at position (x, y) meters."""

    amplitude: complex
    x: float
    y: float

    def __post_init__(self):
        _require(_finite(self.amplitude, self.x, self.y),
                 "scattering center fields must be finite")
        object.__setattr__(self, "amplitude", complex(self.amplitude))
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))


@dataclass(frozen=True)
class PscSet:
    """A labelled collection of scattering centers at one viewing azimuth."""

    centers: tuple
    class_label: int
    azimuth_deg: float

    def __post_init__(self):
        object.__setattr__(self, "centers", tuple(self.centers))
        _require(all(isinstance(c, ScatteringCenter) for c in self.centers),
                 "centers must be ScatteringCenter instances")
        _require(float(self.azimuth_deg) >= 0.0 and float(self.azimuth_deg) < 360.0,
                 "azimuth_deg must lie in [0, 360)")
        object.__setattr__(self, "class_label", int(self.class_label))
        object.__setattr__(self, "azimuth_deg", float(self.azimuth_deg))


@dataclass(frozen=True)
class RadarConfig:
    """Acquisition geometry and reconstruction grid.

    scene_extent_m is the full width/height of the imaged scene; the grid
    pixel (i, j) sits at x = (i - grid_h//2) * scene_extent_m / grid_h and
    y likewise in the second axis.
    """

    center_freq_hz: float
    bandwidth_hz: float
    num_freq: int
    center_aspect_rad: float
    aspect_span_rad: float
    num_aspect: int
    scene_extent_m: float
    grid_h: int
    grid_w: int
    c_mps: float = SPEED_OF_LIGHT_MPS

    def __post_init__(self):
        _require(_finite(self.center_freq_hz, self.bandwidth_hz, self.center_aspect_rad,
                         self.aspect_span_rad, self.scene_extent_m, self.c_mps),
                 "radar config fields must be finite")
        _require(self.center_freq_hz > 0, "center_freq_hz must be positive")
        _require(self.bandwidth_hz >= 0, "bandwidth_hz must be nonnegative")
        _require(self.bandwidth_hz < 2 * self.center_freq_hz,
                 "bandwidth_hz must keep the band above zero frequency")
        # small-angle regime required by the polar-to-rectangular resampling
        _require(0 <= self.aspect_span_rad < math.pi / 2,
                 "aspect_span_rad must lie in [0, pi/2)")
        _require(int(self.num_freq) >= 1 and int(self.num_aspect) >= 1,
                 "num_freq and num_aspect must be >= 1")
        _require(self.scene_extent_m > 0, "scene_extent_m must be positive")
        _require(int(self.grid_h) >= 1 and int(self.grid_w) >= 1,
                 "grid dimensions must be >= 1")
        _require(self.c_mps > 0, "c_mps must be positive")
        for name in ("center_freq_hz", "bandwidth_hz", "center_aspect_rad",
                     "aspect_span_rad", "scene_extent_m", "c_mps"):
            object.__setattr__(self, name, float(getattr(self, name)))
        for name in ("num_freq", "num_aspect", "grid_h", "grid_w"):
            object.__setattr__(self, name, int(getattr(self, name)))


def _check_grid(height, width, data, kind):
    arr = np.asarray(data)
    _require(arr.shape == (int(height), int(width)),
             f"data shape {arr.shape} does not match ({height}, {width})")
    if kind == "real":
        _require(not np.iscomplexobj(arr), "expected real-valued data")
        arr = arr.astype(np.float64, copy=True)
    elif kind == "complex":
        arr = arr.astype(np.complex128, copy=True)
    else:  # real or complex, dtype preserved
        arr = arr.astype(np.complex128 if np.iscomplexobj(arr) else np.float64, copy=True)
    if not np.all(np.isfinite(arr.view(np.float64) if arr.dtype == np.complex128 else arr)):
        # distinguished from plain validation so callers can map it to a
        # numerical-failure exit path
        raise NumericalError("data must be finite")
    return _freeze(arr)


@dataclass(frozen=True)
class ComplexImage:
    """Complex-valued image on an (height, width) row-major grid."""

    height: int
    width: int
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "height", int(self.height))
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "data", _check_grid(self.height, self.width, self.data, "complex"))


@dataclass(frozen=True)
class RealImage:
    """Real-valued image on an (height, width) row-major grid."""

    height: int
    width: int
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "height", int(self.height))
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "data", _check_grid(self.height, self.width, self.data, "real"))


@dataclass(frozen=True)
class SparseCoeffs:
    """Coefficient grid aligned with the reconstruction pixels (real or complex)."""

    grid_h: int
    grid_w: int
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "grid_h", int(self.grid_h))
        object.__setattr__(self, "grid_w", int(self.grid_w))
        object.__setattr__(self, "data", _check_grid(self.grid_h, self.grid_w, self.data, "any"))


# ---------------------------------------------------------------------------
# vectorization


def vectorize(image):
    """Flatten an image or coefficient grid row-major: (i, j) -> i*w + j."""
    return np.array(image.data, copy=True).reshape(-1)


def devectorize(vec, height, width):
    """Inverse of vectorize; returns a (height, width) array."""
    v = np.asarray(vec)
    _require(v.ndim == 1 and v.size == int(height) * int(width),
             f"vector length {v.size} does not match {height}x{width}")
    return np.array(v, copy=True).reshape(int(height), int(width))


# ---------------------------------------------------------------------------
# pixel <-> scene coordinates


def pixel_to_xy(i, j, config):
    """Scene coordinates (meters) of pixel (i, j) center."""
    dx = config.scene_extent_m / config.grid_h
    dy = config.scene_extent_m / config.grid_w
    return ((int(i) - config.grid_h // 2) * dx, (int(j) - config.grid_w // 2) * dy)


def xy_to_pixel(x, y, config):
    """Nearest pixel of scene position (x, y); rejects positions off the grid."""
    dx = config.scene_extent_m / config.grid_h
    dy = config.scene_extent_m / config.grid_w
    i = round(float(x) / dx) + config.grid_h // 2
    j = round(float(y) / dy) + config.grid_w // 2
    _require(0 <= i < config.grid_h and 0 <= j < config.grid_w,
             f"position ({x}, {y}) m falls outside the scene grid")
    return (i, j)


# ---------------------------------------------------------------------------
# binary image format
#
# magic "PSCI" | u32 version=1 | u32 dtype (0 real, 1 complex) | u32 height |
# u32 width | payload float32 LE row-major (complex: re,im interleaved)


def save_image(image, path):
    """Write a RealImage or ComplexImage to the binary image format."""
    if isinstance(image, RealImage):
        dtype_code = _DTYPE_REAL
        payload = image.data.astype("<f4").tobytes()
    elif isinstance(image, ComplexImage):
        dtype_code = _DTYPE_COMPLEX
        inter = np.empty((image.height, image.width, 2), dtype="<f4")
        inter[..., 0] = image.data.real
        inter[..., 1] = image.data.imag
        payload = inter.tobytes()
    else:
        raise ValidationError("save_image expects RealImage or ComplexImage")
    header = _MAGIC + struct.pack("<III", _FORMAT_VERSION, dtype_code, image.height)
    header += struct.pack("<I", image.width)
    Path(path).write_bytes(header + payload)


def load_image(path):
    """Read the binary image format back into RealImage or ComplexImage."""
    raw = Path(path).read_bytes()
    if len(raw) < 20:
        raise FormatError("truncated header", len(raw))
    if raw[:4] != _MAGIC:
        raise FormatError(f"bad magic {raw[:4]!r}", 0)
    version, dtype_code, height = struct.unpack("<III", raw[4:16])
    (width,) = struct.unpack("<I", raw[16:20])
    if version != _FORMAT_VERSION:
        raise FormatError(f"unsupported version {version}", 4)
    if dtype_code not in (_DTYPE_REAL, _DTYPE_COMPLEX):
        raise FormatError(f"unknown dtype code {dtype_code}", 8)
    scalars = height * width * (2 if dtype_code == _DTYPE_COMPLEX else 1)
    if len(raw) - 20 != scalars * 4:
        raise FormatError(
            f"payload holds {(len(raw) - 20) // 4} float32 values, expected {scalars}", 20)
    flat = np.frombuffer(raw, dtype="<f4", offset=20)
    if dtype_code == _DTYPE_REAL:
        return RealImage(height, width, flat.astype(np.float64).reshape(height, width))
    pairs = flat.reshape(height, width, 2)
    return ComplexImage(height, width,
                        pairs[..., 0].astype(np.float64) + 1j * pairs[..., 1].astype(np.float64))


# ---------------------------------------------------------------------------
# JSON serialization (field names match the dataclasses exactly)


def _amplitude_to_json(a):
    return [a.real, a.imag]


def _amplitude_from_json(v):
    if isinstance(v, (int, float)):
        return complex(v, 0.0)
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(float(v[0]), float(v[1]))
    raise ValidationError(f"amplitude must be a number or [re, im] pair, got {v!r}")


def psc_set_to_dict(pscs):
    return {
        "centers": [
            {"amplitude": _amplitude_to_json(c.amplitude), "x": c.x, "y": c.y}
            for c in pscs.centers
        ],
        "class_label": pscs.class_label,
        "azimuth_deg": pscs.azimuth_deg,
    }


def psc_set_from_dict(doc):
    try:
        centers = [
            ScatteringCenter(amplitude=_amplitude_from_json(c["amplitude"]),
                             x=float(c["x"]), y=float(c["y"]))
            for c in doc["centers"]
        ]
        return PscSet(centers=centers, class_label=int(doc["class_label"]),
                      azimuth_deg=float(doc["azimuth_deg"]))
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed scattering-center document: {exc}") from exc


def radar_config_to_dict(config):
    return {
        "center_freq_hz": config.center_freq_hz,
        "bandwidth_hz": config.bandwidth_hz,
        "num_freq": config.num_freq,
        "center_aspect_rad": config.center_aspect_rad,
        "aspect_span_rad": config.aspect_span_rad,
        "num_aspect": config.num_aspect,
        "scene_extent_m": config.scene_extent_m,
        "grid_h": config.grid_h,
        "grid_w": config.grid_w,
        "c_mps": config.c_mps,
    }


def radar_config_from_dict(doc):
    try:
        return RadarConfig(**{k: doc[k] for k in radar_config_to_dict(
            RadarConfig(1.0, 0.0, 1, 0.0, 0.0, 1, 1.0, 1, 1))})
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed radar config document: {exc}") from exc


def save_psc_set(pscs, path):
    Path(path).write_text(json.dumps(psc_set_to_dict(pscs), indent=2) + "\n", encoding="utf-8")


def load_psc_set(path):
    return psc_set_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def save_radar_config(config, path):
    Path(path).write_text(json.dumps(radar_config_to_dict(config), indent=2) + "\n",
                          encoding="utf-8")


def load_radar_config(path):
    return radar_config_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
