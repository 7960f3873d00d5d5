"""Synthetic SAR target layouts, rendered samples, and datasets on disk.

Targets are pixel-aligned point scatterers with uniform amplitudes, kept a
PSF width away from the scene edges so support-recovery oracles are exact.
Rendering applies the bandlimited dictionary, an optional per-center Gaussian
aspect window, and optional mean-1 gamma speckle. Every sample's randomness
comes from a (seed, index) substream, so datasets are reproducible and
embarrassingly parallel.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .core import (
    PscSet,
    RadarConfig,
    RealImage,
    ScatteringCenter,
    ValidationError,
    _require,
    load_image,
    pixel_to_xy,
    psc_set_from_dict,
    psc_set_to_dict,
    radar_config_from_dict,
    radar_config_to_dict,
    save_image,
    xy_to_pixel,
)
from .forward_model import build_dictionary, dict_apply

__all__ = [
    "SimConfig",
    "Sample",
    "psf_margin_px",
    "gen_target",
    "anisotropy_factor",
    "speckle_field",
    "render_sample",
    "gen_dataset",
    "load_dataset",
    "sim_config_to_dict",
    "sim_config_from_dict",
]

_LAYOUT_RESTARTS = 64
_PLACEMENT_TRIES = 64


@dataclass(frozen=True)
class SimConfig:
    """Dataset generation settings around one radar geometry."""

    num_targets: int
    centers_per_target: tuple
    amplitude_range: tuple = (3000.0, 9000.0)
    min_separation_px: float = 0.0
    speckle_looks: int | None = None
    anisotropy_sigma_rad: float | None = None
    seed: int = 0
    radar: RadarConfig = None

    def __post_init__(self):
        object.__setattr__(self, "num_targets", int(self.num_targets))
        _require(self.num_targets >= 1, "num_targets must be positive")
        lo, hi = (int(v) for v in self.centers_per_target)
        _require(1 <= lo <= hi, "centers_per_target must satisfy 1 <= min <= max")
        object.__setattr__(self, "centers_per_target", (lo, hi))
        amin, amax = (float(v) for v in self.amplitude_range)
        _require(0.0 < amin <= amax, "amplitude_range must satisfy 0 < min <= max")
        object.__setattr__(self, "amplitude_range", (amin, amax))
        object.__setattr__(self, "min_separation_px", float(self.min_separation_px))
        _require(self.min_separation_px >= 0.0, "min_separation_px must be nonnegative")
        if self.speckle_looks is not None:
            object.__setattr__(self, "speckle_looks", int(self.speckle_looks))
            _require(self.speckle_looks >= 1, "speckle_looks must be a positive integer")
        if self.anisotropy_sigma_rad is not None:
            object.__setattr__(self, "anisotropy_sigma_rad", float(self.anisotropy_sigma_rad))
            _require(self.anisotropy_sigma_rad > 0.0, "anisotropy_sigma_rad must be positive")
        object.__setattr__(self, "seed", int(self.seed))
        _require(self.seed >= 0, "seed must be nonnegative")
        _require(isinstance(self.radar, RadarConfig), "radar must be a RadarConfig")


@dataclass(frozen=True)
class Sample:
    """One rendered image with its ground-truth scatterers."""

    image: RealImage
    truth: PscSet
    class_label: int
    azimuth_deg: float

    def __post_init__(self):
        _require(isinstance(self.image, RealImage), "image must be a RealImage")
        _require(isinstance(self.truth, PscSet), "truth must be a PscSet")
        object.__setattr__(self, "class_label", int(self.class_label))
        object.__setattr__(self, "azimuth_deg", float(self.azimuth_deg))


def psf_margin_px(radar):
    """Point-spread half-width in pixels, the edge keep-out for targets."""
    range_res = radar.c_mps / (2.0 * radar.bandwidth_hz)
    if radar.aspect_span_rad > 0.0:
        cross_res = radar.c_mps / (2.0 * radar.center_freq_hz * radar.aspect_span_rad)
    else:
        cross_res = math.inf
    pitch = radar.scene_extent_m / max(radar.grid_h, radar.grid_w)
    margin = math.ceil(min(max(range_res, cross_res), radar.scene_extent_m / 4.0) / pitch)
    return max(1, min(margin, min(radar.grid_h, radar.grid_w) // 4))


def gen_target(config, rng, real_mode=True):
    """Draw one random pixel-aligned target layout.

    Positions respect the pairwise separation and edge margin; amplitudes are
    uniform in amplitude_range, with uniform phase when real_mode is False.
    """
    _require(isinstance(config, SimConfig), "config must be a SimConfig")
    radar = config.radar
    margin = psf_margin_px(radar)
    lo, hi = config.centers_per_target
    n = int(rng.integers(lo, hi + 1))
    _require(radar.grid_h - 2 * margin > 0 and radar.grid_w - 2 * margin > 0,
             "grid too small for the PSF edge margin")

    pixels = None
    for _ in range(_LAYOUT_RESTARTS):
        pts = []
        for _ in range(n):
            for _ in range(_PLACEMENT_TRIES):
                i = int(rng.integers(margin, radar.grid_h - margin))
                j = int(rng.integers(margin, radar.grid_w - margin))
                if all(math.hypot(i - a, j - b) >= config.min_separation_px
                       for a, b in pts):
                    pts.append((i, j))
                    break
            else:
                break
        if len(pts) == n:
            pixels = pts
            break
    if pixels is None:
        raise ValidationError(
            f"cannot place {n} centers with separation {config.min_separation_px} px "
            f"on a {radar.grid_h}x{radar.grid_w} grid (margin {margin})")

    centers = []
    for i, j in pixels:
        mag = float(rng.uniform(*config.amplitude_range))
        if real_mode:
            amp = complex(mag, 0.0)
        else:
            phase = float(rng.uniform(0.0, 2.0 * math.pi))
            amp = mag * complex(math.cos(phase), math.sin(phase))
        x, y = pixel_to_xy(i, j, radar)
        centers.append(ScatteringCenter(amp, x, y))
    azimuth_deg = float(rng.uniform(0.0, 360.0))
    class_label = int(rng.integers(0, 10))
    return PscSet(centers=tuple(centers), class_label=class_label,
                  azimuth_deg=azimuth_deg)


def anisotropy_factor(theta_rad, preferred_rad, sigma_rad):
    """Gaussian aspect window exp(-d^2 / (2 sigma^2)) on the wrapped angle d."""
    sigma = float(sigma_rad)
    _require(sigma > 0.0, "sigma must be positive")
    d = math.remainder(float(theta_rad) - float(preferred_rad), 2.0 * math.pi)
    return math.exp(-(d * d) / (2.0 * sigma * sigma))


def speckle_field(shape, looks, rng):
    """Mean-1 gamma multiplicative noise field with the given number of looks."""
    looks = int(looks)
    _require(looks >= 1, "looks must be a positive integer")
    return rng.gamma(shape=float(looks), scale=1.0 / looks, size=shape)


def render_sample(pscs, config, dic=None, rng=None):
    """Render one target to a magnitude image.

    Applies the per-center aspect window and multiplicative speckle when the
    config enables them; both draw from rng (seeded from config.seed when not
    supplied), so rendering is deterministic.
    """
    _require(isinstance(pscs, PscSet), "pscs must be a PscSet")
    _require(isinstance(config, SimConfig), "config must be a SimConfig")
    if dic is None:
        dic = build_dictionary(config.radar)
    if rng is None:
        rng = np.random.default_rng(config.seed)
    radar = dic.config

    amps = np.array([c.amplitude for c in pscs.centers], dtype=complex)
    if config.anisotropy_sigma_rad is not None and len(amps):
        theta = math.radians(pscs.azimuth_deg)
        prefs = rng.uniform(0.0, 2.0 * math.pi, size=len(amps))
        scales = np.array([anisotropy_factor(theta, p, config.anisotropy_sigma_rad)
                           for p in prefs])
        amps = amps * scales

    coeffs = np.zeros((radar.grid_h, radar.grid_w), dtype=complex)
    for center, amp in zip(pscs.centers, amps):
        i, j = xy_to_pixel(center.x, center.y, radar)
        coeffs[i, j] += amp
    if np.all(coeffs.imag == 0.0):
        coeffs = coeffs.real
    img = np.abs(dict_apply(dic, coeffs)).reshape(radar.grid_h, radar.grid_w)
    if config.speckle_looks is not None:
        img = img * speckle_field(img.shape, config.speckle_looks, rng)
    return Sample(image=RealImage(radar.grid_h, radar.grid_w, img),
                  truth=pscs, class_label=pscs.class_label,
                  azimuth_deg=pscs.azimuth_deg)


def _f32_quantized(image):
    # disk payloads are float32; returned samples must equal the files
    data = image.data.astype("<f4").astype(float)
    return RealImage(image.height, image.width, data)


def _make_sample(config, dic, index):
    rng = np.random.default_rng([config.seed, index])
    pscs = gen_target(config, rng)
    pscs = replace(pscs, azimuth_deg=360.0 * index / config.num_targets)
    sample = render_sample(pscs, config, dic=dic, rng=rng)
    return replace(sample, image=_f32_quantized(sample.image))


def gen_dataset(config, out_dir, threads=None):
    """Generate config.num_targets samples and write them plus a manifest.

    Azimuths are spread uniformly over [0, 360). Returns (samples, manifest);
    the returned images equal the serialized float32 files exactly.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dic = build_dictionary(config.radar)
    if threads is None:
        threads = os.cpu_count() or 1
    threads = max(1, min(int(threads), config.num_targets))

    def build(index):
        sample = _make_sample(config, dic, index)
        image_name = f"sample_{index:03d}.psci"
        truth_name = f"truth_{index:03d}.json"
        save_image(sample.image, out / image_name)
        (out / truth_name).write_text(
            json.dumps(psc_set_to_dict(sample.truth), indent=2, sort_keys=True))
        entry = {"image": image_name, "truth": truth_name,
                 "class": sample.class_label, "azimuth_deg": sample.azimuth_deg}
        return sample, entry

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(build, range(config.num_targets)))
    else:
        results = [build(i) for i in range(config.num_targets)]

    samples = [s for s, _ in results]
    manifest = {"samples": [e for _, e in results],
                "radar": radar_config_to_dict(config.radar),
                "sim": sim_config_to_dict(config)}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return samples, manifest


def load_dataset(manifest_path):
    """Reload a dataset written by gen_dataset; returns (samples, SimConfig)."""
    manifest_path = Path(manifest_path)
    doc = json.loads(manifest_path.read_text())
    config = sim_config_from_dict(doc["sim"])
    base = manifest_path.parent
    samples = []
    for entry in doc["samples"]:
        image = load_image(base / entry["image"])
        truth = psc_set_from_dict(json.loads((base / entry["truth"]).read_text()))
        samples.append(Sample(image=image, truth=truth,
                              class_label=entry["class"],
                              azimuth_deg=entry["azimuth_deg"]))
    return samples, config


def _optional_to_doc(value):
    return "none" if value is None else value


def _optional_from_doc(value):
    if value is None or value == "none":
        return None
    return value


def sim_config_to_dict(config):
    return {
        "num_targets": config.num_targets,
        "centers_per_target": list(config.centers_per_target),
        "amplitude_range": list(config.amplitude_range),
        "min_separation_px": config.min_separation_px,
        "speckle_looks": _optional_to_doc(config.speckle_looks),
        "anisotropy_sigma_rad": _optional_to_doc(config.anisotropy_sigma_rad),
        "seed": config.seed,
        "radar": radar_config_to_dict(config.radar),
    }


def sim_config_from_dict(doc):
    return SimConfig(
        num_targets=doc["num_targets"],
        centers_per_target=tuple(doc["centers_per_target"]),
        amplitude_range=tuple(doc["amplitude_range"]),
        min_separation_px=doc["min_separation_px"],
        speckle_looks=_optional_from_doc(doc["speckle_looks"]),
        anisotropy_sigma_rad=_optional_from_doc(doc["anisotropy_sigma_rad"]),
        seed=doc["seed"],
        radar=radar_config_from_dict(doc["radar"]),
    )
