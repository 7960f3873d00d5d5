"""Azimuth condition embedding and physics-consistency losses.

Pure functions over images and caller-supplied feature stacks; no networks
live here. Feature maps are (channels, height, width) real arrays, and every
feature loss normalizes by element count so levels of different sizes
contribute comparably.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import RealImage, ValidationError, _require

__all__ = [
    "FeatureMap",
    "FeatureStack",
    "PhyLossWeights",
    "che_embed",
    "d_combine",
    "loss_phy_s",
    "loss_phy_f",
    "loss_phy_g",
    "loss_phy_d",
]


@dataclass(frozen=True)
class FeatureMap:
    """One discriminator feature level: a (channels, height, width) real array."""

    channels: int
    height: int
    width: int
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = int(self.channels)
        h = int(self.height)
        w = int(self.width)
        _require(c >= 1 and h >= 1 and w >= 1, "feature dims must be positive")
        arr = np.array(self.data, dtype=float, copy=True)
        _require(arr.size == c * h * w,
                 f"feature data has {arr.size} elements, expected {c * h * w}")
        _require(np.all(np.isfinite(arr)), "feature data must be finite")
        arr = arr.reshape(c, h, w)
        arr.setflags(write=False)
        object.__setattr__(self, "channels", c)
        object.__setattr__(self, "height", h)
        object.__setattr__(self, "width", w)
        object.__setattr__(self, "data", arr)


@dataclass(frozen=True)
class FeatureStack:
    """Ordered feature maps from M discriminator layers."""

    maps: tuple

    def __post_init__(self):
        object.__setattr__(self, "maps", tuple(self.maps))
        _require(len(self.maps) >= 1, "feature stack needs at least one level")
        _require(all(isinstance(m, FeatureMap) for m in self.maps),
                 "stack entries must be FeatureMap")


@dataclass(frozen=True)
class PhyLossWeights:
    """Weights (alpha, beta, gamma) for score mixing and the generator loss."""

    alpha: float = 0.6
    beta: float = 1.0
    gamma: float = 10.0

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            v = float(getattr(self, name))
            _require(math.isfinite(v), f"{name} must be finite")
            object.__setattr__(self, name, v)
        _require(0.0 <= self.alpha <= 1.0, "alpha must lie in [0, 1]")
        _require(self.beta >= 0.0, "beta must be nonnegative")
        _require(self.gamma >= 0.0, "gamma must be nonnegative")


def che_embed(theta_rad):
    """Embed an azimuth angle into sin/cos harmonics of order 1..5.

    Parameters
    ----------
    theta_rad : float
        Angle in radians.

    Returns
    -------
    ndarray of shape (10,)
        [sin t, cos t, sin 2t, cos 2t, ..., sin 5t, cos 5t].
    """
    theta = float(theta_rad)
    _require(math.isfinite(theta), "angle must be finite")
    orders = np.arange(1, 6) * theta
    out = np.empty(10)
    out[0::2] = np.sin(orders)
    out[1::2] = np.cos(orders)
    return out


def d_combine(d_img, d_phy, alpha):
    """Convex combination alpha*d_img + (1-alpha)*d_phy of discriminator scores."""
    a = float(alpha)
    _require(math.isfinite(a) and 0.0 <= a <= 1.0, "alpha must lie in [0, 1]")
    d_img = float(d_img)
    d_phy = float(d_phy)
    if d_img == d_phy:
        # equal scores pass through untouched for every alpha
        return d_img
    return a * d_img + (1.0 - a) * d_phy


def _as_image_array(img, name):
    _require(isinstance(img, RealImage), f"{name} must be a RealImage")
    return img.data


def loss_phy_s(s, s_tilde):
    """Mean squared error between two reconstructions."""
    a = _as_image_array(s, "s")
    b = _as_image_array(s_tilde, "s_tilde")
    _require(a.shape == b.shape,
             f"image shapes differ: {a.shape} vs {b.shape}")
    d = a - b
    return float(np.mean(d * d))


def loss_phy_f(phy_feats, img_feats):
    """Sum over levels of ||difference||_2 / (C*H*W).

    The norm is the plain L2 norm of the flattened per-level difference,
    not its square.
    """
    _require(isinstance(phy_feats, FeatureStack) and isinstance(img_feats, FeatureStack),
             "arguments must be FeatureStack")
    _require(len(phy_feats.maps) == len(img_feats.maps),
             f"stacks have {len(phy_feats.maps)} vs {len(img_feats.maps)} levels")
    total = 0.0
    for k, (a, b) in enumerate(zip(phy_feats.maps, img_feats.maps)):
        _require(a.data.shape == b.data.shape,
                 f"level {k} shapes differ: {a.data.shape} vs {b.data.shape}")
        count = a.channels * a.height * a.width
        total += float(np.linalg.norm((a.data - b.data).ravel())) / count
    return total


def loss_phy_g(s, s_tilde, phy_feats, img_feats, weights):
    """Generator physics loss beta*loss_phy_s + gamma*loss_phy_f."""
    _require(isinstance(weights, PhyLossWeights), "weights must be PhyLossWeights")
    return (weights.beta * loss_phy_s(s, s_tilde)
            + weights.gamma * loss_phy_f(phy_feats, img_feats))


def loss_phy_d(img_feats_fake, phy_feats_fake, img_feats_real, phy_feats_real, gamma):
    """Discriminator feature-distillation loss.

    gamma * (feature distance on the fake pair + feature distance on the
    real pair), each term the same per-level normalized L2 as loss_phy_f.
    """
    g = float(gamma)
    _require(math.isfinite(g) and g >= 0.0, "gamma must be nonnegative")
    return g * (loss_phy_f(phy_feats_fake, img_feats_fake)
                + loss_phy_f(phy_feats_real, img_feats_real))
