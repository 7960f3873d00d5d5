"""Unrolled splitting estimator with hand-written reverse-mode gradients.

A fixed number of splitting stages is unrolled into a feed-forward pipeline
whose per-stage step sizes and threshold (t, rho, mu) are trained by
minimizing

    L(o, p) = ||r - Psi o||_2^2 + lambda1 ||o - p||_2^2 + lambda2 ||p||_1

on the final stage outputs.  Gradients with respect to the 3K scalars are
computed by an explicit reverse sweep through the stage recurrences (no
autodiff dependency); the soft threshold is differentiated almost
everywhere with subgradient 0 at its kink.  Training uses AdamW with
decoupled weight decay and projects after every step onto
t >= 1e-8, rho >= 0, mu >= 1e-8.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .core import (
    PscSet,
    ScatteringCenter,
    SparseCoeffs,
    ValidationError,
    _require,
    pixel_to_xy,
)
from .forward_model import (
    _adjoint_grid,
    _apply_grid,
    _as_grid,
    _gram_inverse_grid,
    reconstruct_image,
)
from .hqs import _run_stages


@dataclass(frozen=True)
class StageParams:
    """Learnable scalars of one unrolled stage."""

    t: float
    rho: float
    mu: float

    def __post_init__(self):
        _require(self.t > 0, "t must be positive")
        _require(self.rho >= 0, "rho must be nonnegative")
        _require(self.mu > 0, "mu must be positive")
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "rho", float(self.rho))
        object.__setattr__(self, "mu", float(self.mu))


@dataclass(frozen=True)
class EstimatorParams:
    """Stage parameters plus the loss weights they were trained under."""

    stages: tuple
    lambda1: float = 100.0
    lambda2: float = 200.0

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        _require(len(self.stages) >= 1, "at least one stage is required")
        _require(all(isinstance(s, StageParams) for s in self.stages),
                 "stages must be StageParams instances")
        _require(self.lambda1 >= 0 and self.lambda2 >= 0,
                 "loss weights must be nonnegative")
        object.__setattr__(self, "lambda1", float(self.lambda1))
        object.__setattr__(self, "lambda2", float(self.lambda2))


def default_estimator_params(num_stages=2, lambda1=100.0, lambda2=200.0):
    """Published initialization: (t, rho, mu) = (0.001, 0.005, 0.001) per stage."""
    return EstimatorParams(stages=tuple(StageParams(1e-3, 5e-3, 1e-3)
                                        for _ in range(num_stages)),
                           lambda1=lambda1, lambda2=lambda2)


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer and unrolling settings for train_estimator."""

    num_stages: int = 2
    steps: int = 200
    batch_size: int = 16
    learning_rate: float = 0.002
    weight_decay: float = 0.005
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    proximal_mode: bool = False
    init_t: float = 1e-3
    init_rho: float = 5e-3
    init_mu: float = 1e-3
    lambda1: float = 100.0
    lambda2: float = 200.0

    def __post_init__(self):
        _require(int(self.num_stages) >= 1, "num_stages must be >= 1")
        _require(int(self.steps) >= 0, "steps must be >= 0")
        _require(int(self.batch_size) >= 1, "batch_size must be >= 1")
        _require(self.learning_rate > 0, "learning_rate must be positive")
        _require(self.weight_decay >= 0, "weight_decay must be nonnegative")
        _require(0 <= self.beta1 < 1 and 0 <= self.beta2 < 1,
                 "betas must lie in [0, 1)")
        _require(self.adam_eps > 0, "adam_eps must be positive")
        StageParams(self.init_t, self.init_rho, self.init_mu)  # bounds check
        _require(self.lambda1 >= 0 and self.lambda2 >= 0,
                 "loss weights must be nonnegative")


def train_config_to_dict(config):
    return {k: getattr(config, k) for k in (
        "num_stages", "steps", "batch_size", "learning_rate", "weight_decay",
        "beta1", "beta2", "adam_eps", "seed", "proximal_mode",
        "init_t", "init_rho", "init_mu", "lambda1", "lambda2")}


def train_config_from_dict(doc):
    known = set(train_config_to_dict(TrainConfig()))
    extra = set(doc) - known
    if extra:
        raise ValidationError(f"unknown train config fields: {sorted(extra)}")
    return TrainConfig(**doc)


# ---------------------------------------------------------------------------
# forward / loss


def _forward_stages(dic, r_grid, stages, proximal):
    o, p, _, saved = _run_stages(dic, r_grid,
                                 [(s.t, s.rho, s.mu) for s in stages], proximal)
    return o, p, saved


def estimator_forward(dic, r, params, proximal_mode=False):
    """Run the unrolled stages; returns (o, p, residual trace).

    With every stage equal to a fixed parameter triple this reproduces
    hqs_solve bit-for-bit (both drive the same stage kernel).
    """
    r_grid = _as_grid(dic, r)
    triples = [(s.t, s.rho, s.mu) for s in params.stages]
    o, p, trace, _ = _run_stages(dic, r_grid, triples, proximal_mode)
    h, w = dic.config.grid_h, dic.config.grid_w
    return SparseCoeffs(h, w, o), SparseCoeffs(h, w, p), trace


def loss_psc(dic, r, o, p, lambda1=100.0, lambda2=200.0):
    """Data fidelity + splitting consistency + l1 sparsity, summed over pixels."""
    r_g = _as_grid(dic, r)
    o_g = _as_grid(dic, o)
    p_g = _as_grid(dic, p)
    e = r_g - _apply_grid(dic, o_g)
    return float(np.sum(np.abs(e) ** 2)
                 + lambda1 * np.sum(np.abs(o_g - p_g) ** 2)
                 + lambda2 * np.sum(np.abs(p_g)))


# ---------------------------------------------------------------------------
# reverse-mode gradients
#
# Cotangents follow the real inner product <a, b> = Re(a^H b), so for any
# C-linear map y = A x the pullback is g_x = A^H g_y and real data reduces
# to the ordinary chain rule.


def _sign_like(p):
    if np.iscomplexobj(p):
        mag = np.abs(p)
        return p / np.where(mag > 0, mag, 1.0)
    return np.sign(p)


def _threshold_backward(w, rho, g_p):
    """Pullback of p = S_rho(w); returns (g_w, dloss/drho)."""
    if np.iscomplexobj(w) or np.iscomplexobj(g_p):
        mag = np.abs(w)
        active = mag > rho
        safe = np.where(active, mag, 1.0)
        coef = np.where(active, 1.0 - rho / safe, 0.0)
        corr = np.where(active, rho / safe ** 3, 0.0)
        g_w = coef * g_p + corr * np.real(np.conj(g_p) * w) * w
        g_rho = float(np.sum(np.real(np.conj(g_p) * (-w / safe))[active]))
        return g_w, g_rho
    active = np.abs(w) > rho
    g_w = np.where(active, g_p, 0.0)
    g_rho = float(np.sum((-np.sign(w) * g_p)[active]))
    return g_w, g_rho


def _stage_backward(dic, saved, stage, proximal, g_o, g_p):
    """Pullback through one stage; returns (g wrt p_prev, (g_t, g_rho, g_mu))."""
    g_w, g_rho = _threshold_backward(saved["w"], stage.rho, g_p)
    if proximal:
        g_o = g_o + g_w
        g_t = 0.0
        g_ap = None
        g_pprev = np.zeros_like(g_w)
    else:
        g_pprev = g_w.copy()
        g_t = float(np.real(np.vdot(g_w, saved["v"])))
        g_u = _apply_grid(dic, stage.t * g_w)
        g_ap = g_u
        g_o = g_o - g_u
    g_mu = float(np.real(np.vdot(g_o, saved["c"])))
    g_pprev = g_pprev + g_o
    g_b = _apply_grid(dic, stage.mu * g_o)
    g_a = _gram_inverse_grid(dic, g_b)
    g_ap = -g_a if g_ap is None else g_ap - g_a
    g_pprev = g_pprev + _adjoint_grid(dic, g_ap)
    return g_pprev, (g_t, g_rho, g_mu)


def _loss_and_grad(dic, r_grid, params, proximal):
    stages = params.stages
    o, p, saved = _forward_stages(dic, r_grid, stages, proximal)
    e = r_grid - _apply_grid(dic, o)
    diff = o - p
    loss = float(np.sum(np.abs(e) ** 2)
                 + params.lambda1 * np.sum(np.abs(diff) ** 2)
                 + params.lambda2 * np.sum(np.abs(p)))
    g_o = -2.0 * _adjoint_grid(dic, e) + 2.0 * params.lambda1 * diff
    g_p = -2.0 * params.lambda1 * diff + params.lambda2 * _sign_like(p)
    grads = np.zeros((len(stages), 3))
    for k in reversed(range(len(stages))):
        g_p, grads[k] = _stage_backward(dic, saved[k], stages[k], proximal, g_o, g_p)
        g_o = np.zeros_like(g_p)
    return loss, grads


def loss_grad(dic, r, params, proximal_mode=False):
    """Gradient of loss_psc at the unrolled output w.r.t. all (t, rho, mu).

    Returns an array of shape (num_stages, 3) ordered (t, rho, mu).
    """
    _, grads = _loss_and_grad(dic, _as_grid(dic, r), params, proximal_mode)
    return grads


# ---------------------------------------------------------------------------
# optimizer and training loop


class AdamW:
    """Adam with decoupled weight decay on a flat parameter vector."""

    def __init__(self, theta0, learning_rate=0.002, weight_decay=0.005,
                 beta1=0.9, beta2=0.999, eps=1e-8):
        self.theta = np.array(theta0, dtype=float)
        self.learning_rate = float(learning_rate)
        self.weight_decay = float(weight_decay)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.m = np.zeros_like(self.theta)
        self.v = np.zeros_like(self.theta)
        self.count = 0

    def step(self, grad):
        grad = np.asarray(grad, dtype=float)
        self.count += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad ** 2
        mhat = self.m / (1.0 - self.beta1 ** self.count)
        vhat = self.v / (1.0 - self.beta2 ** self.count)
        self.theta = self.theta - self.learning_rate * (
            mhat / (np.sqrt(vhat) + self.eps) + self.weight_decay * self.theta)
        return self.theta.copy()


def _params_from_theta(theta, lambda1, lambda2):
    stages = tuple(StageParams(t=row[0], rho=row[1], mu=row[2]) for row in theta)
    return EstimatorParams(stages=stages, lambda1=lambda1, lambda2=lambda2)


def train_estimator(dic, dataset, config):
    """Train the 3K unrolled scalars on a list of measurement vectors.

    Minibatches are drawn without replacement each step from a generator
    seeded by config.seed, so runs are deterministic.  Returns the trained
    EstimatorParams and a per-step (step, batch mean loss) history; the loss
    is evaluated at the parameters before each update.
    """
    _require(len(dataset) >= 1, "dataset must not be empty")
    grids = [_as_grid(dic, d) for d in dataset]
    theta = np.tile([config.init_t, config.init_rho, config.init_mu],
                    (config.num_stages, 1))
    opt = AdamW(theta.ravel(), learning_rate=config.learning_rate,
                weight_decay=config.weight_decay, beta1=config.beta1,
                beta2=config.beta2, eps=config.adam_eps)
    rng = np.random.default_rng(config.seed)
    history = []
    for step in range(config.steps):
        take = min(config.batch_size, len(grids))
        idx = rng.choice(len(grids), size=take, replace=False)
        params = _params_from_theta(theta, config.lambda1, config.lambda2)
        loss_sum = 0.0
        grad_sum = np.zeros((config.num_stages, 3))
        for i in idx:
            loss, grads = _loss_and_grad(dic, grids[i], params, config.proximal_mode)
            loss_sum += loss
            grad_sum += grads
        history.append((step, loss_sum / take))
        flat = opt.step(grad_sum.ravel() / take)
        theta = flat.reshape(config.num_stages, 3)
        theta[:, 0] = np.maximum(theta[:, 0], 1e-8)
        theta[:, 1] = np.maximum(theta[:, 1], 0.0)
        theta[:, 2] = np.maximum(theta[:, 2], 1e-8)
        opt.theta = theta.ravel()
    return _params_from_theta(theta, config.lambda1, config.lambda2), history


# ---------------------------------------------------------------------------
# center extraction


def estimate_psc(dic, image, params, proximal_mode=False, max_centers=None):
    """Estimate scattering centers from a measurement image.

    Runs the unrolled forward pass, converts the nonzero entries of the
    sparse output p to scattering centers (scene coordinates of their pixel,
    coefficient value as amplitude, ordered by descending magnitude), and
    reconstructs the magnitude image implied by the data-consistent o.
    """
    r_grid = image.data
    o, p, _ = estimator_forward(dic, r_grid, params, proximal_mode=proximal_mode)
    grid = p.data
    ii, jj = np.nonzero(np.abs(grid))
    order = np.argsort(-np.abs(grid[ii, jj]), kind="stable")
    if max_centers is not None:
        order = order[: int(max_centers)]
    centers = []
    for k in order:
        i, j = int(ii[k]), int(jj[k])
        x, y = pixel_to_xy(i, j, dic.config)
        centers.append(ScatteringCenter(amplitude=complex(grid[i, j]), x=x, y=y))
    pscs = PscSet(centers=centers, class_label=0, azimuth_deg=0.0)
    return pscs, reconstruct_image(dic, o)


# ---------------------------------------------------------------------------
# serialization (schema: {"stages":[{"t","rho","mu"},...],"lambda1","lambda2"})


def estimator_params_to_dict(params):
    return {
        "stages": [{"t": s.t, "rho": s.rho, "mu": s.mu} for s in params.stages],
        "lambda1": params.lambda1,
        "lambda2": params.lambda2,
    }


def estimator_params_from_dict(doc):
    try:
        stages = tuple(StageParams(t=float(s["t"]), rho=float(s["rho"]),
                                   mu=float(s["mu"])) for s in doc["stages"])
        return EstimatorParams(stages=stages, lambda1=float(doc["lambda1"]),
                               lambda2=float(doc["lambda2"]))
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed estimator params document: {exc}") from exc


def save_estimator_params(params, path):
    Path(path).write_text(json.dumps(estimator_params_to_dict(params), indent=2) + "\n",
                          encoding="utf-8")


def load_estimator_params(path):
    return estimator_params_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
