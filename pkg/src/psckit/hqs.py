"""Half-quadratic-splitting solver with closed-form splitting updates.

Each iteration applies, in order,

    o = p_prev + mu * Psi^H (Psi Psi^H + eps I)^-1 (r - Psi p_prev)
    p = S_rho(p_prev + t * Psi^H (Psi p_prev - o))

with S_rho the soft threshold.  The p-update direction above is the default;
proximal_mode replaces it with the textbook proximal step p = S_rho(o).
The auxiliary variable starts at p = 0 and the residual ||r - Psi o||_2 is
recorded after every iteration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import SparseCoeffs, _require
from .forward_model import _adjoint_grid, _apply_grid, _as_grid, _gram_inverse_grid


@dataclass(frozen=True)
class HqsParams:
    """Fixed solver parameters; defaults are the published initial values."""

    t: float = 1e-3
    rho: float = 5e-3
    mu: float = 1e-3
    num_iters: int = 50
    proximal_mode: bool = False

    def __post_init__(self):
        _require(self.t > 0, "t must be positive")
        _require(self.rho >= 0, "rho must be nonnegative")
        _require(self.mu > 0, "mu must be positive")
        _require(int(self.num_iters) >= 1, "num_iters must be >= 1")
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "rho", float(self.rho))
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "num_iters", int(self.num_iters))


@dataclass(frozen=True)
class HqsResult:
    o: SparseCoeffs
    p: SparseCoeffs
    residual_trace: tuple


def soft_threshold(x, rho):
    """Soft shrinkage: sign(x) * max(|x| - rho, 0); complex inputs shrink the
    magnitude and keep the phase (exactly 0 at x = 0)."""
    scalar = np.isscalar(x)
    arr = np.asarray(x)
    if np.iscomplexobj(arr):
        mag = np.abs(arr)
        safe = np.where(mag > 0, mag, 1.0)
        out = arr * (np.maximum(mag - rho, 0.0) / safe)
    else:
        out = np.sign(arr) * np.maximum(np.abs(arr) - rho, 0.0)
    return out.item() if scalar else out


def _stage(dic, r_grid, p_grid, t, rho, mu, proximal):
    """One splitting update on raw grids; returns (o, p, saved intermediates).

    The saved dict carries everything the reverse-mode pass needs.
    """
    ap = _apply_grid(dic, p_grid)
    a = r_grid - ap
    b = _gram_inverse_grid(dic, a)
    c = _adjoint_grid(dic, b)
    o = p_grid + mu * c
    if proximal:
        u = v = None
        w = o
    else:
        u = ap - o
        v = _adjoint_grid(dic, u)
        w = p_grid + t * v
    p = soft_threshold(w, rho)
    saved = {"p_prev": p_grid, "c": c, "o": o, "u": u, "v": v, "w": w}
    return o, p, saved


def _run_stages(dic, r_grid, stage_tuples, proximal):
    """Apply the splitting update once per (t, rho, mu) triple, from p = 0.

    Single driver for both the fixed-parameter solver and the unrolled
    estimator, so the two agree bit-for-bit on identical parameters.
    Returns (o, p, residual trace, saved intermediates per stage).
    """
    dtype = np.complex128 if np.iscomplexobj(r_grid) else np.float64
    p = np.zeros_like(np.asarray(r_grid, dtype=dtype))
    o = p
    trace = []
    saved_all = []
    for (t, rho, mu) in stage_tuples:
        o, p, saved = _stage(dic, r_grid, p, t, rho, mu, proximal)
        trace.append(float(np.linalg.norm(r_grid - _apply_grid(dic, o))))
        saved_all.append(saved)
    return o, p, tuple(trace), saved_all


def hqs_step(dic, r, p_prev, params):
    """One HQS iteration; returns the (o, p) pair as coefficient grids."""
    r_grid = _as_grid(dic, r)
    p_grid = _as_grid(dic, p_prev)
    o, p, _ = _stage(dic, r_grid, p_grid, params.t, params.rho, params.mu,
                     params.proximal_mode)
    h, w = dic.config.grid_h, dic.config.grid_w
    return SparseCoeffs(h, w, o), SparseCoeffs(h, w, p)


def hqs_solve(dic, r, params):
    """Run num_iters splitting updates from p = 0.

    Returns an HqsResult with the final (o, p) and the per-iteration residual
    trace ||r - Psi o^(k)||_2.
    """
    r_grid = _as_grid(dic, r)
    triples = [(params.t, params.rho, params.mu)] * params.num_iters
    o, p, trace, _ = _run_stages(dic, r_grid, triples, params.proximal_mode)
    h, w = dic.config.grid_h, dic.config.grid_w
    return HqsResult(o=SparseCoeffs(h, w, o), p=SparseCoeffs(h, w, p),
                     residual_trace=trace)
