"""Proximal operators and a generic primal-dual hybrid gradient solver.

The PDHG engine handles min_v F(K v) + G(v) with a block-structured K.
Dual updates are evaluated through Moreau's identity
x = prox_{tf}(x) + t prox_{f*/t}(x/t), so only primal proxes are needed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PdhgConfig",
    "PdhgDiagnostics",
    "WeightedQuadratic",
    "prox_soft_shrink",
    "project_simplex_rows",
    "prox_nonneg",
    "prox_weighted_quadratic",
    "prox_scaled_sq_l2",
    "dual_update_from_prox",
    "estimate_operator_norm",
    "pdhg_solve",
]


@dataclass
class PdhgConfig:
    """Step sizes and stopping control for one PDHG solve.

    sigma/tau default to the reciprocal max row/column sums of |K|; the
    guard sigma*tau*||K||^2 < 1 is enforced in pdhg_solve.
    """

    sigma: float
    tau: float
    theta: float = 1.0
    max_iter: int = 1000
    tol_residual: float = 1e-8
    check_every: int = 10

    def __post_init__(self):
        if self.sigma <= 0 or self.tau <= 0:
            raise ValueError("sigma and tau must be positive")


@dataclass
class PdhgDiagnostics:
    iterations: int = 0
    residuals: list = field(default_factory=list)
    converged: bool = False
    steps_rescaled: bool = False


@dataclass
class WeightedQuadratic:
    """Data term (1/2) sum d (v - center)^2 / prev from the EM surrogate.

    ``prev`` is the previous iterate in the denominator; entries below
    ``floor`` are clamped so the prox stays well-defined at zeros.
    """

    d: np.ndarray
    center: np.ndarray
    prev: np.ndarray
    floor: float = 1e-10

    def __post_init__(self):
        self.d = np.asarray(self.d, dtype=float)
        self.center = np.asarray(self.center, dtype=float)
        self.prev = np.maximum(np.asarray(self.prev, dtype=float), self.floor)


def prox_soft_shrink(x: np.ndarray, lam: float) -> np.ndarray:
    """Soft shrinkage, the prox of lam * ||.||_1."""
    if lam < 0:
        raise ValueError("shrinkage threshold must be nonnegative")
    return np.sign(x) * np.maximum(np.abs(x) - lam, 0.0)


def project_simplex_rows(U: np.ndarray) -> np.ndarray:
    """Euclidean projection of every row onto {w >= 0, sum w = 1}.

    Sort-and-threshold method; exact up to floating point.
    """
    U = np.atleast_2d(np.asarray(U, dtype=float))
    K = U.shape[1]
    s = -np.sort(-U, axis=1)
    cssum = np.cumsum(s, axis=1) - 1.0
    ks = np.arange(1, K + 1)
    cond = s - cssum / ks > 0
    rho = K - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = cssum[np.arange(U.shape[0]), rho] / (rho + 1)
    return np.maximum(U - theta[:, None], 0.0)


def prox_nonneg(x: np.ndarray) -> np.ndarray:
    """Projection onto the nonnegative orthant."""
    return np.maximum(x, 0.0)


def prox_weighted_quadratic(q: WeightedQuadratic, x: np.ndarray, tau: float) -> np.ndarray:
    """Closed-form prox of tau * (1/2) sum d (v - center)^2 / prev.

    Per entry: (d*center/prev + x/tau) / (d/prev + 1/tau).
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    w = q.d / q.prev
    return (w * q.center + x / tau) / (w + 1.0 / tau)


def prox_scaled_sq_l2(y: np.ndarray, weight: float, sigma: float) -> np.ndarray:
    """Prox of sigma * (weight/2) ||.||^2: plain shrinkage y / (1 + sigma*weight)."""
    if weight < 0 or sigma <= 0:
        raise ValueError("weight must be >= 0 and sigma > 0")
    return y / (1.0 + sigma * weight)


def dual_update_from_prox(prox):
    """Turn a primal prox prox(x, t) = prox_{tF}(x) into the dual y-update.

    Via Moreau: y_new = z - sigma * prox_{F/sigma}(z / sigma), where
    z = y + sigma * K v_bar.
    """

    def step(z, sigma):
        return z - sigma * prox(z / sigma, 1.0 / sigma)

    return step


def estimate_operator_norm(K_apply, K_adjoint, shape, iters: int = 50, seed: int = 0) -> float:
    """Power-method estimate of ||K|| for a block operator."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(shape)
    norm = 1.0
    for _ in range(iters):
        y = K_apply(v)
        v = K_adjoint(y)
        norm = np.linalg.norm(v.ravel())
        if norm == 0:
            return 0.0
        v = v / norm
    return float(np.sqrt(norm))


def pdhg_solve(K_apply, K_adjoint, dual_steps, prox_G, cfg: PdhgConfig,
               v0: np.ndarray, operator_norm: float | None = None):
    """Primal-dual hybrid gradient iteration.

    K_apply(v) returns a list of dual blocks; K_adjoint(blocks) maps back.
    dual_steps[i](z_i, sigma) performs the Moreau-converted y-update of
    block i; prox_G(x, tau) is the primal prox.  Stops on the normalized
    Goldstein primal-dual residual or max_iter.
    """
    sigma, tau = cfg.sigma, cfg.tau
    diag = PdhgDiagnostics()
    if operator_norm is not None and operator_norm > 0:
        guard = sigma * tau * operator_norm**2
        if guard >= 1.0:
            # rescale both steps to restore sigma*tau*||K||^2 < 1
            r = np.sqrt(0.95 / guard)
            sigma, tau = sigma * r, tau * r
            diag.steps_rescaled = True

    v = np.array(v0, dtype=float)
    v_bar = v.copy()
    y = [np.zeros_like(b) for b in K_apply(v)]
    scale = max(1.0, float(np.linalg.norm(v.ravel())))

    for it in range(cfg.max_iter):
        Kv = K_apply(v_bar)
        y_new = [dual_steps[i](y[i] + sigma * Kv[i], sigma) for i in range(len(y))]
        v_new = prox_G(v - tau * K_adjoint(y_new), tau)
        v_bar = v_new + cfg.theta * (v_new - v)

        if (it + 1) % cfg.check_every == 0 or it == cfg.max_iter - 1:
            dv = v - v_new
            dy = [y[i] - y_new[i] for i in range(len(y))]
            Kdv = K_apply(dv)
            primal = np.linalg.norm((dv / tau - K_adjoint(dy)).ravel())
            dual = np.sqrt(sum(
                float(np.sum((dy[i] / sigma - Kdv[i]) ** 2)) for i in range(len(y))))
            res = (primal + dual) / scale
            diag.residuals.append(res)
            if res <= cfg.tol_residual:
                v, y = v_new, y_new
                diag.iterations = it + 1
                diag.converged = True
                return v, diag
        v, y = v_new, y_new

    diag.iterations = cfg.max_iter
    return v, diag
