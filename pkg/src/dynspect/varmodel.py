"""Discrete variational objective and the bilinear forward operators.

The dynamic image factorizes as U C^T (labels times regional curves); the
forward model applies a per-time-step Radon matrix to each frame.  Operators
A (U variable, C fixed) and B (C variable, U fixed) are matrix-free.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sim import AcquisitionSchedule
from .tomo import AttenuationMap, ImageGeometry, ProjectorCache, ProjectorFrame

__all__ = [
    "LabelField",
    "ObjectiveParams",
    "BilinearOperator",
    "build_frames",
    "kl",
    "grad_image",
    "div_image",
    "tv_aniso",
    "grad_time",
    "grad_time_adjoint",
    "objective",
]


@dataclass(frozen=True)
class LabelField:
    """n x K soft region memberships; every row lies on the unit simplex."""

    values: np.ndarray
    tol: float = 1e-9

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError("label field must be an n x K matrix")
        row_sums = values.sum(axis=1)
        if (np.abs(row_sums - 1.0).max() > self.tol
                or values.min() < -1e-12 or values.max() > 1.0 + 1e-12):
            raise ValueError("label rows must lie on the unit simplex")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class ObjectiveParams:
    """Regularization weights: alpha (TV), beta (L1), delta (temporal)."""

    alpha: float = 0.0
    beta: float = 0.0
    delta: float = 0.0
    kl_floor: float = 1e-12

    def __post_init__(self):
        if min(self.alpha, self.beta, self.delta) < 0:
            raise ValueError("regularization weights must be nonnegative")
        if self.kl_floor <= 0:
            raise ValueError("kl_floor must be positive")


def kl(p: np.ndarray, g: np.ndarray, floor: float = 1e-12) -> float:
    """Kullback-Leibler divergence sum(p - g + g log(g/p)).

    Nonnegative data fidelity for Poisson counts; uses the 0 log 0 = 0
    convention and clamps p below at ``floor`` inside the log.
    """
    p = np.asarray(p, dtype=float)
    g = np.asarray(g, dtype=float)
    if np.any(p < 0) or np.any(g < 0):
        raise ValueError("kl arguments must be nonnegative")
    safe_p = np.maximum(p, floor)
    log_term = np.zeros_like(g)
    pos = g > 0
    log_term[pos] = g[pos] * np.log(g[pos] / safe_p[pos])
    return float(np.sum(p - g + log_term))


class BilinearOperator:
    """Matrix-free A and B for the factorized forward model R U C^T.

    With per-step projectors R_t, A vec(U) stacks R_t (U c_t) over t and
    B vec(C^T) stacks R_t (U c_t) with U fixed instead of C.
    """

    def __init__(self, schedule: AcquisitionSchedule, geom: ImageGeometry,
                 mu: AttenuationMap | None = None,
                 cache: ProjectorCache | None = None):
        self.schedule = schedule
        self.geom = geom
        if cache is None:
            cache = ProjectorCache(geom, mu)
        self.cache = cache
        self.frames: list[ProjectorFrame] = [cache.get(p) for p in schedule.poses]

    # --- A: U is the variable, C fixed ---

    def apply_A(self, U: np.ndarray, C: np.ndarray) -> np.ndarray:
        """(m x M) projections of U C^T, column by column."""
        out = np.empty((self.schedule.m, self.schedule.M))
        for t, frame in enumerate(self.frames):
            out[:, t] = frame.matrix @ (U @ C[t, :])
        return out

    def apply_A_adjoint(self, y: np.ndarray, C: np.ndarray) -> np.ndarray:
        """(n x K) adjoint: sum_t outer(R_t^T y_t, c_t)."""
        out = np.zeros((self.geom.n, C.shape[1]))
        for t, frame in enumerate(self.frames):
            out += np.outer(frame.matrix.T @ y[:, t], C[t, :])
        return out

    def sensitivity_A(self, C: np.ndarray) -> np.ndarray:
        """A^T 1, the EM normalizer for the U update."""
        return self.apply_A_adjoint(np.ones((self.schedule.m, self.schedule.M)), C)

    # --- B: C^T is the variable, U fixed ---

    def apply_B(self, Ct: np.ndarray, U: np.ndarray) -> np.ndarray:
        """(m x M) projections with U fixed; Ct is K x M."""
        out = np.empty((self.schedule.m, self.schedule.M))
        for t, frame in enumerate(self.frames):
            out[:, t] = frame.matrix @ (U @ Ct[:, t])
        return out

    def apply_B_adjoint(self, y: np.ndarray, U: np.ndarray) -> np.ndarray:
        """(K x M) adjoint: column t is U^T R_t^T y_t."""
        out = np.empty((U.shape[1], self.schedule.M))
        for t, frame in enumerate(self.frames):
            out[:, t] = U.T @ (frame.matrix.T @ y[:, t])
        return out

    def sensitivity_B(self, U: np.ndarray) -> np.ndarray:
        """B^T 1, the EM normalizer for the C update."""
        return self.apply_B_adjoint(np.ones((self.schedule.m, self.schedule.M)), U)


def build_frames(U: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Dynamic image U C^T as an n x M matrix."""
    return U @ C.T


def grad_image(u: np.ndarray, n1: int, n2: int) -> np.ndarray:
    """Forward-difference spatial gradient with Neumann boundary.

    ``u`` may be (n,) or (n, K); output has a leading axis of size 2
    (d/drow, d/dcol) with zero differences at the last row/column.
    """
    squeeze = u.ndim == 1
    grid = u.reshape(n1, n2, -1)
    g = np.zeros((2,) + grid.shape)
    g[0, :-1] = grid[1:] - grid[:-1]
    g[1, :, :-1] = grid[:, 1:] - grid[:, :-1]
    out = g.reshape(2, n1 * n2, -1)
    return out[:, :, 0] if squeeze else out


def div_image(g: np.ndarray, n1: int, n2: int) -> np.ndarray:
    """Negative adjoint of grad_image (discrete divergence)."""
    squeeze = g.ndim == 2
    gr = g.reshape(2, n1, n2, -1)
    out = np.zeros(gr.shape[1:])
    out[:-1] += gr[0, :-1]
    out[1:] -= gr[0, :-1]
    out[:, :-1] += gr[1, :, :-1]
    out[:, 1:] -= gr[1, :, :-1]
    res = out.reshape(n1 * n2, -1)
    return res[:, 0] if squeeze else res


def tv_aniso(u: np.ndarray, n1: int, n2: int) -> float:
    """Anisotropic total variation: sum of |forward differences|."""
    return float(np.abs(grad_image(u, n1, n2)).sum())


def grad_time(Ct: np.ndarray) -> np.ndarray:
    """Forward time differences of K x M curves; output K x (M-1)."""
    return Ct[:, 1:] - Ct[:, :-1]


def grad_time_adjoint(d: np.ndarray) -> np.ndarray:
    """Adjoint of grad_time; maps K x (M-1) back to K x M."""
    out = np.zeros((d.shape[0], d.shape[1] + 1))
    out[:, :-1] -= d
    out[:, 1:] += d
    return out


def objective(U: np.ndarray, C: np.ndarray, g: np.ndarray,
              params: ObjectiveParams, op: BilinearOperator) -> dict:
    """Evaluate the full discrete objective with a per-term breakdown.

    Returns a dict with keys kl, tv, l1, temporal, total.  Infeasible
    iterates (rows off the simplex, negative curves) yield total = inf.
    """
    n1, n2 = op.geom.n1, op.geom.n2
    proj = op.apply_A(U, C)
    terms = {
        "kl": kl(proj, g, floor=params.kl_floor * max(1.0, float(g.max()))),
        "tv": params.alpha * sum(tv_aniso(U[:, k], n1, n2) for k in range(U.shape[1])),
        "l1": params.beta * float(np.abs(U).sum()),
        "temporal": 0.5 * params.delta * float((grad_time(C.T) ** 2).sum()),
    }
    feasible = (np.abs(U.sum(axis=1) - 1.0).max() <= 1e-6
                and U.min() >= -1e-9 and C.min() >= -1e-12)
    terms["total"] = sum(terms.values()) if feasible else np.inf
    return terms
