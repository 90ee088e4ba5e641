"""Quantitative evaluation of reconstructions against phantom ground truth."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations

import numpy as np

from .kinetics import Phantom, render_frames
from .varmodel import kl

__all__ = ["EvalReport", "image_error", "segmentation_accuracy", "evaluate", "sweep"]


@dataclass
class EvalReport:
    l2_per_pixel_per_step: float
    misclassification_rate: float
    per_region_curve_rmse: np.ndarray
    kl_data_fit: float


def image_error(U: np.ndarray, C: np.ndarray, ph: Phantom) -> float:
    """Frobenius error of U C^T against the true image sequence, divided by
    the number of pixels times time steps."""
    diff = U @ C.T - render_frames(ph)
    return float(np.linalg.norm(diff) / (ph.geom.n * ph.M))


def segmentation_accuracy(U: np.ndarray, ph: Phantom):
    """Fraction of correctly labelled pixels after argmax hardening and
    optimal label matching (exhaustive over permutations, K <= 6 intended).

    Returns (accuracy, permutation) where permutation[k] is the truth label
    matched to reconstructed label k.  Argmax ties break to the lowest index.
    """
    if U.shape[1] != ph.K:
        raise ValueError("label field and phantom disagree on the number of regions")
    hard = np.argmax(U, axis=1)
    best_rate, best_perm = -1.0, None
    for perm in permutations(range(ph.K)):
        relabeled = np.asarray(perm)[hard]
        rate = float(np.mean(relabeled == ph.region_map))
        if rate > best_rate:
            best_rate, best_perm = rate, perm
    return best_rate, best_perm


def evaluate(U: np.ndarray, C: np.ndarray, ph: Phantom,
             g: np.ndarray | None = None, proj: np.ndarray | None = None) -> EvalReport:
    """Full report: image error, misclassification, matched curve RMSEs, and
    (when projections are supplied) the KL data fit."""
    rate, perm = segmentation_accuracy(U, ph)
    # perm maps recon label -> truth label; compare curve columns accordingly
    rmse = np.zeros(ph.K)
    for k in range(ph.K):
        rmse[perm[k]] = np.sqrt(np.mean((C[:, k] - ph.curves.values[:, perm[k]]) ** 2))
    fit = kl(proj, g) if (g is not None and proj is not None) else 0.0
    return EvalReport(
        l2_per_pixel_per_step=image_error(U, C, ph),
        misclassification_rate=1.0 - rate,
        per_region_curve_rmse=rmse,
        kl_data_fit=fit,
    )


def sweep(param_name: str, grid, g, geom, K, base_cfg, ph: Phantom):
    """Reconstruct once per grid value of one regularization weight and
    report the image error; returns a list of (value, error) rows."""
    from dataclasses import replace

    from .recon import reconstruct

    if param_name not in ("alpha", "beta", "delta"):
        raise ValueError(f"unknown sweep parameter {param_name!r}")
    rows = []
    for value in grid:
        params = replace(base_cfg.params, **{param_name: float(value)})
        cfg = replace(base_cfg, params=params)
        state = reconstruct(g, geom, K, cfg)
        rows.append((float(value), image_error(state.U, state.C, ph)))
    return rows
