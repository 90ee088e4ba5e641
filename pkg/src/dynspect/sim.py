"""Data simulation: acquisition schedules, clean projections, Poisson noise,
and event-level Monte Carlo counting.

All randomness goes through the counter-based Philox generator with
per-time-step substreams, so simulations are reproducible and time steps
are independent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kinetics import Phantom, render_frames
from .tomo import (
    AttenuationMap,
    CameraPose,
    ImageGeometry,
    ProjectorCache,
    attenuation_factors,
    bin_offsets,
    forward,
    pixel_centers,
    resolve_bin_width,
    trace_ray,
)

__all__ = [
    "AcquisitionSchedule",
    "Sinogram",
    "schedule_preset",
    "simulate_clean",
    "poissonize",
    "monte_carlo",
]


@dataclass(frozen=True)
class AcquisitionSchedule:
    """One camera pose per time step; all poses share the same bin count."""

    poses: tuple[CameraPose, ...]

    def __post_init__(self):
        if len(self.poses) < 1:
            raise ValueError("schedule needs at least one time step")
        m0 = self.poses[0].total_bins
        if any(p.total_bins != m0 for p in self.poses):
            raise ValueError("all poses must have the same total bin count")

    @property
    def M(self) -> int:
        return len(self.poses)

    @property
    def m(self) -> int:
        return self.poses[0].total_bins


@dataclass(frozen=True)
class Sinogram:
    """m x M nonnegative measurement matrix tied to its schedule."""

    data: np.ndarray
    schedule: AcquisitionSchedule

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.shape != (self.schedule.m, self.schedule.M):
            raise ValueError(
                f"data shape {data.shape} does not match schedule "
                f"({self.schedule.m}, {self.schedule.M})"
            )
        if not np.all(np.isfinite(data)) or np.any(data < 0):
            raise ValueError("sinogram data must be finite and nonnegative")
        object.__setattr__(self, "data", data)


def _dual_head(theta_deg: float, bins_per_head: int) -> CameraPose:
    theta = np.deg2rad(theta_deg)
    return CameraPose(angles=(theta, theta + np.pi), bins_per_head=bins_per_head)


def schedule_preset(kind: str, M: int, bins_per_head: int = 95) -> AcquisitionSchedule:
    """Named dual-head acquisition schedules.

    rotate2      2 degrees clockwise per step.
    alternate45  step t projects from t degrees (even t) or 45+t degrees
                 (odd t); the base angle advances every step.
    mc46         46 degrees per step.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    if kind == "rotate2":
        poses = [_dual_head(2.0 * t, bins_per_head) for t in range(M)]
    elif kind == "alternate45":
        poses = [_dual_head(t + (45.0 if t % 2 else 0.0), bins_per_head) for t in range(M)]
    elif kind == "mc46":
        poses = [_dual_head(46.0 * t, bins_per_head) for t in range(M)]
    else:
        raise ValueError(f"unknown schedule kind {kind!r}")
    return AcquisitionSchedule(poses=tuple(poses))


def simulate_clean(ph: Phantom, sched: AcquisitionSchedule,
                   mu: AttenuationMap | None = None) -> Sinogram:
    """Noise-free attenuated projections of the phantom's dynamic image."""
    if sched.M != ph.M:
        raise ValueError(f"schedule has {sched.M} steps, phantom has {ph.M}")
    cache = ProjectorCache(ph.geom, mu)
    frames = render_frames(ph)
    data = np.empty((sched.m, sched.M))
    for t, pose in enumerate(sched.poses):
        data[:, t] = forward(cache.get(pose), frames[:, t])
    return Sinogram(data=data, schedule=sched)


def _step_rng(seed: int, t: int) -> np.random.Generator:
    """Independent Philox substream for time step t."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(t,))))


def poissonize(s: Sinogram, scale: float, seed: int = 0) -> Sinogram:
    """Poisson-corrupt a sinogram: out = Poisson(scale * s) / scale.

    ``scale`` converts intensities to expected counts, so small scales mean
    strong noise.  Deterministic per seed; zeros stay exactly zero.
    """
    if scale <= 0:
        raise ValueError("scale must be positive")
    data = np.empty_like(s.data)
    for t in range(s.schedule.M):
        rng = _step_rng(seed, t)
        data[:, t] = rng.poisson(scale * s.data[:, t]) / scale
    return Sinogram(data=data, schedule=s.schedule)


def _pixel_attenuation(geom: ImageGeometry, mu: AttenuationMap, theta: float,
                       xx: np.ndarray, yy: np.ndarray) -> np.ndarray:
    """Photon survival probability per pixel for rays toward the detector
    at angle theta, evaluated on the ray through each pixel center."""
    if not np.any(mu.mu):
        return np.ones(geom.n)
    e = np.array([-np.sin(theta), np.cos(theta)])
    surv = np.ones(geom.n)
    for p in range(geom.n):
        s = xx[p] * e[0] + yy[p] * e[1]
        pixels, lengths, t_mid = trace_ray(geom, theta, s)
        if pixels.size == 0:
            continue
        att = attenuation_factors(mu.mu, pixels, lengths)
        own = np.nonzero(pixels == p)[0]
        if own.size:
            surv[p] = att[own[0]]
    return surv


def monte_carlo(ph: Phantom, sched: AcquisitionSchedule,
                mu: AttenuationMap | None = None,
                lam: float = 20000.0, seed: int = 0) -> Sinogram:
    """Event-level photon-counting simulation.

    Per time step, Poisson(lam * mean pixel concentration) decay events are
    drawn; each event picks a pixel proportional to its concentration, a
    detector head uniformly, survives attenuation with probability
    exp(-integral of mu toward that head), and is counted in the nearest
    bin along the head's detector axis (event positions are jittered
    uniformly inside the pixel).
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    if sched.M != ph.M:
        raise ValueError(f"schedule has {sched.M} steps, phantom has {ph.M}")
    if mu is None:
        mu = AttenuationMap.zero(ph.geom)

    geom = ph.geom
    frames = render_frames(ph)
    xx, yy = pixel_centers(geom)
    h = geom.pixel_size
    data = np.zeros((sched.m, sched.M))
    surv_cache: dict[int, np.ndarray] = {}

    for t, pose in enumerate(sched.poses):
        f = frames[:, t]
        total = f.sum()
        if total <= 0:
            continue
        rng = _step_rng(seed, t)
        n_events = rng.poisson(lam * f.mean())
        if n_events == 0:
            continue

        width = resolve_bin_width(geom, pose)
        smin = bin_offsets(pose, width)[0] - width / 2.0
        pix = rng.choice(geom.n, size=n_events, p=f / total)
        heads = rng.integers(len(pose.angles), size=n_events)
        jx = (rng.random(n_events) - 0.5) * h
        jy = (rng.random(n_events) - 0.5) * h
        px, py = xx[pix] + jx, yy[pix] + jy

        for head, theta in enumerate(pose.angles):
            key = int(round(theta / 1e-9))
            if key not in surv_cache:
                surv_cache[key] = _pixel_attenuation(geom, mu, theta, xx, yy)
            sel = heads == head
            if not np.any(sel):
                continue
            keep = rng.random(sel.sum()) < surv_cache[key][pix[sel]]
            idx = np.nonzero(sel)[0][keep]
            s = -px[idx] * np.sin(theta) + py[idx] * np.cos(theta)
            b = np.floor((s - smin) / width).astype(np.intp)
            ok = (b >= 0) & (b < pose.bins_per_head)
            np.add.at(data[:, t], head * pose.bins_per_head + b[ok], 1.0)

    return Sinogram(data=data, schedule=sched)
