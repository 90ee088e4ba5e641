"""Tracer kinetics: compartment-model concentration curves and phantoms.

Concentration curves come from convolving an arterial input with a causal
exponential washout kernel; phantoms pair a hard region partition with one
ground-truth curve per region.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tomo import ImageGeometry, pixel_centers

__all__ = [
    "ArterialInput",
    "ConcentrationMatrix",
    "Phantom",
    "basis_curve",
    "make_phantom",
    "render_frames",
    "PHANTOM_PRESETS",
]


@dataclass(frozen=True)
class ArterialInput:
    """Sampled blood concentration C_A(t) on a uniform grid of spacing dt."""

    samples: np.ndarray
    dt: float

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if np.any(samples < 0):
            raise ValueError("arterial input must be nonnegative")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        object.__setattr__(self, "samples", samples)

    @classmethod
    def bolus(cls, M: int, dt: float = 1.0, peak_time: float = 8.0, amplitude: float = 1.0):
        """Gamma-variate style bolus t*exp(1 - t/peak_time), peaking at amplitude."""
        t = np.arange(M) * dt
        return cls(amplitude * (t / peak_time) * np.exp(1.0 - t / peak_time), dt)


@dataclass(frozen=True)
class ConcentrationMatrix:
    """Per-region tracer concentration over time; values is M x K."""

    values: np.ndarray
    dt: float = 1.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError("concentration values must be an M x K matrix")
        if np.any(values < 0):
            raise ValueError("concentrations must be nonnegative")
        object.__setattr__(self, "values", values)

    @property
    def M(self) -> int:
        return self.values.shape[0]

    @property
    def K(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class Phantom:
    """Ground truth: region partition of the grid plus one curve per region."""

    geom: ImageGeometry
    region_map: np.ndarray
    curves: ConcentrationMatrix
    name: str = ""

    def __post_init__(self):
        region_map = np.asarray(self.region_map)
        if region_map.shape != (self.geom.n,):
            raise ValueError("region map must have one entry per pixel")
        if region_map.min() < 0 or region_map.max() >= self.curves.K:
            raise ValueError("region indices out of range for the curve matrix")
        object.__setattr__(self, "region_map", region_map.astype(np.intp))

    @property
    def K(self) -> int:
        return self.curves.K

    @property
    def M(self) -> int:
        return self.curves.M

    def one_hot(self) -> np.ndarray:
        """n x K hard label matrix."""
        U = np.zeros((self.geom.n, self.K))
        U[np.arange(self.geom.n), self.region_map] = 1.0
        return U


def basis_curve(inp: ArterialInput, rate: float) -> np.ndarray:
    """Tissue curve c(t) = int_0^t C_A(tau) exp(-rate (t - tau)) dtau.

    Trapezoidal quadrature on the sample grid, evaluated recursively so the
    whole curve costs O(M).  c(0) = 0.
    """
    if rate < 0:
        raise ValueError("washout rate must be nonnegative")
    ca, dt = inp.samples, inp.dt
    decay = np.exp(-rate * dt)
    out = np.zeros_like(ca)
    for j in range(1, ca.size):
        out[j] = decay * out[j - 1] + 0.5 * dt * (ca[j] + decay * ca[j - 1])
    return out


def _disc(xx, yy, cx, cy, r):
    return (xx - cx) ** 2 + (yy - cy) ** 2 <= r**2


def _heart(xx, yy, cx, cy, scale):
    # classic implicit heart curve (x^2 + y^2 - 1)^3 - x^2 y^3 <= 0
    x = (xx - cx) / scale
    y = (yy - cy) / scale
    return (x**2 + y**2 - 1.0) ** 3 - (x**2) * (y**3) <= 0.0


def _heart_circles_regions(geom: ImageGeometry) -> np.ndarray:
    """Heart + large circle partly behind it + two small circles, K = 4."""
    xx, yy = pixel_centers(geom)
    w, hgt = geom.n2 * geom.pixel_size, geom.n1 * geom.pixel_size
    r = np.zeros(geom.n, dtype=np.intp)
    # region 1: circle partly hidden behind the heart
    r[_disc(xx, yy, -0.18 * w, 0.16 * hgt, 0.14 * w)] = 1
    # region 2: two small circles sharing one tissue type
    r[_disc(xx, yy, 0.30 * w, 0.28 * hgt, 0.08 * w)] = 2
    r[_disc(xx, yy, 0.30 * w, -0.28 * hgt, 0.08 * w)] = 2
    # region 3: heart drawn last so it occludes the large circle
    r[_heart(xx, yy, 0.0, -0.05 * hgt, 0.22 * w)] = 3
    return r


def _heart_simple_regions(geom: ImageGeometry) -> np.ndarray:
    """Heart + one circle on background, K = 3."""
    xx, yy = pixel_centers(geom)
    w, hgt = geom.n2 * geom.pixel_size, geom.n1 * geom.pixel_size
    r = np.zeros(geom.n, dtype=np.intp)
    r[_disc(xx, yy, 0.26 * w, 0.22 * hgt, 0.13 * w)] = 1
    r[_heart(xx, yy, 0.06 * w, -0.08 * hgt, 0.24 * w)] = 2
    return r


def _rat_liver_regions(geom: ImageGeometry) -> np.ndarray:
    """Nested structure: body, ring-shaped liver, liver interior; K = 4."""
    xx, yy = pixel_centers(geom)
    w = min(geom.n1, geom.n2) * geom.pixel_size
    r = np.zeros(geom.n, dtype=np.intp)
    body = ((xx / (0.42 * w)) ** 2 + (yy / (0.36 * w)) ** 2) <= 1.0
    r[body] = 1
    outer = _disc(xx, yy, 0.05 * w, -0.02 * w, 0.24 * w)
    inner = _disc(xx, yy, 0.05 * w, -0.02 * w, 0.13 * w)
    r[outer & ~inner] = 2
    r[inner] = 3
    return r


def _mc_circles_regions(geom: ImageGeometry) -> np.ndarray:
    """Outer circle with two inner circles, K = 3."""
    xx, yy = pixel_centers(geom)
    w = min(geom.n1, geom.n2) * geom.pixel_size
    r = np.zeros(geom.n, dtype=np.intp)
    r[_disc(xx, yy, 0.0, 0.0, 0.40 * w)] = 1
    r[_disc(xx, yy, -0.15 * w, 0.10 * w, 0.12 * w)] = 2
    r[_disc(xx, yy, 0.16 * w, -0.14 * w, 0.10 * w)] = 2
    return r


# per-preset (region builder, washout rate + amplitude per non-background
# region, background level); rates give one fast and one slow curve each
PHANTOM_PRESETS = {
    "heart_circles": (_heart_circles_regions, [(0.30, 1.6), (0.05, 1.0), (0.12, 2.0)], 0.15),
    "heart_simple": (_heart_simple_regions, [(0.45, 2.5), (0.0, 2.5)], 0.10),
    "rat_liver_like": (_rat_liver_regions, [(0.25, 1.2), (0.04, 1.8), (0.12, 2.2)], 0.10),
    "mc_circles": (_mc_circles_regions, [(0.20, 1.4), (0.06, 2.2)], 0.12),
}


def make_phantom(preset: str, geom: ImageGeometry, M: int, dt: float = 1.0) -> Phantom:
    """Build a named phantom with physiologically shaped regional curves."""
    if preset not in PHANTOM_PRESETS:
        raise ValueError(f"unknown phantom preset {preset!r}; have {sorted(PHANTOM_PRESETS)}")
    builder, region_params, background = PHANTOM_PRESETS[preset]
    region_map = builder(geom)

    inp = ArterialInput.bolus(M, dt=dt, peak_time=max(4.0, 0.1 * M * dt))
    K = len(region_params) + 1
    curves = np.zeros((M, K))
    curves[:, 0] = background
    for k, (rate, amplitude) in enumerate(region_params, start=1):
        c = basis_curve(inp, rate)
        peak = c.max()
        if peak > 0:
            c = c * (amplitude / peak)
        curves[:, k] = c
    return Phantom(geom=geom, region_map=region_map,
                   curves=ConcentrationMatrix(curves, dt=dt), name=preset)


def render_frames(ph: Phantom) -> np.ndarray:
    """Dynamic image as an n x M matrix; column t is the frame at time t."""
    return ph.curves.values[:, ph.region_map].T
