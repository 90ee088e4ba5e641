"""Discrete attenuated Radon transform on a 2-D pixel grid.

Builds sparse per-pose projection matrices by exact pixel/ray intersection
(Siddon-style traversal) with exponential attenuation accumulated on the
detector side of each pixel.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

__all__ = [
    "ImageGeometry",
    "CameraPose",
    "AttenuationMap",
    "ProjectorFrame",
    "build_projector",
    "forward",
    "adjoint",
    "ProjectorCache",
]

_EPS = 1e-12


@dataclass(frozen=True)
class ImageGeometry:
    """Rectangular pixel grid, n1 rows by n2 columns, centered at the origin."""

    n1: int
    n2: int
    pixel_size: float = 1.0

    def __post_init__(self):
        if self.n1 < 1 or self.n2 < 1:
            raise ValueError("geometry needs at least one pixel per axis")
        if self.pixel_size <= 0:
            raise ValueError("pixel_size must be positive")

    @property
    def n(self) -> int:
        return self.n1 * self.n2

    @property
    def field_of_view(self) -> tuple[float, float]:
        return (self.n1 * self.pixel_size, self.n2 * self.pixel_size)

    @property
    def diagonal(self) -> float:
        return self.pixel_size * float(np.hypot(self.n1, self.n2))


@dataclass(frozen=True)
class CameraPose:
    """One or more parallel-beam detector heads at fixed angles.

    ``angles`` are in radians in [0, 2pi); for a dual-head camera the two
    entries differ by pi.  ``bin_width`` of ``None`` means "span the image
    diagonal", resolved when the projector is built.
    """

    angles: tuple[float, ...]
    bins_per_head: int
    bin_width: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "angles", tuple(float(a) % (2 * np.pi) for a in self.angles))
        if self.bins_per_head < 1:
            raise ValueError("bins_per_head must be >= 1")
        if self.bin_width is not None and self.bin_width <= 0:
            raise ValueError("bin_width must be positive")

    @property
    def heads(self) -> int:
        return len(self.angles)

    @property
    def total_bins(self) -> int:
        return self.heads * self.bins_per_head


@dataclass(frozen=True)
class AttenuationMap:
    """Nonnegative per-pixel attenuation coefficients (per unit length)."""

    mu: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        if np.any(mu < 0):
            raise ValueError("attenuation coefficients must be nonnegative")
        object.__setattr__(self, "mu", mu)

    @classmethod
    def zero(cls, geom: ImageGeometry) -> "AttenuationMap":
        return cls(np.zeros(geom.n))


@dataclass(frozen=True)
class ProjectorFrame:
    """Sparse attenuated projection matrix for one camera pose.

    Immutable after construction; ``matrix`` is (heads * bins_per_head, n)
    with head blocks stacked head 0 first.
    """

    geom: ImageGeometry
    pose: CameraPose
    matrix: sp.csr_matrix
    bin_width: float
    row_sums: np.ndarray = field(init=False)
    col_sums: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "row_sums", np.asarray(self.matrix.sum(axis=1)).ravel())
        object.__setattr__(self, "col_sums", np.asarray(self.matrix.sum(axis=0)).ravel())

    @property
    def m(self) -> int:
        return self.matrix.shape[0]


def pixel_centers(geom: ImageGeometry):
    """Return (x, y) center coordinates for every pixel, row-major order."""
    h = geom.pixel_size
    j = np.arange(geom.n2)
    i = np.arange(geom.n1)
    x = (j - (geom.n2 - 1) / 2.0) * h
    y = ((geom.n1 - 1) / 2.0 - i) * h
    xx, yy = np.meshgrid(x, y)
    return xx.ravel(), yy.ravel()


def bin_offsets(pose: CameraPose, bin_width: float) -> np.ndarray:
    """Lateral detector-bin center offsets, symmetric about the origin."""
    b = np.arange(pose.bins_per_head)
    return (b - (pose.bins_per_head - 1) / 2.0) * bin_width


def resolve_bin_width(geom: ImageGeometry, pose: CameraPose) -> float:
    if pose.bin_width is not None:
        return pose.bin_width
    return geom.diagonal / pose.bins_per_head


def trace_ray(geom: ImageGeometry, theta: float, s: float):
    """Exact pixel intersections of the ray x(t) = s*e + t*d with the grid.

    d = (cos theta, sin theta) points toward the detector, e = (-sin theta,
    cos theta) is the lateral detector axis.  Returns (pixels, lengths,
    t_mid) sorted by increasing t (i.e. toward the detector).
    """
    h = geom.pixel_size
    half_w = geom.n2 * h / 2.0
    half_h = geom.n1 * h / 2.0
    dx, dy = np.cos(theta), np.sin(theta)
    ox, oy = -s * np.sin(theta), s * np.cos(theta)

    # clip against the grid bounding box
    t_lo, t_hi = -np.inf, np.inf
    for o, d, lo, hi in ((ox, dx, -half_w, half_w), (oy, dy, -half_h, half_h)):
        if abs(d) < _EPS:
            if o < lo or o > hi:
                return (np.empty(0, dtype=np.intp), np.empty(0), np.empty(0))
        else:
            ta, tb = (lo - o) / d, (hi - o) / d
            t_lo = max(t_lo, min(ta, tb))
            t_hi = min(t_hi, max(ta, tb))
    if t_hi - t_lo < _EPS:
        return (np.empty(0, dtype=np.intp), np.empty(0), np.empty(0))

    crossings = [np.array([t_lo, t_hi])]
    if abs(dx) >= _EPS:
        tx = (-half_w + h * np.arange(geom.n2 + 1) - ox) / dx
        crossings.append(tx[(tx > t_lo) & (tx < t_hi)])
    if abs(dy) >= _EPS:
        ty = (-half_h + h * np.arange(geom.n1 + 1) - oy) / dy
        crossings.append(ty[(ty > t_lo) & (ty < t_hi)])
    t = np.unique(np.concatenate(crossings))

    lengths = np.diff(t)
    t_mid = 0.5 * (t[:-1] + t[1:])
    keep = lengths > _EPS * max(1.0, h)
    lengths, t_mid = lengths[keep], t_mid[keep]

    xm = ox + t_mid * dx
    ym = oy + t_mid * dy
    jj = np.floor((xm + half_w) / h).astype(np.intp)
    ii = np.floor((half_h - ym) / h).astype(np.intp)
    inside = (ii >= 0) & (ii < geom.n1) & (jj >= 0) & (jj < geom.n2)
    pixels = ii[inside] * geom.n2 + jj[inside]
    return pixels, lengths[inside], t_mid[inside]


def attenuation_factors(mu: np.ndarray, pixels: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    """exp(-integral of mu) over the ray portion strictly beyond each pixel.

    ``pixels``/``lengths`` must be ordered toward the detector; the suffix
    sum excludes the pixel's own segment.
    """
    contrib = mu[pixels] * lengths
    # suffix sums: attenuation accumulated between pixel center and detector
    suffix = np.concatenate((np.cumsum(contrib[::-1])[::-1][1:], [0.0]))
    return np.exp(-suffix)


def build_projector(geom: ImageGeometry, pose: CameraPose, mu: AttenuationMap) -> ProjectorFrame:
    """Assemble the sparse attenuated projection matrix for one pose."""
    if mu.mu.size != geom.n:
        raise ValueError(f"attenuation map has {mu.mu.size} entries, expected {geom.n}")
    width = resolve_bin_width(geom, pose)
    offsets = bin_offsets(pose, width)

    rows, cols, vals = [], [], []
    for head, theta in enumerate(pose.angles):
        base = head * pose.bins_per_head
        for b, s in enumerate(offsets):
            pixels, lengths, _ = trace_ray(geom, theta, s)
            if pixels.size == 0:
                continue
            att = attenuation_factors(mu.mu, pixels, lengths)
            rows.append(np.full(pixels.size, base + b, dtype=np.intp))
            cols.append(pixels)
            vals.append(lengths * att)

    if rows:
        matrix = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(pose.total_bins, geom.n),
        )
    else:
        matrix = sp.csr_matrix((pose.total_bins, geom.n))
    return ProjectorFrame(geom=geom, pose=pose, matrix=matrix, bin_width=width)


def forward(frame: ProjectorFrame, image: np.ndarray) -> np.ndarray:
    image = np.asarray(image, dtype=float)
    if image.shape != (frame.geom.n,):
        raise ValueError(f"image has shape {image.shape}, expected ({frame.geom.n},)")
    return frame.matrix @ image


def adjoint(frame: ProjectorFrame, sino: np.ndarray) -> np.ndarray:
    sino = np.asarray(sino, dtype=float)
    if sino.shape != (frame.m,):
        raise ValueError(f"sinogram has shape {sino.shape}, expected ({frame.m},)")
    return frame.matrix.T @ sino


class ProjectorCache:
    """Caches ProjectorFrames keyed by pose angles (quantized to 1e-9 rad).

    One cache is tied to a fixed geometry and attenuation map, so repeated
    time steps at the same angle reuse the sparse matrix.
    """

    def __init__(self, geom: ImageGeometry, mu: AttenuationMap | None = None):
        self.geom = geom
        self.mu = mu if mu is not None else AttenuationMap.zero(geom)
        self._frames: dict[tuple, ProjectorFrame] = {}

    def get(self, pose: CameraPose) -> ProjectorFrame:
        key = (
            tuple(int(round(a / 1e-9)) for a in pose.angles),
            pose.bins_per_head,
            pose.bin_width,
        )
        frame = self._frames.get(key)
        if frame is None:
            frame = build_projector(self.geom, pose, self.mu)
            self._frames[key] = frame
        return frame
