import numpy as np
import pytest

from dynspect.kinetics import (
    ArterialInput,
    ConcentrationMatrix,
    Phantom,
    basis_curve,
    make_phantom,
    render_frames,
)
from dynspect.tomo import ImageGeometry

from oracles import trapezoid_convolution


def constant_input(M, dt):
    return ArterialInput(np.ones(M), dt)


def test_basis_curve_zero_rate_integrates_input():
    # constant input, zero washout: curve is exactly t on the grid
    inp = constant_input(50, 0.1)
    t = np.arange(50) * 0.1
    assert np.allclose(basis_curve(inp, 0.0), t, atol=1e-12)


def test_basis_curve_matches_analytic_exponential():
    dt = 1e-3
    M = 3000
    inp = constant_input(M, dt)
    t = np.arange(M) * dt
    got = basis_curve(inp, 2.0)
    want = (1.0 - np.exp(-2.0 * t)) / 2.0
    err = np.abs(got[1:] - want[1:]) / want[1:]
    assert err.max() <= 1e-4


def test_basis_curve_matches_refined_quadrature():
    dt = 0.01
    t = np.arange(500) * dt
    ca = 1.0 + 0.5 * np.sin(3.0 * t) + 0.3 * t * np.exp(-t)
    inp = ArterialInput(ca, dt)
    got = basis_curve(inp, 5.0)
    want = trapezoid_convolution(ca, dt, 5.0, oversample=10)
    rel = np.abs(got[1:] - want[1:]) / np.maximum(np.abs(want[1:]), 1e-12)
    assert rel.max() <= 1e-3


def test_basis_curve_starts_at_zero_and_rejects_negative_rate():
    inp = constant_input(10, 1.0)
    assert basis_curve(inp, 3.0)[0] == 0.0
    with pytest.raises(ValueError):
        basis_curve(inp, -0.1)


def test_basis_curve_monotone_and_bounded():
    M, dt = 4000, 0.1
    inp = ArterialInput(np.full(M, 2.0), dt)
    flat = basis_curve(inp, 0.0)
    assert np.all(np.diff(flat) >= 0)
    rate = 0.5
    decayed = basis_curve(inp, rate)
    bound = 2.0 / rate
    # discrete trapezoid fixed point overshoots by O((rate*dt)^2)
    assert decayed.max() <= bound * (1.0 + (rate * 0.1) ** 2 / 6.0)
    # approaches the asymptote at large t
    assert decayed[-1] >= 0.99 * bound


def test_heart_circles_has_four_regions():
    ph = make_phantom("heart_circles", ImageGeometry(64, 64), 90)
    assert len(np.unique(ph.region_map)) == 4
    assert ph.curves.values.shape == (90, 4)


def test_mc_circles_has_three_regions():
    ph = make_phantom("mc_circles", ImageGeometry(129, 129), 90)
    assert len(np.unique(ph.region_map)) == 3


@pytest.mark.parametrize("preset", ["heart_circles", "heart_simple", "rat_liver_like", "mc_circles"])
def test_phantom_partition_covers_grid(preset):
    geom = ImageGeometry(48, 48)
    ph = make_phantom(preset, geom, 30)
    counts = np.bincount(ph.region_map, minlength=ph.K)
    assert counts.sum() == geom.n
    assert np.all(counts > 0)
    assert np.all(ph.curves.values >= 0)


def test_unknown_preset_rejected():
    with pytest.raises(ValueError):
        make_phantom("nope", ImageGeometry(16, 16), 10)


def test_render_frames_single_region_constant_columns():
    geom = ImageGeometry(6, 6)
    curves = ConcentrationMatrix(np.linspace(0, 1, 12).reshape(12, 1) + 0.5)
    ph = Phantom(geom=geom, region_map=np.zeros(geom.n, dtype=int), curves=curves)
    frames = render_frames(ph)
    assert frames.shape == (geom.n, 12)
    for t in range(12):
        assert np.all(frames[:, t] == curves.values[t, 0])


def test_render_frames_zero_curves():
    geom = ImageGeometry(5, 5)
    curves = ConcentrationMatrix(np.zeros((7, 2)))
    region = (np.arange(geom.n) % 2).astype(int)
    ph = Phantom(geom=geom, region_map=region, curves=curves)
    assert np.all(render_frames(ph) == 0)


def test_render_frames_matches_lookup_and_one_hot():
    ph = make_phantom("heart_circles", ImageGeometry(32, 32), 20)
    frames = render_frames(ph)
    for p in np.random.default_rng(0).integers(0, ph.geom.n, size=50):
        for t in (0, 7, 19):
            assert frames[p, t] == ph.curves.values[t, ph.region_map[p]]
    assert np.array_equal(frames, ph.one_hot() @ ph.curves.values.T)
