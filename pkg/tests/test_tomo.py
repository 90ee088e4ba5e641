import numpy as np
import pytest

from dynspect.tomo import (
    AttenuationMap,
    CameraPose,
    ImageGeometry,
    ProjectorCache,
    adjoint,
    bin_offsets,
    build_projector,
    forward,
    resolve_bin_width,
)

from oracles import dense_projector


def test_invalid_geometry_rejected():
    with pytest.raises(ValueError):
        ImageGeometry(0, 8)
    with pytest.raises(ValueError):
        ImageGeometry(8, 8, pixel_size=0.0)


def test_zero_attenuation_gives_pure_lengths():
    geom = ImageGeometry(8, 8)
    pose = CameraPose(angles=(0.7,), bins_per_head=11)
    plain = build_projector(geom, pose, AttenuationMap.zero(geom))
    again = build_projector(geom, pose, AttenuationMap(np.zeros(geom.n)))
    assert (plain.matrix != again.matrix).nnz == 0
    # weights are intersection lengths, bounded by the pixel diagonal
    assert plain.matrix.data.max() <= np.sqrt(2.0) + 1e-12
    assert plain.matrix.data.min() > 0


def test_zero_image_projects_to_zero():
    geom = ImageGeometry(8, 8)
    frame = build_projector(geom, CameraPose(angles=(0.0,), bins_per_head=8),
                            AttenuationMap.zero(geom))
    assert np.all(forward(frame, np.zeros(geom.n)) == 0)


def test_single_pixel_column_matches_dense_oracle():
    geom = ImageGeometry(8, 8)
    pose = CameraPose(angles=(0.3,), bins_per_head=12)
    mu = AttenuationMap(np.linspace(0.0, 0.1, geom.n))
    frame = build_projector(geom, pose, mu)
    offsets = bin_offsets(pose, resolve_bin_width(geom, pose))
    dense = dense_projector(geom, pose.angles[0], offsets, mu.mu)
    p = 3 * 8 + 4  # single unit pixel
    image = np.zeros(geom.n)
    image[p] = 1.0
    assert np.allclose(forward(frame, image), dense[:, p], atol=1e-12)


@pytest.mark.parametrize("theta", [0.0, np.pi / 2, 0.41, 2.1, 5.6])
def test_full_matrix_matches_dense_oracle(theta):
    geom = ImageGeometry(6, 5, pixel_size=0.8)
    pose = CameraPose(angles=(theta,), bins_per_head=9)
    rng = np.random.default_rng(3)
    mu = AttenuationMap(0.2 * rng.random(geom.n))
    frame = build_projector(geom, pose, mu)
    offsets = bin_offsets(pose, resolve_bin_width(geom, pose))
    dense = dense_projector(geom, theta, offsets, mu.mu)
    assert np.allclose(frame.matrix.toarray(), dense, atol=1e-10)


def test_forward_matches_dense_product():
    geom = ImageGeometry(16, 16)
    rng = np.random.default_rng(0)
    mu = AttenuationMap(0.05 * rng.random(geom.n))
    image = rng.random(geom.n)
    for theta in (0.0, 0.9, 2.3, 4.0):
        pose = CameraPose(angles=(theta,), bins_per_head=23)
        frame = build_projector(geom, pose, mu)
        dense = frame.matrix.toarray()
        got = forward(frame, image)
        assert np.linalg.norm(got - dense @ image) <= 1e-12 * max(1.0, np.linalg.norm(got))
        assert np.all(got >= 0)


def test_adjoint_identity_random_probes():
    geom = ImageGeometry(12, 12)
    pose = CameraPose(angles=(1.1, 1.1 + np.pi), bins_per_head=17)
    mu = AttenuationMap(np.full(geom.n, 0.03))
    frame = build_projector(geom, pose, mu)
    rng = np.random.default_rng(7)
    for _ in range(100):
        x = rng.standard_normal(geom.n)
        y = rng.standard_normal(frame.m)
        lhs = np.dot(forward(frame, x), y)
        rhs = np.dot(x, adjoint(frame, y))
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(rhs))


def test_adjoint_single_entry_is_matrix_column():
    geom = ImageGeometry(8, 8)
    pose = CameraPose(angles=(0.5,), bins_per_head=10)
    frame = build_projector(geom, pose, AttenuationMap.zero(geom))
    y = np.zeros(frame.m)
    y[4] = 1.0
    assert np.allclose(adjoint(frame, y), frame.matrix.toarray()[4], atol=1e-14)
    assert np.all(adjoint(frame, np.zeros(frame.m)) == 0)


def test_monotone_attenuation():
    geom = ImageGeometry(8, 8)
    pose = CameraPose(angles=(0.2,), bins_per_head=11)
    rng = np.random.default_rng(5)
    mu = 0.1 * rng.random(geom.n)
    base = build_projector(geom, pose, AttenuationMap(mu)).matrix.toarray()
    for p in rng.integers(0, geom.n, size=5):
        bumped = mu.copy()
        bumped[p] += 0.5
        other = build_projector(geom, pose, AttenuationMap(bumped)).matrix.toarray()
        assert np.all(other <= base + 1e-14)


def test_dimension_mismatch_errors():
    geom = ImageGeometry(4, 4)
    frame = build_projector(geom, CameraPose(angles=(0.0,), bins_per_head=4),
                            AttenuationMap.zero(geom))
    with pytest.raises(ValueError):
        forward(frame, np.zeros(5))
    with pytest.raises(ValueError):
        adjoint(frame, np.zeros(frame.m + 1))
    with pytest.raises(ValueError):
        build_projector(geom, CameraPose(angles=(0.0,), bins_per_head=4),
                        AttenuationMap(np.zeros(3)))


def test_projector_cache_reuses_frames():
    geom = ImageGeometry(8, 8)
    cache = ProjectorCache(geom)
    a = cache.get(CameraPose(angles=(0.25,), bins_per_head=9))
    b = cache.get(CameraPose(angles=(0.25,), bins_per_head=9))
    c = cache.get(CameraPose(angles=(0.26,), bins_per_head=9))
    assert a is b and a is not c
