import numpy as np
import pytest

from dynspect.kinetics import make_phantom
from dynspect.sim import schedule_preset, simulate_clean
from dynspect.tomo import ImageGeometry, ProjectorCache
from dynspect.varmodel import (
    BilinearOperator,
    LabelField,
    ObjectiveParams,
    div_image,
    grad_image,
    grad_time,
    grad_time_adjoint,
    kl,
    objective,
    tv_aniso,
)


def small_operator(n1=8, n2=8, M=3, bins=11):
    geom = ImageGeometry(n1, n2)
    sched = schedule_preset("rotate2", M, bins)
    return BilinearOperator(sched, geom), geom, sched


def dense_A(op, C):
    """Explicit block matrix [C(t,1) R_t ... C(t,K) R_t] stacked over t."""
    n, K, M = op.geom.n, C.shape[1], op.schedule.M
    m = op.schedule.m
    A = np.zeros((m * M, n * K))
    for t, frame in enumerate(op.frames):
        R = frame.matrix.toarray()
        for k in range(K):
            A[t * m:(t + 1) * m, k * n:(k + 1) * n] = C[t, k] * R
    return A


class TestKL:
    def test_identity_is_zero(self):
        rng = np.random.default_rng(0)
        g = rng.random((20, 5)) + 0.1
        assert kl(g, g) == pytest.approx(0.0, abs=1e-12)

    def test_scalar_value(self):
        assert kl(np.array([2.0]), np.array([1.0])) == pytest.approx(1.0 - np.log(2.0), abs=1e-12)

    def test_zero_data_convention(self):
        p = np.array([0.5, 2.0, 0.0])
        assert kl(p, np.zeros(3)) == pytest.approx(p.sum())

    def test_nonnegative_on_random_pairs(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            p = rng.random(50) * 10
            g = rng.random(50) * 10
            assert kl(p, g) >= -1e-10

    def test_midpoint_convexity(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            g = rng.random(20) + 0.5
            p1 = rng.random(20) + 0.5
            p2 = rng.random(20) + 0.5
            mid = kl(0.5 * (p1 + p2), g)
            assert mid <= 0.5 * (kl(p1, g) + kl(p2, g)) + 1e-10

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            kl(np.array([-1.0]), np.array([1.0]))


class TestBilinear:
    def test_K1_constant_curve_reduces_to_projection(self):
        op, geom, sched = small_operator()
        U = np.random.default_rng(0).random((geom.n, 1))
        C = np.ones((sched.M, 1))
        out = op.apply_A(U, C)
        for t, frame in enumerate(op.frames):
            assert np.allclose(out[:, t], frame.matrix @ U[:, 0])

    def test_zero_curves_zero_output(self):
        op, geom, sched = small_operator()
        U = np.random.default_rng(1).random((geom.n, 3))
        assert np.all(op.apply_A(U, np.zeros((sched.M, 3))) == 0)

    def test_apply_A_matches_dense_block_matrix(self):
        op, geom, sched = small_operator(8, 8, 3)
        rng = np.random.default_rng(2)
        U = rng.random((geom.n, 2))
        C = rng.random((sched.M, 2))
        got = op.apply_A(U, C)
        want = (dense_A(op, C) @ U.T.ravel()).reshape(sched.M, sched.m).T
        assert np.allclose(got, want, rtol=1e-12, atol=1e-12)

    def test_A_adjoint_identity(self):
        op, geom, sched = small_operator()
        rng = np.random.default_rng(3)
        C = rng.random((sched.M, 3))
        for _ in range(100):
            U = rng.standard_normal((geom.n, 3))
            y = rng.standard_normal((sched.m, sched.M))
            lhs = np.sum(op.apply_A(U, C) * y)
            rhs = np.sum(U * op.apply_A_adjoint(y, C))
            assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(rhs))

    def test_B_adjoint_identity(self):
        op, geom, sched = small_operator()
        rng = np.random.default_rng(4)
        U = rng.random((geom.n, 3))
        for _ in range(100):
            Ct = rng.standard_normal((3, sched.M))
            y = rng.standard_normal((sched.m, sched.M))
            lhs = np.sum(op.apply_B(Ct, U) * y)
            rhs = np.sum(Ct * op.apply_B_adjoint(y, U))
            assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(rhs))

    def test_A_equals_B_on_shared_factors(self):
        op, geom, sched = small_operator()
        rng = np.random.default_rng(5)
        U = rng.random((geom.n, 2))
        C = rng.random((sched.M, 2))
        assert np.allclose(op.apply_A(U, C), op.apply_B(C.T, U), atol=1e-12)

    def test_sensitivity_matches_dense_oracle(self):
        op, geom, sched = small_operator(8, 8, 3)
        rng = np.random.default_rng(6)
        C = rng.random((sched.M, 2))
        sens = op.sensitivity_A(C)
        want = (dense_A(op, C).T @ np.ones(sched.m * sched.M)).reshape(2, geom.n).T
        assert np.allclose(sens, want, atol=1e-12)

    def test_dimension_mismatch(self):
        op, geom, sched = small_operator()
        with pytest.raises(ValueError):
            op.apply_A(np.zeros((geom.n + 1, 2)), np.zeros((sched.M, 2)))


class TestTV:
    def test_constant_field_zero(self):
        assert tv_aniso(np.full(16, 3.0), 4, 4) == 0.0

    def test_single_interior_pixel(self):
        u = np.zeros((5, 5))
        u[2, 2] = 1.0
        # 4 nonzero forward differences touch an interior unit pixel
        assert tv_aniso(u.ravel(), 5, 5) == 4.0

    def test_vertical_split(self):
        u = np.zeros((4, 4))
        u[:, 2:] = 1.0
        assert tv_aniso(u.ravel(), 4, 4) == 4.0

    def test_grad_div_adjoint(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            u = rng.standard_normal(6 * 7)
            g = rng.standard_normal((2, 6 * 7))
            lhs = np.sum(grad_image(u, 6, 7) * g)
            rhs = -np.sum(u * div_image(g, 6, 7))
            assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(rhs))

    def test_grad_time_adjoint(self):
        rng = np.random.default_rng(8)
        Ct = rng.standard_normal((3, 9))
        d = rng.standard_normal((3, 8))
        lhs = np.sum(grad_time(Ct) * d)
        rhs = np.sum(Ct * grad_time_adjoint(d))
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(rhs))


class TestObjective:
    def test_consistent_data_kl_vanishes(self):
        ph = make_phantom("heart_circles", ImageGeometry(16, 16), 6)
        sched = schedule_preset("rotate2", 6, 23)
        g = simulate_clean(ph, sched).data
        op = BilinearOperator(sched, ph.geom)
        terms = objective(ph.one_hot(), ph.curves.values, g,
                          ObjectiveParams(alpha=0.1, beta=0.1, delta=0.1), op)
        assert terms["kl"] <= 1e-9 * g.sum()

    def test_zero_weights_objective_is_kl(self):
        ph = make_phantom("heart_circles", ImageGeometry(16, 16), 4)
        sched = schedule_preset("rotate2", 4, 23)
        g = simulate_clean(ph, sched).data
        op = BilinearOperator(sched, ph.geom)
        U = ph.one_hot()
        C = ph.curves.values + 0.2
        terms = objective(U, C, g, ObjectiveParams(), op)
        assert terms["total"] == pytest.approx(terms["kl"])

    def test_l1_term_constant_on_simplex(self):
        ph = make_phantom("heart_circles", ImageGeometry(16, 16), 4)
        sched = schedule_preset("rotate2", 4, 23)
        g = simulate_clean(ph, sched).data
        op = BilinearOperator(sched, ph.geom)
        beta = 0.37
        terms = objective(ph.one_hot(), ph.curves.values, g,
                          ObjectiveParams(beta=beta), op)
        assert terms["l1"] == pytest.approx(beta * ph.geom.n)


def test_label_field_validation():
    ok = np.full((10, 4), 0.25)
    LabelField(ok)
    with pytest.raises(ValueError):
        LabelField(ok * 1.5)


def test_objective_params_validation():
    with pytest.raises(ValueError):
        ObjectiveParams(alpha=-1.0)
    with pytest.raises(ValueError):
        ObjectiveParams(kl_floor=0.0)
