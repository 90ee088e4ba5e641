import numpy as np
import pytest

from dynspect.kinetics import make_phantom
from dynspect.metrics import evaluate, image_error, segmentation_accuracy, sweep
from dynspect.recon import SolverConfig
from dynspect.sim import poissonize, schedule_preset, simulate_clean
from dynspect.tomo import ImageGeometry
from dynspect.varmodel import ObjectiveParams


@pytest.fixture(scope="module")
def heart():
    return make_phantom("heart_simple", ImageGeometry(16, 16), 8)


class TestImageError:
    def test_ground_truth_is_zero(self, heart):
        assert image_error(heart.one_hot(), heart.curves.values, heart) == 0.0

    def test_constant_offset_closed_form(self, heart):
        C = heart.curves.values.copy()
        c0 = 0.37
        C[:, 1] += c0
        size = int(np.sum(heart.region_map == 1))
        want = c0 * np.sqrt(size * heart.M) / (heart.geom.n * heart.M)
        got = image_error(heart.one_hot(), C, heart)
        assert got == pytest.approx(want, rel=1e-12)

    def test_invariant_under_column_permutation(self, heart):
        U = heart.one_hot() * 0.9 + 0.05
        C = heart.curves.values + 0.1
        perm = [2, 0, 1]
        assert image_error(U, C, heart) == pytest.approx(
            image_error(U[:, perm], C[:, perm], heart), rel=1e-12)


class TestSegmentationAccuracy:
    def test_one_hot_truth(self, heart):
        rate, perm = segmentation_accuracy(heart.one_hot(), heart)
        assert rate == 1.0
        assert perm == (0, 1, 2)

    def test_permuted_truth_still_perfect(self, heart):
        perm = [1, 2, 0]
        rate, _ = segmentation_accuracy(heart.one_hot()[:, perm], heart)
        assert rate == 1.0

    def test_one_flipped_pixel(self):
        ph = make_phantom("heart_circles", ImageGeometry(64, 64), 4)
        U = ph.one_hot()
        p = 100
        U[p] = 0.0
        U[p, (ph.region_map[p] + 1) % ph.K] = 1.0
        rate, _ = segmentation_accuracy(U, ph)
        assert rate == pytest.approx(4095 / 4096)

    def test_mismatched_K_rejected(self, heart):
        with pytest.raises(ValueError):
            segmentation_accuracy(np.ones((heart.geom.n, 5)) / 5, heart)


class TestEvaluate:
    def test_report_on_ground_truth(self, heart):
        rep = evaluate(heart.one_hot(), heart.curves.values, heart)
        assert rep.l2_per_pixel_per_step == 0.0
        assert rep.misclassification_rate == 0.0
        assert np.allclose(rep.per_region_curve_rmse, 0.0)


class TestSweep:
    def make_data(self, noisy=False):
        ph = make_phantom("heart_simple", ImageGeometry(12, 12), 6)
        g = simulate_clean(ph, schedule_preset("rotate2", 6, 17))
        if noisy:
            total = g.data.sum() / 6
            g = poissonize(g, 300.0 / total, seed=1)
        return ph, g

    def test_single_point_grid(self):
        ph, g = self.make_data()
        cfg = SolverConfig(outer_max=3, inner_max=50,
                           params=ObjectiveParams(beta=0.05, delta=0.1))
        rows = sweep("alpha", [0.1], g, ph.geom, 3, cfg, ph)
        assert len(rows) == 1
        assert rows[0][0] == 0.1

    def test_deterministic(self):
        ph, g = self.make_data()
        cfg = SolverConfig(outer_max=3, inner_max=50, seed=4)
        a = sweep("delta", [0.0, 0.5], g, ph.geom, 3, cfg, ph)
        b = sweep("delta", [0.0, 0.5], g, ph.geom, 3, cfg, ph)
        assert a == b

    def test_unknown_parameter(self):
        ph, g = self.make_data()
        with pytest.raises(ValueError):
            sweep("gamma", [0.1], g, ph.geom, 3, SolverConfig(), ph)
