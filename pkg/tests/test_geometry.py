import math

import numpy as np
import pytest

from sparsebench import geometry
from sparsebench.ensembles import (
    SparseSignalSpec,
    dft_matrix,
    realify,
    sample_gaussian,
    sample_sparse_signal,
)
from sparsebench.errors import ParameterError, RankDeficientError, ValidationError
from sparsebench.geometry import ConeSpec
from sparsebench.numerics import RngStream
from sparsebench.recovery import basis_pursuit, verify_recovery


class TestCone:
    def test_from_signal(self):
        cone = ConeSpec.from_signal(np.array([1.0, 0.0, -2.0, 0.0]))
        assert cone.t_plus == (0,)
        assert cone.t_minus == (2,)
        assert cone.support == (0, 2)
        assert cone.complement.tolist() == [1, 3]
        assert cone.signs().tolist() == [-1.0, 0.0, 1.0, 0.0]

    def test_overlap(self):
        with pytest.raises(ParameterError):
            ConeSpec((0, 1), (1,), 3)

    def test_contains(self):
        cone = ConeSpec((0,), (), 2)
        assert geometry.cone_contains(cone, np.array([1.0, 0.0]))
        assert geometry.cone_contains(cone, np.array([-1.0, 1.0])) is False
        assert geometry.cone_functional(cone, np.array([-1.0, 1.0])) == pytest.approx(2.0)

    def test_positive_homogeneity(self):
        rng = np.random.default_rng(0)
        cone = ConeSpec((1, 4), (2,), 8)
        for _ in range(50):
            t = rng.standard_normal(8)
            if geometry.cone_contains(cone, t):
                for lam in (0.1, 3.0, 1e3):
                    assert geometry.cone_contains(cone, lam * t)


class TestDNorm:
    def test_example(self):
        assert geometry.d_norm(np.full(4, 0.5), 2) == pytest.approx(math.sqrt(2))

    def test_r_equals_n_is_l2(self):
        x = np.array([3.0, -4.0, 0.0])
        assert geometry.d_norm(x, 3) == pytest.approx(5.0)

    def test_r_one_is_l1(self):
        x = np.array([3.0, -4.0, 0.5])
        assert geometry.d_norm(x, 1) == pytest.approx(7.5)

    def test_norm_properties(self):
        rng = np.random.default_rng(1)
        n, r = 12, 3
        for _ in range(50):
            x, y = rng.standard_normal(n), rng.standard_normal(n)
            a = rng.standard_normal()
            assert geometry.d_norm(a * x, r) == pytest.approx(abs(a) * geometry.d_norm(x, r))
            assert geometry.d_norm(x + y, r) <= geometry.d_norm(x, r) + geometry.d_norm(y, r) + 1e-10
            l2 = np.linalg.norm(x)
            assert geometry.d_norm(x, r) >= l2 - 1e-10
            assert geometry.d_norm(x, r) <= math.sqrt(n / r) * l2 * (1 + 1e-10)

    def test_invalid_r(self):
        with pytest.raises(ParameterError):
            geometry.d_norm(np.ones(3), 4)


class TestConeSphere:
    @pytest.mark.parametrize(
        "points, n", [(200, 32), pytest.param(10_000, 32, marks=pytest.mark.slow)]
    )
    def test_inclusion(self, points, n):
        stream = RngStream(3)
        worst = 0.0
        for i in range(points):
            f = sample_sparse_signal(SparseSignalSpec(n, 3, "gaussian"), stream.child("f", i))
            x = geometry.sample_cone_sphere(f, stream.child("x", i))
            assert np.linalg.norm(x) == pytest.approx(1.0)
            assert geometry.cone_contains(ConeSpec.from_signal(f.values), x)
            worst = max(worst, geometry.d_norm(x, 3))
        assert worst <= math.sqrt(2) + 1 + 1e-9

    def test_zero_signal(self):
        with pytest.raises(ParameterError):
            geometry.sample_cone_sphere(np.zeros(4), 0)


class TestWidth:
    @pytest.mark.parametrize(
        "n, r, expected",
        [(256, 4, 6.7284), (1024, 2, math.sqrt(4 * (1.5 + math.log(512))))],
    )
    def test_bound(self, n, r, expected):
        assert geometry.gaussian_width_D_bound(n, r) == pytest.approx(expected, abs=1e-4)

    @pytest.mark.parametrize(
        "n, r", [(64, 2), (256, 4), pytest.param(1024, 8, marks=pytest.mark.slow)]
    )
    def test_mc_below_bound(self, n, r):
        estimate = geometry.gaussian_width_D_mc(n, r, 100_000, RngStream(5))
        assert estimate.samples == 100_000
        assert estimate.mean <= estimate.bound + 3 * estimate.stderr
        assert estimate.mean >= 0.5 * estimate.bound

    @pytest.mark.parametrize(
        "n, r, expected", [(1, 1, math.sqrt(2 / math.pi)), (2, 2, math.sqrt(math.pi / 2))]
    )
    def test_mc_closed_forms(self, n, r, expected):
        estimate = geometry.gaussian_width_D_mc(n, r, 100_000, RngStream(9))
        assert abs(estimate.mean - expected) <= 3 * estimate.stderr

    def test_mc_reproducible(self):
        a = geometry.gaussian_width_D_mc(32, 2, 1000, 7)
        b = geometry.gaussian_width_D_mc(32, 2, 1000, 7)
        assert a == b

    def test_batches_do_not_matter_for_count(self):
        estimate = geometry.gaussian_width_D_mc(32, 2, 1500, 0, batch=400)
        assert estimate.samples == 1500

    def test_too_few_samples(self):
        with pytest.raises(ParameterError):
            geometry.gaussian_width_D_mc(32, 2, 999)

    def test_surrogate_is_scaled(self):
        base = geometry.gaussian_width_D_mc(32, 2, 1000, 2)
        cone = geometry.width_surrogate_cone(32, 2, 1000, 2)
        assert cone.mean == pytest.approx(base.mean * geometry.INCLUSION_CONSTANT)
        assert cone.bound == pytest.approx(base.bound * geometry.INCLUSION_CONSTANT)


class TestSampleComplexity:
    @pytest.mark.parametrize("r, n, expected", [(2, 1024, 180.41), (4, 4096, 393.13)])
    def test_values(self, r, n, expected):
        assert geometry.sample_complexity_gaussian(r, n) == pytest.approx(expected, abs=0.01)

    def test_monotone(self):
        values = [geometry.sample_complexity_gaussian(4, n) for n in (64, 128, 256)]
        assert values == sorted(values)

    def test_invalid(self):
        with pytest.raises(ParameterError):
            geometry.sample_complexity_gaussian(5, 4)


class TestProbability:
    def test_gordon(self):
        bound = geometry.gordon_escape_probability(100, 5.0)
        assert not bound.vacuous
        assert float(bound) == pytest.approx(0.10295, abs=1e-5)

    def test_gordon_vacuous(self):
        bound = geometry.gordon_escape_probability(4, 10.0)
        assert bound.vacuous
        assert bound.value == 0.0

    def test_gordon_clamped(self):
        assert 0.0 <= geometry.gordon_escape_probability(10, 2.0).value <= 1.0

    def test_recovery(self):
        bound = geometry.recovery_probability_bound(800, 2, 1024)
        assert bound.value == pytest.approx(0.999983, abs=1e-6)

    def test_recovery_vacuous(self, log_messages):
        bound = geometry.recovery_probability_bound(180, 2, 1024)
        assert bound.vacuous and bound.value == 0.0
        assert any(r["level"].name == "WARNING" for r in log_messages)

    def test_recovery_monotone(self):
        values = [geometry.recovery_probability_bound(k, 2, 1024).value for k in range(200, 900, 50)]
        assert values == sorted(values)


class TestConeKernel:
    def test_identity(self):
        assert geometry.cone_kernel_intersect(np.eye(3), np.array([1.0, 0.0, 0.0])) is False

    def test_degenerate_touching(self, log_messages):
        result = geometry.cone_kernel_test(np.array([[1.0, -1.0]]), np.array([1.0, 0.0]))
        assert result.intersect
        assert result.degenerate
        assert result.value == pytest.approx(0.0, abs=1e-8)
        assert any(r["level"].name == "WARNING" for r in log_messages)

    def test_strict_intersection(self):
        # kernel spanned by (2, -1): the cone functional of e_0 is -1 there
        result = geometry.cone_kernel_test(np.array([[1.0, 2.0]]), np.array([1.0, 0.0]))
        assert result.intersect
        assert not result.degenerate
        assert result.value == pytest.approx(-0.5, abs=1e-7)

    def test_kernel_on_support(self):
        phi = np.array([[1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        result = geometry.cone_kernel_test(phi, np.array([1.0, 1.0, 0.0]))
        assert result.intersect
        assert result.degenerate

    def test_rank_deficient(self):
        with pytest.raises(RankDeficientError):
            geometry.cone_kernel_test(np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0]]), np.ones(3))

    def test_complex_phi(self):
        phi = dft_matrix(8)[[0, 1, 2, 3]]
        f = np.zeros(8)
        f[2] = 1.0
        result = geometry.cone_kernel_test(phi, f)
        bp = basis_pursuit(realify(phi), realify(phi) @ f)
        assert result.intersect == (verify_recovery(f, bp) == "failed")

    @pytest.mark.slow
    def test_agrees_with_basis_pursuit(self):
        stream = RngStream(2024)
        disagreements = 0
        for i in range(200):
            phi = sample_gaussian(6, 12, stream.child("phi", i))
            f = sample_sparse_signal(SparseSignalSpec(12, 1, "gaussian"), stream.child("f", i))
            result = geometry.cone_kernel_test(phi, f)
            exact = verify_recovery(f, basis_pursuit(phi, phi @ f.values)) == "exact"
            disagreements += result.intersect == exact
        assert disagreements <= 2

    @pytest.mark.slow
    def test_escape_experiment(self):
        points = geometry.escape_experiment(
            20, 2, [10, 14, 18], trials=100, rng=RngStream(6), width_samples=2000
        )
        for point in points:
            assert point.trials == 100
            if not point.bound.vacuous:
                assert point.frequency >= point.bound.value - 3 * point.stderr
        assert points[0].frequency <= points[-1].frequency


class TestMaurey:
    def test_point_mass(self):
        y = np.array([1.0, 0.0, 0.0])
        z, error = geometry.maurey_approximate(y, 7, np.eye(3), 0)
        assert z.tolist() == [1.0, 0.0, 0.0]
        assert error == 0.0

    def test_negative_point_mass(self):
        y = np.array([0.0, -1.0])
        z, _ = geometry.maurey_approximate(y, 3, np.eye(2), 1)
        assert z.tolist() == [0.0, -1.0]

    def test_unbiased(self):
        y = np.array([0.3, -0.2, 0.1, 0.0])
        draws = 100_000
        z, _ = geometry.maurey_approximate(y, draws, np.eye(4), RngStream(9))
        p = np.abs(y)
        stderr = np.sqrt(p * (1 - p) / draws)
        assert np.all(np.abs(z - y) <= 4 * stderr + 1e-12)

    def test_outside_ball(self):
        with pytest.raises(ValidationError):
            geometry.maurey_approximate(np.array([0.8, 0.8]), 3, np.eye(2), 0)

    def test_covering_bound(self):
        assert geometry.maurey_covering_log_bound(8, 3) == pytest.approx(3 * math.log(16))

    @pytest.mark.slow
    def test_rate(self):
        rate = geometry.maurey_error_rate(64, 16, 500, RngStream(3))
        assert 1.7 <= rate.ratio <= 2.3
