import itertools

import numpy as np
import pytest
import scipy.linalg

from sparsebench import ric
from sparsebench.ensembles import Signal, dft_matrix, scaled_dft_vectors
from sparsebench.errors import EnumerationBudgetError, ParameterError, ValidationError
from sparsebench.numerics import RngStream
from sparsebench.recovery import basis_pursuit, verify_recovery


class TestRestrictedIsometryConstant:
    def test_diagonal(self):
        report = ric.restricted_isometry_constant(np.diag([1.0, 2.0]), 1)
        assert report.lambda_min == pytest.approx(1.0)
        assert report.lambda_max == pytest.approx(4.0)
        assert report.C_opt == pytest.approx(2.5)
        assert report.delta == pytest.approx(0.6)
        assert not report.lower_bound

    def test_identity(self):
        report = ric.restricted_isometry_constant(np.eye(6), 3)
        assert report.delta == pytest.approx(0.0, abs=1e-12)
        assert report.C_opt == pytest.approx(1.0)

    def test_brute_force(self):
        phi = np.random.default_rng(2).standard_normal((5, 8))
        lo, hi = np.inf, -np.inf
        for T in itertools.combinations(range(8), 2):
            w = np.linalg.eigvalsh(phi[:, T].T @ phi[:, T])
            lo, hi = min(lo, w[0]), max(hi, w[-1])
        report = ric.restricted_isometry_constant(phi, 2)
        assert report.lambda_min == pytest.approx(lo)
        assert report.lambda_max == pytest.approx(hi)
        assert report.delta == pytest.approx((hi - lo) / (hi + lo))

    def test_complex(self):
        phi = dft_matrix(8)[:4]
        report = ric.restricted_isometry_constant(phi, 1)
        assert report.lambda_min == pytest.approx(0.5)
        assert report.lambda_max == pytest.approx(0.5)
        assert report.delta == pytest.approx(0.0, abs=1e-12)

    def test_monotone_in_order(self):
        phi = np.random.default_rng(3).standard_normal((6, 10))
        deltas = [rep.delta for rep in ric.restricted_isometry_profile(phi, 4)]
        assert all(a <= b + 1e-12 for a, b in zip(deltas, deltas[1:]))

    def test_delta_at_optimum(self):
        report = ric.restricted_isometry_constant(np.diag([1.0, 2.0]), 1)
        assert report.delta_at(report.C_opt) == pytest.approx(report.delta)
        assert report.delta_at(1.0) == pytest.approx(3.0)

    def test_sampled_is_lower_bound(self):
        phi = np.random.default_rng(5).standard_normal((8, 14))
        exact = ric.restricted_isometry_constant(phi, 3)
        sampled = ric.restricted_isometry_constant(phi, 3, "sampled", trials=50, rng=RngStream(1))
        assert sampled.lower_bound
        assert sampled.trials == 50
        assert sampled.delta <= exact.delta + 1e-12
        assert sampled.lambda_min >= exact.lambda_min - 1e-12
        assert sampled.lambda_max <= exact.lambda_max + 1e-12

    def test_sampled_close_to_exact(self):
        phi = np.random.default_rng(20).standard_normal((20, 40))
        exact = ric.restricted_isometry_constant(phi, 2)
        sampled = ric.restricted_isometry_constant(
            phi, 2, "sampled", trials=10_000, rng=RngStream(2)
        )
        assert sampled.delta <= exact.delta + 1e-12
        assert exact.delta - sampled.delta <= 0.05

    def test_sampled_reproducible(self):
        phi = np.random.default_rng(5).standard_normal((8, 14))
        a = ric.restricted_isometry_constant(phi, 3, "sampled", trials=20, rng=RngStream(4))
        b = ric.restricted_isometry_constant(phi, 3, "sampled", trials=20, rng=RngStream(4))
        assert a == b

    def test_budget(self):
        with pytest.raises(EnumerationBudgetError) as e:
            ric.restricted_isometry_constant(np.eye(20), 10, budget=1000)
        assert e.value.count == 184756

    @pytest.mark.parametrize("r, mode", [(0, "exact"), (5, "exact"), (1, "greedy")])
    def test_invalid(self, r, mode):
        with pytest.raises(ParameterError):
            ric.restricted_isometry_constant(np.eye(4), r, mode)

    def test_wide_order_warns(self, log_messages):
        ric.restricted_isometry_constant(np.ones((1, 3)), 2)
        assert any(r["level"].name == "WARNING" for r in log_messages)

    def test_csv_row(self):
        report = ric.restricted_isometry_constant(np.diag([1.0, 2.0]), 1)
        assert report.to_csv_row() == "1,exact,1.0,4.0,2.5,0.6,usable"
        assert len(ric.RIC_CSV_HEADER.split(",")) == len(report.to_csv_row().split(","))


class TestCondition:
    def test_identity_holds(self):
        holds, delta_3r, delta_4r = ric.ric_condition_holds(np.eye(8), 2)
        assert holds
        assert delta_3r == pytest.approx(0.0, abs=1e-12)
        assert delta_4r == pytest.approx(0.0, abs=1e-12)

    def test_shared_scaling_not_better_than_separate(self):
        phi = np.random.default_rng(7).standard_normal((6, 8))
        verdict = ric.ric_condition_holds(phi, 1)
        assert verdict.delta_3r >= verdict.report_3r.delta - 1e-12
        assert verdict.delta_4r >= verdict.report_4r.delta - 1e-12
        assert verdict.C_shared in (verdict.report_3r.C_opt, verdict.report_4r.C_opt)

    def test_shared_scaling_is_minimal(self):
        phi = np.random.default_rng(8).standard_normal((6, 8))
        verdict = ric.ric_condition_holds(phi, 1)
        best = verdict.delta_3r + 3 * verdict.delta_4r
        for C in np.linspace(0.2, 20, 200):
            value = verdict.report_3r.delta_at(C) + 3 * verdict.report_4r.delta_at(C)
            assert value >= best - 1e-9

    def test_order_too_large(self):
        with pytest.raises(ParameterError):
            ric.ric_condition_holds(np.eye(7), 2)

    def test_verdict_implies_recovery(self):
        # orthonormal rows with the flat vector as the only kernel direction always pass at r=1
        flat_kernel = scipy.linalg.null_space(np.ones((1, 12)) / np.sqrt(12)).T
        stream = RngStream(11)
        gaussians = [stream.child(i).generator().standard_normal((12, 16)) for i in range(20)]
        matrices = [flat_kernel, *gaussians]
        checked = 0
        for phi in matrices:
            if not ric.ric_condition_holds(phi, 1).holds:
                continue
            checked += 1
            n = phi.shape[1]
            for i, sign in itertools.product(range(n), (1.0, -1.0)):
                f = Signal.from_support(n, (i,), [sign])
                result = basis_pursuit(phi, phi @ f.values)
                assert verify_recovery(f, result, tol=1e-6) == "exact"
        assert checked >= 1

    def test_flat_kernel_deltas(self):
        phi = scipy.linalg.null_space(np.ones((1, 12)) / np.sqrt(12)).T
        verdict = ric.ric_condition_holds(phi, 1)
        assert verdict.holds
        assert verdict.report_3r.lambda_min == pytest.approx(0.75)
        assert verdict.report_4r.lambda_min == pytest.approx(2 / 3)
        assert verdict.C_shared == pytest.approx(5 / 6)
        assert verdict.delta_3r + 3 * verdict.delta_4r == pytest.approx(0.8)


class TestOperatorLLN:
    def test_validate_decomposition(self):
        assert ric.validate_decomposition(scaled_dft_vectors(8)) < 1e-10
        with pytest.raises(ValidationError):
            ric.validate_decomposition(np.ones((4, 4)))

    def test_full_selection_is_exact(self):
        X = scaled_dft_vectors(8)
        assert ric.operator_lln_deviation(X, range(8), 2) == pytest.approx(0.0, abs=1e-10)

    def test_single_row(self):
        # one DFT row: (1/1) x x^H has unit-modulus entries, deviation of I_T - x x^H is r - 1
        X = scaled_dft_vectors(8)
        assert ric.operator_lln_deviation(X, [3], 2) == pytest.approx(1.0)

    def test_empty_omega(self):
        with pytest.raises(ParameterError):
            ric.operator_lln_deviation(scaled_dft_vectors(4), [], 1)

    def test_experiment_decreases(self):
        points = ric.operator_lln_experiment(scaled_dft_vectors(16), 2, [4, 8, 12], trials=50, rng=3)
        assert [p.k for p in points] == [4, 8, 12]
        assert points[0].mean > points[1].mean > points[2].mean
        assert all(p.trials == 50 for p in points)
