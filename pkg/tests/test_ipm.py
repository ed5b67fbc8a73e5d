"""Interior-point solver: analytic oracles, statuses, and invariants."""

import numpy as np
import pytest

from opfkit import (
    SolverOptions,
    build_acopf,
    check_derivatives,
    errors,
    kkt_error,
    solve,
)

from problems import (
    infeasible_box,
    qp_active_bound,
    qp_equality,
    qp_inequality,
    rosenbrock,
)
from util import interior_points

TIGHT = SolverOptions(tol=1e-10)


class TestAnalyticOracles:

    def test_inequality_qp(self):
        p, exp = qp_inequality()
        r = solve(p, TIGHT)
        assert r.status == "Optimal"
        assert np.max(np.abs(r.x - exp["x"])) <= 1e-8
        assert r.lambda_ineq[0] == pytest.approx(exp["lambda_ineq"][0],
                                                 abs=1e-6)

    def test_equality_qp_multiplier_sign(self):
        p, exp = qp_equality()
        r = solve(p, TIGHT)
        assert r.status == "Optimal"
        assert np.max(np.abs(r.x - exp["x"])) <= 1e-8
        assert r.lambda_eq[0] == pytest.approx(-2.0, abs=1e-6)

    def test_active_bound_multiplier(self):
        p, exp = qp_active_bound()
        r = solve(p, TIGHT)
        assert r.status == "Optimal"
        assert np.max(np.abs(r.x - exp["x"])) <= 1e-8
        assert r.z_lb[0] == pytest.approx(2.0, abs=1e-6)
        assert r.z_ub[0] == pytest.approx(0.0, abs=1e-6)

    def test_rosenbrock(self):
        r = solve(rosenbrock(), SolverOptions(tol=1e-8))
        assert r.status == "Optimal"
        assert np.max(np.abs(r.x - 1.0)) <= 1e-6

    def test_kkt_triple_reported(self):
        p, _ = qp_equality()
        r = solve(p, TIGHT)
        assert len(r.kkt) == 3
        assert max(r.kkt) <= 1e-10


class TestStatuses:

    def test_infeasible_detected(self):
        r = solve(infeasible_box(), SolverOptions(tol=1e-8))
        assert r.status == "Infeasible"

    def test_max_iter(self):
        r = solve(rosenbrock(), SolverOptions(tol=1e-12, max_iter=3))
        assert r.status == "MaxIter"
        assert r.iterations <= 3

    def test_fixed_variable_stays_fixed(self):
        p, _ = qp_inequality()
        p.xl = np.array([0.25, -np.inf])
        p.xu = np.array([0.25, np.inf])
        r = solve(p, TIGHT)
        assert r.status == "Optimal"
        assert r.x[0] == 0.25
        assert r.x[1] == pytest.approx(1.75, abs=1e-8)


class TestDeterminism:

    def test_bitwise_repeatability(self, case9):
        p, _ = build_acopf(case9)
        r1 = solve(p, SolverOptions())
        r2 = solve(p, SolverOptions())
        assert r1.status == r2.status == "Optimal"
        assert np.array_equal(r1.x, r2.x)
        assert r1.objective == r2.objective

    def test_backends_agree(self, case9):
        p, _ = build_acopf(case9)
        dense = solve(p, SolverOptions(linear_solver="bunch_kaufman"))
        schur = solve(p, SolverOptions(linear_solver="schur"))
        assert dense.status == "Optimal"
        assert schur.status == "Optimal"
        assert schur.objective == pytest.approx(dense.objective, rel=1e-8)


class TestIterationLog:

    def test_log_is_populated(self, base_solve):
        _, _, r = base_solve
        assert len(r.iter_log) == r.iterations
        first = r.iter_log[0]
        assert first.mu > 0 and first.nu > 0

    def test_merit_monotone_at_fixed_mu_nu(self, base_solve):
        """Armijo guarantees descent while the merit parameters hold."""
        _, _, r = base_solve
        for a, b in zip(r.iter_log, r.iter_log[1:]):
            if a.mu == b.mu and a.nu == b.nu:
                assert b.merit <= a.merit + 1e-9 * max(1.0, abs(a.merit))

    def test_mu_never_increases(self, base_solve):
        _, _, r = base_solve
        mus = [rec.mu for rec in r.iter_log]
        assert all(m2 <= m1 for m1, m2 in zip(mus, mus[1:]))

    def test_interior_gaps_positive(self, base_solve):
        _, _, r = base_solve
        for rec in r.iter_log:
            assert rec.min_bound_gap > 0.0


class TestKktError:

    def test_zero_at_certified_point(self, base_solve):
        p, _, r = base_solve
        stat, feas, comp = kkt_error(p, r.x, r.lambda_eq, r.lambda_ineq,
                                     r.z_lb, r.z_ub)
        assert max(stat, feas, comp) <= 1e-6

    def test_perturbed_point_flagged(self, base_solve):
        p, _, r = base_solve
        x = r.x.copy()
        x[-1] += 1e-3
        stat, feas, comp = kkt_error(p, x, r.lambda_eq, r.lambda_ineq,
                                     r.z_lb, r.z_ub)
        assert max(stat, feas, comp) > 1e-6

    def test_shape_checks(self, base_solve):
        p, _, r = base_solve
        with pytest.raises(errors.DimensionMismatch):
            kkt_error(p, r.x[:-1], r.lambda_eq, r.lambda_ineq,
                      r.z_lb, r.z_ub)
        with pytest.raises(errors.DimensionMismatch):
            kkt_error(p, r.x, r.lambda_eq[:-1], r.lambda_ineq,
                      r.z_lb, r.z_ub)


class TestDerivativeChecker:

    def test_clean_problem_passes(self, case9):
        p, _ = build_acopf(case9)
        rng = np.random.default_rng(7)
        for x in interior_points(p, 3, rng):
            assert check_derivatives(p, x).ok()

    def test_corrupted_gradient_flagged(self):
        p, _ = qp_inequality()
        good_grad = p.gradient
        p.gradient = lambda x: good_grad(x) + np.array([0.01, 0.0])
        report = check_derivatives(p, np.array([0.3, 0.4]))
        assert not report.ok()
