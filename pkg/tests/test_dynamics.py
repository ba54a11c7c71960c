import io

import numpy as np
import pytest

from beliefbargain import (BeliefState, Status, Variant, certify_fixed_point, generic_pds_step,
                           implicit_step, lyapunov_series, reservation_price, run_trajectory,
                           write_trajectory_csv)
from beliefbargain.dynamics import lyapunov_from_definition
from beliefbargain.errors import StepSolverError
from beliefbargain.functionals import PenalizedObjective
from beliefbargain.simplex import project_pair

from conftest import X0, dyn_cfg


@pytest.fixture(scope="module")
def run04():
    from beliefbargain import AgentSpec, ExponentialUtility, MarketSpec, Side
    m = MarketSpec([1.0, 2.0])
    ag = (AgentSpec(Side.SELLER, 0.0, 0.4, ExponentialUtility(2.0)),
          AgentSpec(Side.BUYER, 0.0, 0.3, ExponentialUtility(1.0)))
    return run_trajectory(X0, ag, m, dyn_cfg()), ag, m


class TestConfig:
    def test_alpha_domain(self):
        with pytest.raises(ValueError):
            dyn_cfg(alpha=1.0)
        with pytest.raises(ValueError):
            dyn_cfg(alpha=0.0)

    def test_beta_domain(self):
        with pytest.raises(ValueError):
            dyn_cfg(beta_scale=0.0)

    def test_with_lambda(self):
        assert dyn_cfg().with_lambda(0.9).penalty.lam == 0.9


class TestGenericStep:
    def test_zero_field_is_identity_on_hull(self, rng):
        x = np.concatenate(rng.dirichlet([1, 1, 1], size=2))
        y, it, _ = generic_pds_step(x, lambda y, x: np.zeros_like(y), 0.3)
        np.testing.assert_allclose(y, x, atol=1e-15)
        assert it == 1

    def test_pull_to_interior_point(self):
        c = np.array([0.3, 0.7, 0.6, 0.4])
        x = np.array([0.5, 0.5, 0.5, 0.5])
        for _ in range(400):
            x, _, _ = generic_pds_step(x, lambda y, _x: y - c, 0.2)
        np.testing.assert_allclose(x, c, atol=1e-12)

    def test_solves_fixed_point_equation(self, rng):
        c = np.array([0.3, 0.7, 0.6, 0.4])
        x = np.array([0.5, 0.5, 0.1, 0.9])
        g = lambda y, _x: 3.0 * (y - c) + np.sin(y)
        y, _, res = generic_pds_step(x, g, 0.1, beta=0.7)
        rhs = 0.9 * x + 0.1 * project_pair(x - 0.7 * g(y, x))
        np.testing.assert_allclose(y, rhs, atol=1e-12)

    def test_exterior_contraction(self, rng):
        x = np.array([0.9, 0.4, 0.2, 0.2])
        d0 = np.linalg.norm(x - project_pair(x))
        for t in range(1, 40):
            x, _, _ = generic_pds_step(x, lambda y, _x: np.zeros_like(y), 0.15)
            assert np.linalg.norm(x - project_pair(x)) == pytest.approx(0.85 ** t * d0, rel=1e-9)

    def test_cap_raises(self):
        with pytest.raises(StepSolverError) as info:
            generic_pds_step(np.array([0.3, 0.7, 0.6, 0.4]),
                             lambda y, x: 1e3 * np.array([y[2], -y[2], -y[0], y[0]]), 0.9, cap=2)
        assert info.value.iterations == 2


class TestImplicitStep:
    def test_fixed_point_stays(self, agents, market):
        # zero-penalty point: P_A(x) = P_B(x), anchor = x
        s, b = agents
        from scipy.optimize import brentq
        qa = np.array([0.4, 0.6])
        pa = reservation_price(s, market, qa)
        q1 = brentq(lambda t: reservation_price(b, market, [t, 1 - t]) - pa, 0.0, 1.0, xtol=1e-15)
        x = np.concatenate([qa, [q1, 1 - q1]])
        y = implicit_step(x, agents, market, dyn_cfg(variant=Variant.LAMBDA_INDEPENDENT))
        np.testing.assert_allclose(y.to_vector(), x, atol=1e-11)

    def test_tiny_alpha(self, agents, market):
        y = implicit_step(X0, agents, market, dyn_cfg(alpha=1e-6))
        assert np.linalg.norm(y.to_vector() - X0) < 1e-4

    def test_first_step_direction(self, agents, market):
        s, b = agents
        y = implicit_step(X0, agents, market, dyn_cfg()).to_vector()
        assert reservation_price(s, market, y[:2]) < reservation_price(s, market, X0[:2])
        assert reservation_price(b, market, y[2:]) > reservation_price(b, market, X0[2:])

    def test_warm_starts_agree(self, agents, market, rng):
        ys = []
        for _ in range(5):
            y0 = X0 + 0.05 * np.concatenate([[1, -1], [1, -1]]) * rng.normal(size=4)
            ys.append(implicit_step(X0, agents, market, dyn_cfg(), y0=y0).to_vector())
        assert np.max(np.ptp(ys, axis=0)) < 1e-9

    def test_returns_state(self, agents, market):
        assert isinstance(implicit_step(BeliefState.from_vector(X0), agents, market, dyn_cfg()), BeliefState)


class TestTrajectory:
    def test_converges(self, run04):
        traj, ag, m = run04
        assert traj.status is Status.CONVERGED
        assert abs(traj.price_a[-1] - traj.price_b[-1]) < 1e-6

    def test_invariance(self, run04):
        traj, _, _ = run04
        s = traj.states
        np.testing.assert_allclose(s[:, :2].sum(1), 1.0, atol=1e-10)
        np.testing.assert_allclose(s[:, 2:].sum(1), 1.0, atol=1e-10)

    def test_lyapunov_identity(self, run04):
        traj, _, _ = run04
        dx = np.diff(traj.states, axis=0)
        np.testing.assert_allclose(traj.lyapunov[1:], np.sum(dx ** 2, 1) / 0.05 ** 2, rtol=1e-12)

    def test_lyapunov_matches_definition(self, run04):
        traj, ag, m = run04
        cfg = traj.config
        for t in (1, 5, 20):
            v = lyapunov_from_definition(traj.states[t], traj.states[t - 1], ag, m, cfg)
            assert v == pytest.approx(traj.lyapunov[t], rel=1e-8)

    def test_lyapunov_report(self, run04):
        traj, _, _ = run04
        rep = lyapunov_series(traj)
        assert rep.all_decreasing
        assert rep.lipschitz_estimate > 0
        assert 0 < rep.alpha_threshold < 1

    def test_lyapunov_too_short(self, agents, market):
        traj = run_trajectory(X0, agents, market, dyn_cfg(max_periods=1))
        with pytest.raises(ValueError):
            lyapunov_series(traj)

    def test_zero_periods(self, agents, market):
        traj = run_trajectory(X0, agents, market, dyn_cfg(max_periods=0))
        assert traj.periods == 0 and traj.status is Status.MAX_PERIODS
        buf = io.StringIO()
        write_trajectory_csv(traj, buf)
        assert len(buf.getvalue().strip().splitlines()) == 2

    def test_csv_format(self, run04):
        traj, _, _ = run04
        buf = io.StringIO()
        write_trajectory_csv(traj, buf)
        text = buf.getvalue()
        assert "\r" not in text
        lines = text.splitlines()
        assert lines[0] == ("t,qa_1,qa_2,qb_1,qb_2,price_a,price_b,lyapunov,delta_lyapunov,"
                            "boundary_violation,solver_iters")
        assert len(lines) == traj.periods + 2
        row = lines[5].split(",")
        assert float(row[5]) == traj.price_a[4]

    def test_lambda_independent_weak_in_lambda(self, agents, market):
        ends = [run_trajectory(X0, agents, market,
                               dyn_cfg(lam=lam, variant=Variant.LAMBDA_INDEPENDENT)).price_a[-1]
                for lam in (0.0, 0.4, 1.0)]
        assert np.ptp(ends) < 0.01

    def test_fixed_anchor_minimises_penalized(self, agents, market):
        from beliefbargain.solver import minimize_penalized
        cfg = dyn_cfg(variant=Variant.LAMBDA_INDEPENDENT, fixed_anchor=True, max_periods=20000)
        traj = run_trajectory(X0, agents, market, cfg)
        assert traj.converged
        x_opt, _ = minimize_penalized(X0, agents, market, 0.4, 0.1)
        obj = PenalizedObjective(X0, *agents, market, cfg.penalty)
        assert obj.value(traj.states[-1]) == pytest.approx(obj.value(x_opt), abs=1e-8)

    def test_clamped_projection_runs(self, agents, market):
        traj = run_trajectory(X0, agents, market, dyn_cfg(clamped_projection=True))
        assert traj.converged and not traj.any_boundary_violation

    def test_explicit_scheme_flag(self, agents, market):
        traj = run_trajectory(X0, agents, market, dyn_cfg(explicit_scheme=True, max_periods=5000))
        assert np.all(traj.solver_iters[1:] == 1)

    def test_failure_recorded(self, agents, market):
        traj = run_trajectory(X0, agents, market, dyn_cfg(alpha=0.99, eps=1e-4))
        assert traj.status is Status.STEP_SOLVER_FAILURE
        assert traj.failed_period == 1

    def test_infeasible_warns(self, agents, market):
        s, b = agents
        with pytest.warns(RuntimeWarning):
            run_trajectory(X0, (s.with_risk(3.0), b.with_risk(3.0)), market, dyn_cfg(max_periods=3))


class TestCertificate:
    def test_terminal_passes(self, run04):
        traj, ag, m = run04
        cert = certify_fixed_point(traj.states[-1], ag, m, traj.config)
        assert cert.passed and cert.interior

    def test_boundary_flagged(self, agents, market):
        cert = certify_fixed_point([0.0, 1.0, 0.5, 0.5], agents, market, dyn_cfg())
        assert not cert.interior and not cert.passed

    def test_initial_state_fails(self, agents, market):
        cert = certify_fixed_point(X0, agents, market, dyn_cfg())
        assert cert.price_gap > 0.1 and not cert.passed
