import numpy as np
import pytest

from beliefbargain import (PenaltyConfig, PenalizedObjective, QuadraticPenalty, Variant,
                           dominance_check, eval_penalized, grad_next_penalized,
                           reservation_price)
from beliefbargain.errors import DimensionError

from conftest import X0, tangent


def by_hand(nxt, anchor, agents, market, eps, lam, variant):
    s, b = agents
    pa = reservation_price(s, market, nxt[:2])
    pb = reservation_price(b, market, nxt[2:])
    dev = lam * 0.5 * np.sum((nxt[:2] - anchor[:2]) ** 2) + (1 - lam) * 0.5 * np.sum((nxt[2:] - anchor[2:]) ** 2)
    if variant is Variant.LAMBDA_INDEPENDENT:
        return dev + (pb - pa) ** 2 / eps
    t = lam * reservation_price(s, market, anchor[:2]) + (1 - lam) * reservation_price(b, market, anchor[2:])
    return dev + ((pb - t) ** 2 + (t - pa) ** 2) / eps


class TestPenalty:
    def test_quadratic(self):
        phi = QuadraticPenalty()
        assert phi.value(0.0) == 0.0
        assert phi.value(-3.0) == 9.0
        assert phi.derivative(-3.0) == -6.0

    def test_midpoint_convex(self, rng):
        phi = QuadraticPenalty()
        x, y = rng.normal(size=(2, 100))
        assert np.all(phi.value((x + y) / 2) < (phi.value(x) + phi.value(y)) / 2 + 1e-15)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            PenaltyConfig(0.0, 0.5)
        with pytest.raises(ValueError):
            PenaltyConfig(0.1, 1.2)
        assert PenaltyConfig(0.1, 0.5, "lambda_independent").variant is Variant.LAMBDA_INDEPENDENT


class TestObjective:
    @pytest.mark.parametrize("variant", list(Variant))
    def test_value_by_hand(self, agents, market, rng, variant):
        for _ in range(20):
            nxt = np.concatenate(rng.dirichlet([1, 1], size=2))
            cfg = PenaltyConfig(0.1, 0.4, variant)
            assert eval_penalized(nxt, X0, agents, market, cfg) == pytest.approx(
                by_hand(nxt, X0, agents, market, 0.1, 0.4, variant), rel=1e-13)

    @pytest.mark.parametrize("variant", list(Variant))
    @pytest.mark.parametrize("lam", [0.0, 0.4, 1.0])
    def test_gradient_fd(self, agents, market, rng, variant, lam):
        cfg = PenaltyConfig(0.1, lam, variant)
        h = 1e-6
        for _ in range(30):
            nxt = 0.05 + 0.9 * np.concatenate(rng.dirichlet([1, 1], size=2))
            nxt = np.concatenate([nxt[:2] / nxt[:2].sum(), nxt[2:] / nxt[2:].sum()])
            anchor = np.concatenate(rng.dirichlet([1, 1], size=2))
            d = np.concatenate([tangent(rng, 2), tangent(rng, 2)])
            fd = (eval_penalized(nxt + h * d, anchor, agents, market, cfg)
                  - eval_penalized(nxt - h * d, anchor, agents, market, cfg)) / (2 * h)
            g = grad_next_penalized(nxt, anchor, agents, market, cfg)
            assert g @ d == pytest.approx(fd, rel=1e-6, abs=1e-8)

    def test_target_cached(self, agents, market):
        obj = PenalizedObjective(X0, *agents, market, PenaltyConfig(0.1, 0.4))
        s, b = agents
        assert obj.target == pytest.approx(0.4 * reservation_price(s, market, X0[:2])
                                           + 0.6 * reservation_price(b, market, X0[2:]))

    def test_lambda_independent_has_no_target(self, agents, market):
        obj = PenalizedObjective(X0, *agents, market, PenaltyConfig(0.1, 0.4, Variant.LAMBDA_INDEPENDENT))
        assert obj.target is None

    def test_lambda_zero_freezes_buyer_gradient(self, agents, market):
        # at lam = 0 the buyer target equals P_B(anchor), so the buyer block vanishes at the anchor
        g = grad_next_penalized(X0, X0, agents, market, PenaltyConfig(0.1, 0.0))
        np.testing.assert_allclose(g[2:], 0.0, atol=1e-14)

    def test_dimension(self, agents, market):
        with pytest.raises(DimensionError):
            eval_penalized([0.5, 0.5], X0, agents, market, PenaltyConfig(0.1, 0.4))


class TestDominance:
    def test_sign_conditioned_identity(self, agents, market, rng):
        """For quadratic Phi, L_P^lam - L_P = -2 (P_B - T)(T - P_A) / eps."""
        cfg = PenaltyConfig(0.1, 0.4)
        s, b = agents
        for _ in range(500):
            nxt, anchor = (np.concatenate(rng.dirichlet([1, 1], size=2)) for _ in range(2))
            lp, lpl = dominance_check(nxt, anchor, agents, market, cfg)
            pa = reservation_price(s, market, nxt[:2])
            pb = reservation_price(b, market, nxt[2:])
            t = 0.4 * reservation_price(s, market, anchor[:2]) + 0.6 * reservation_price(b, market, anchor[2:])
            assert lpl - lp == pytest.approx(-2 * (pb - t) * (t - pa) / 0.1, abs=1e-10)
            if (pb - t) * (t - pa) <= 0:
                assert lp <= lpl + 1e-12

    def test_unconditional_counterexample(self, agents, market):
        # at the anchor itself with P_B < T < P_A the lambda-dependent penalty is smaller
        lp, lpl = dominance_check(X0, X0, agents, market, PenaltyConfig(0.1, 0.4))
        assert lpl < lp
