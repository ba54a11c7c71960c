import math

import numpy as np
import pytest

from beliefbargain.errors import DomainError
from beliefbargain.utility import ExponentialUtility, GeneralUtility, from_spec, validate_utility


def log_utility():
    # U(x) = log(1 + x) is not Inada on the whole line; use a CARA/linear blend instead
    return GeneralUtility(lambda x: -np.expm1(-x) + 0.1 * x, lambda x: np.exp(-x) + 0.1,
                          name="cara+linear")


class TestExponential:
    def test_values(self):
        u = ExponentialUtility(2.0)
        assert u.value(0.0) == 0.0
        assert float(u.value(1.0)) == pytest.approx((1 - math.exp(-2)) / 2, rel=1e-15)
        assert float(u.derivative(0.5)) == pytest.approx(math.exp(-1.0), rel=1e-15)
        assert u.supremum == 0.5

    @pytest.mark.parametrize("a", [0.1, 1.0, 2.0, 7.5])
    def test_inverse_round_trip(self, a):
        u = ExponentialUtility(a)
        x = np.linspace(-5, 3, 81)
        back = np.array([u.inverse(float(v)) for v in u.value(x)])
        np.testing.assert_allclose(back, x, atol=1e-12)

    def test_inverse_domain(self):
        u = ExponentialUtility(2.0)
        with pytest.raises(DomainError) as info:
            u.inverse(0.5)
        assert info.value.supremum == 0.5

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            ExponentialUtility(0.0)

    def test_passes_validation(self):
        validate_utility(ExponentialUtility(2.0))

    def test_from_spec(self):
        assert from_spec("exponential", 1.5) == ExponentialUtility(1.5)
        with pytest.raises(ValueError):
            from_spec("power", 0.5)


class TestGeneral:
    def test_inverse_matches_value(self):
        u = log_utility()
        for x in (-3.0, -0.2, 0.0, 0.7, 12.0):
            assert u.inverse(float(u.value(x))) == pytest.approx(x, abs=1e-10)

    def test_bracket_expansion(self):
        u = GeneralUtility(lambda x: x - 0.01 * x ** 2 / (1 + 0.0 * x), lambda x: 1 - 0.02 * x,
                           bracket=(-1.0, 1.0))
        assert u.inverse(float(u.value(-30.0))) == pytest.approx(-30.0, abs=1e-9)

    def test_validation_accepts(self):
        validate_utility(log_utility())

    def test_validation_rejects_convex(self):
        u = GeneralUtility(lambda x: np.expm1(x), lambda x: np.exp(x))
        with pytest.raises(ValueError, match="decreasing|concav"):
            validate_utility(u)

    def test_validation_rejects_offset(self):
        u = GeneralUtility(lambda x: 1 - np.exp(-x) + 0.5, lambda x: np.exp(-x))
        with pytest.raises(ValueError, match="U\\(0\\)"):
            validate_utility(u)

    def test_bad_bracket(self):
        with pytest.raises(ValueError):
            GeneralUtility(np.tanh, lambda x: 1 / np.cosh(x) ** 2, bracket=(1.0, 2.0))
