"""Utility functions satisfying the Inada conditions.

All models take and return numpy arrays elementwise, so expected utilities
are a single dot product.
"""
from __future__ import annotations

import math

import numpy as np

from ._roots import bracketed_root
from .errors import DomainError, PricingError


class UtilityModel:
    """Interface for an Inada utility: U(0) = 0, U' > 0, U'' < 0.

    Subclasses provide ``value``, ``derivative`` and ``inverse``; ``supremum``
    and ``infimum`` bound the range of ``value``.
    """

    supremum = math.inf
    infimum = -math.inf
    derivative_lipschitz = False
    lipschitz_constant = None

    def value(self, x):
        raise NotImplementedError

    def derivative(self, x):
        raise NotImplementedError

    def inverse(self, level):
        raise NotImplementedError

    def _check_level(self, level):
        if not self.infimum < level < self.supremum:
            raise DomainError(
                f"utility level {level!r} outside the range ({self.infimum}, {self.supremum})",
                supremum=self.supremum, infimum=self.infimum)


class ExponentialUtility(UtilityModel):
    """U(x) = (1 - exp(-a x)) / a with risk aversion ``a > 0``."""

    infimum = -math.inf

    def __init__(self, risk_aversion: float):
        a = float(risk_aversion)
        if not a > 0.0 or not math.isfinite(a):
            raise ValueError(f"risk_aversion must be a positive finite number, got {risk_aversion!r}")
        self.risk_aversion = a
        self.supremum = 1.0 / a

    def value(self, x):
        a = self.risk_aversion
        return -np.expm1(-a * np.asarray(x, dtype=float)) / a

    def derivative(self, x):
        return np.exp(-self.risk_aversion * np.asarray(x, dtype=float))

    def inverse(self, level):
        level = float(level)
        self._check_level(level)
        a = self.risk_aversion
        return -math.log1p(-a * level) / a

    def __repr__(self):
        return f"ExponentialUtility(risk_aversion={self.risk_aversion})"

    def __eq__(self, other):
        return isinstance(other, ExponentialUtility) and other.risk_aversion == self.risk_aversion

    def __hash__(self):
        return hash(("exp", self.risk_aversion))


class GeneralUtility(UtilityModel):
    """A user-supplied utility with a numerical inverse.

    ``bracket`` is the interval searched by the inverse; it is widened
    geometrically (up to ``max_expand`` doublings) when a level falls outside
    ``value(bracket)``.
    """

    def __init__(self, value, derivative, bracket=(-50.0, 50.0), supremum=math.inf,
                 infimum=-math.inf, name="general", max_expand=20):
        self._value = value
        self._derivative = derivative
        self.bracket = (float(bracket[0]), float(bracket[1]))
        if not self.bracket[0] < 0.0 < self.bracket[1]:
            raise ValueError("bracket must contain 0")
        self.supremum = supremum
        self.infimum = infimum
        self.name = name
        self.max_expand = max_expand

    def value(self, x):
        return np.asarray(self._value(np.asarray(x, dtype=float)), dtype=float)

    def derivative(self, x):
        return np.asarray(self._derivative(np.asarray(x, dtype=float)), dtype=float)

    def inverse(self, level):
        level = float(level)
        self._check_level(level)
        lo, hi = self.bracket
        for _ in range(self.max_expand):
            if float(self.value(lo)) <= level:
                break
            lo *= 2.0
        for _ in range(self.max_expand):
            if float(self.value(hi)) >= level:
                break
            hi *= 2.0
        f = lambda x: float(self.value(x)) - level
        df = lambda x: float(self.derivative(x))
        try:
            x, _, _ = bracketed_root(f, df, lo, hi, bisect_width=1e-3, ftol=1e-14, accept=1e-11)
        except PricingError as exc:
            raise DomainError(f"level {level!r} not attained on [{lo}, {hi}]",
                              supremum=self.supremum, infimum=self.infimum) from exc
        return x

    def __repr__(self):
        return f"GeneralUtility(name={self.name!r})"


def validate_utility(u: UtilityModel, grid=None, rng=None, n_triples=1000, tol=1e-12):
    """Screen a utility for the Inada shape on a sample grid.

    Raises ``ValueError`` naming the first violated property, otherwise returns
    ``u`` so it can be used inline at registration.
    """
    if grid is None:
        grid = np.linspace(-10.0, 10.0, 401)
    grid = np.asarray(grid, dtype=float)
    if abs(float(u.value(0.0))) > tol:
        raise ValueError(f"U(0) = {float(u.value(0.0))!r}, expected 0")
    d = u.derivative(grid)
    if not np.all(d > 0):
        raise ValueError("derivative is not strictly positive on the grid")
    v = u.value(grid)
    if not np.all(np.diff(v) > 0):
        raise ValueError("value is not strictly increasing on the grid")
    if not np.all(np.diff(d) < 0):
        raise ValueError("derivative is not strictly decreasing (value not strictly concave)")
    rng = np.random.default_rng(0) if rng is None else rng
    xyz = np.sort(rng.uniform(grid[0], grid[-1], size=(n_triples, 3)), axis=1)
    x, y, z = xyz.T
    ok = z - x > 1e-9
    x, y, z = x[ok], y[ok], z[ok]
    t = (y - x) / (z - x)
    chord = (1 - t) * u.value(x) + t * u.value(z)
    if np.any(u.value(y) < chord - tol * np.maximum(1.0, np.abs(chord))):
        raise ValueError("value fails the concavity chord test")
    inner = grid[np.abs(grid) <= 10.0]
    levels = u.value(inner)
    back = np.array([u.inverse(float(l)) for l in levels])
    # near a finite supremum one ulp of level moves x by ulp / U'(x)
    allowed = (1e-10 * np.maximum(1.0, np.abs(inner))
               + 64 * np.finfo(float).eps * np.maximum(1.0, np.abs(levels)) / u.derivative(inner))
    if np.any(np.abs(back - inner) > allowed):
        raise ValueError("inverse(value(x)) does not round-trip")
    return u


def from_spec(family: str, param: float | None = None) -> UtilityModel:
    """Build a utility from a family name, as used by configuration files."""
    family = family.lower()
    if family in ("exponential", "exp", "cara"):
        return ExponentialUtility(param)
    raise ValueError(f"unknown utility family {family!r}")
