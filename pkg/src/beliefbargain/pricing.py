"""Utility-indifference reservation prices for a claim on K states.

The reservation price P of an agent with wealth w, risk level r and utility U
under belief Q solves

    U(w) - r = E_Q[ U(w + l*P - l*F) ],     l = +1 seller, -1 buyer.

Exponential utilities use the closed form; any other model goes through a
bracketed root finder. Belief sensitivities come from implicit
differentiation of the defining equation, never from differentiating an
off-simplex extension of the closed form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from ._roots import bracketed_root
from .errors import DimensionError, InfeasibleRiskError, PricingError
from .utility import ExponentialUtility, UtilityModel


class Side(Enum):
    SELLER = 1
    BUYER = -1

    @property
    def ell(self) -> int:
        return self.value


@dataclass(frozen=True, eq=False)
class MarketSpec:
    """Payoff of the contingent claim in each of the K states."""

    payoffs: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.payoffs, dtype=float).reshape(-1).copy()
        if f.size < 2:
            raise ValueError(f"need at least 2 states, got {f.size}")
        if not np.all(np.isfinite(f)):
            raise ValueError("payoffs must be finite")
        if not f.max() > f.min():
            raise ValueError("payoffs must be non-constant")
        f.setflags(write=False)
        object.__setattr__(self, "payoffs", f)

    @property
    def k(self) -> int:
        return self.payoffs.size

    @property
    def f_max(self) -> float:
        return float(self.payoffs.max())

    @property
    def f_min(self) -> float:
        return float(self.payoffs.min())

    def __repr__(self):
        return f"MarketSpec({self.payoffs.tolist()})"


@dataclass(frozen=True)
class AgentSpec:
    side: Side
    wealth: float
    risk_level: float
    utility: UtilityModel

    def __post_init__(self):
        if not isinstance(self.side, Side):
            object.__setattr__(self, "side", Side[str(self.side).upper()])
        if not self.risk_level >= 0.0:
            raise ValueError(f"risk_level must be >= 0, got {self.risk_level}")

    @property
    def ell(self) -> int:
        return self.side.ell

    def with_risk(self, risk_level: float) -> "AgentSpec":
        return AgentSpec(self.side, self.wealth, risk_level, self.utility)


def _weights(q, k: int) -> np.ndarray:
    q = np.asarray(q, dtype=float).reshape(-1)
    if q.size != k:
        raise DimensionError(f"belief has {q.size} states, market has {k}")
    return q


def _log_denominator(a: float, r: float, w: float) -> float:
    # log(1 + a r exp(a w)), stable for large a w
    if r == 0.0:
        return 0.0
    return float(np.logaddexp(0.0, math.log(a * r) + a * w))


def _closed_form(agent: AgentSpec, payoffs: np.ndarray, q: np.ndarray) -> float:
    a = agent.utility.risk_aversion
    ell = agent.ell
    s = ell * a * payoffs
    m = s.max()
    e = q @ np.exp(s - m)
    if not e > 0.0:
        raise PricingError("signed belief weights give a non-positive expected exponential")
    return ell * (m + math.log(e) - _log_denominator(a, agent.risk_level, agent.wealth)) / a


def _target_level(agent: AgentSpec) -> float:
    u = agent.utility
    c = float(u.value(agent.wealth)) - agent.risk_level
    if not c > u.infimum:
        raise InfeasibleRiskError(
            f"U(w) - r = {c!r} is below the utility infimum {u.infimum}")
    return c


def price_bounds(agent: AgentSpec, market: MarketSpec) -> tuple[float, float]:
    """Price interval valid for every belief on the simplex; width = max F - min F."""
    u = agent.utility
    m = u.inverse(float(u.value(agent.wealth)) - agent.risk_level)
    if agent.side is Side.SELLER:
        base = m - agent.wealth
    else:
        base = agent.wealth - m
    return base + market.f_min, base + market.f_max


def _solve_general(agent: AgentSpec, market: MarketSpec, q: np.ndarray):
    u = agent.utility
    ell = agent.ell
    w = agent.wealth
    F = market.payoffs
    c = _target_level(agent)

    def f(p):
        return float(q @ u.value(w + ell * p - ell * F)) - c

    def df(p):
        return ell * float(q @ u.derivative(w + ell * p - ell * F))

    lo, hi = price_bounds(agent, market)
    width = hi - lo
    # signed weights can push the root outside the simplex bounds
    for _ in range(60):
        flo, fhi = f(lo), f(hi)
        if flo == 0.0 or fhi == 0.0 or (flo > 0) != (fhi > 0):
            break
        lo -= width
        hi += width
        width *= 2.0
    else:
        raise PricingError("could not bracket the reservation price", bracket=(lo, hi))
    p, _, _ = bracketed_root(f, df, lo, hi, bisect_width=1e-6, ftol=1e-12, maxiter=200)
    return p


def reservation_price(agent: AgentSpec, market: MarketSpec, q, method: str = "auto") -> float:
    """Reservation price of ``agent`` under belief ``q``.

    ``method`` is ``"auto"`` (closed form for exponential utility),
    ``"closed"`` or ``"root"`` (always the bracketed root finder).
    """
    q = _weights(q, market.k)
    if method == "closed" or (method == "auto" and isinstance(agent.utility, ExponentialUtility)):
        if not isinstance(agent.utility, ExponentialUtility):
            raise TypeError("closed form only exists for ExponentialUtility")
        _target_level(agent)
        return _closed_form(agent, market.payoffs, q)
    if method not in ("auto", "root"):
        raise ValueError(f"unknown method {method!r}")
    p = _solve_general(agent, market, q)
    _marginal(agent, market, q, p)
    return p


def defining_residual(agent: AgentSpec, market: MarketSpec, q, price: float) -> float:
    """|U(w) - r - E_Q[U(w + l P - l F)]| at a candidate price."""
    q = _weights(q, market.k)
    u = agent.utility
    z = agent.wealth + agent.ell * price - agent.ell * market.payoffs
    return abs(float(u.value(agent.wealth)) - agent.risk_level - float(q @ u.value(z)))


def _marginal(agent, market, q, p):
    z = agent.wealth + agent.ell * p - agent.ell * market.payoffs
    d = float(q @ agent.utility.derivative(z))
    if not d > 0.0:
        raise PricingError("expected marginal utility is not positive at these belief weights")
    return z, d


def price_and_gradient(agent: AgentSpec, market: MarketSpec, q):
    """Price and its belief gradient in one pass (the dynamics' hot path)."""
    q = _weights(q, market.k)
    p = reservation_price(agent, market, q)
    z, d = _marginal(agent, market, q, p)
    return p, -agent.ell * agent.utility.value(z) / d


def price_gradient_beliefs(agent: AgentSpec, market: MarketSpec, q) -> np.ndarray:
    """dP/dQ^k = -l U(w + l P - l F[k]) / E_Q[U'(w + l P - l F)]."""
    return price_and_gradient(agent, market, q)[1]


def price_gradient_beliefs_exponential(agent: AgentSpec, market: MarketSpec, q) -> np.ndarray:
    """Explicit belief gradient for exponential utility.

    Agrees with :func:`price_gradient_beliefs` wherever the defining equation
    holds, which makes it a cross-check rather than a second implementation.
    """
    if not isinstance(agent.utility, ExponentialUtility):
        raise TypeError("requires ExponentialUtility")
    q = _weights(q, market.k)
    a = agent.utility.risk_aversion
    ell = agent.ell
    s = ell * a * market.payoffs
    ratio = np.exp(s - s.max()) / (q @ np.exp(s - s.max()))
    ew = math.exp(a * agent.wealth)
    return ell / a * (ratio - ew / (1.0 + a * agent.risk_level * ew))


def price_sensitivity_risk(agent: AgentSpec, market: MarketSpec, q) -> float:
    """dP/dr = -l / E_Q[U'(w + l P - l F)]."""
    q = _weights(q, market.k)
    p = reservation_price(agent, market, q)
    _, d = _marginal(agent, market, q, p)
    return -agent.ell / d


def _risk_gap(agent: AgentSpec) -> float:
    u = agent.utility
    return agent.wealth - u.inverse(float(u.value(agent.wealth)) - agent.risk_level)


def feasibility_sides(seller: AgentSpec, buyer: AgentSpec, market: MarketSpec) -> tuple[float, float]:
    """Both sides of the agreement condition: (max F - min F, risk-gap sum)."""
    _check_roles(seller, buyer)
    return market.f_max - market.f_min, _risk_gap(buyer) + _risk_gap(seller)


def agreement_feasible(seller: AgentSpec, buyer: AgentSpec, market: MarketSpec) -> bool:
    """True iff interior beliefs with equal reservation prices exist."""
    lhs, rhs = feasibility_sides(seller, buyer, market)
    return lhs > rhs


def risk_threshold(agent: AgentSpec, other: AgentSpec, market: MarketSpec) -> float:
    """Largest risk level of ``agent`` keeping agreement feasible, ``other`` fixed.

    Solves w - U^{-1}(U(w) - r) = (max F - min F) - gap(other) exactly:
    r* = U(w) - U(w - budget). Returns 0 when no positive level works.
    """
    budget = market.f_max - market.f_min - _risk_gap(other)
    if budget <= 0.0:
        return 0.0
    u = agent.utility
    return float(u.value(agent.wealth)) - float(u.value(agent.wealth - budget))


def _check_roles(seller, buyer):
    if seller.side is not Side.SELLER or buyer.side is not Side.BUYER:
        raise ValueError("expected (seller, buyer) in that order")
