"""Penalised joint-deviation functionals and their next-period gradients.

Two penalty variants are supported:

* ``LAMBDA_INDEPENDENT``: lam*psi_A + (1-lam)*psi_B + Phi(P_B - P_A)/eps
* ``LAMBDA_DEPENDENT``: the same deviation terms plus
  ``[Phi(P_B - T) + Phi(T - P_A)]/eps`` where the target price
  ``T = lam*P_A(anchor) + (1-lam)*P_B(anchor)`` is frozen at the anchor.

Prices in the penalty are evaluated at the *next* beliefs; the deviation
terms are measured from the anchor.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DimensionError
from .pricing import AgentSpec, MarketSpec, price_and_gradient
from .simplex import QUADRATIC


class PenaltyFunction:
    """Strictly convex penalty with its global minimum at 0."""

    def value(self, x):
        raise NotImplementedError

    def derivative(self, x):
        raise NotImplementedError


class QuadraticPenalty(PenaltyFunction):
    name = "quadratic"

    def value(self, x):
        return x * x

    def derivative(self, x):
        return 2.0 * x

    def __repr__(self):
        return "QuadraticPenalty()"


QUADRATIC_PENALTY = QuadraticPenalty()


class Variant(Enum):
    LAMBDA_INDEPENDENT = "lambda_independent"
    LAMBDA_DEPENDENT = "lambda_dependent"


@dataclass(frozen=True)
class PenaltyConfig:
    epsilon: float
    lam: float
    variant: Variant = Variant.LAMBDA_DEPENDENT
    phi: PenaltyFunction = field(default=QUADRATIC_PENALTY)
    psi_a: object = field(default=QUADRATIC)
    psi_b: object = field(default=QUADRATIC)

    def __post_init__(self):
        if not self.epsilon > 0.0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must lie in [0, 1], got {self.lam}")
        if not isinstance(self.variant, Variant):
            object.__setattr__(self, "variant", Variant(self.variant))

    def replace(self, **changes) -> "PenaltyConfig":
        from dataclasses import replace
        return replace(self, **changes)


class PenalizedObjective:
    """L(next; anchor) with anchor prices computed once.

    The per-period fixed-point solve evaluates the gradient many times at the
    same anchor, so the anchor-side work is cached here.
    """

    def __init__(self, anchor, seller: AgentSpec, buyer: AgentSpec, market: MarketSpec,
                 cfg: PenaltyConfig):
        anchor = np.asarray(anchor, dtype=float).reshape(-1)
        k = market.k
        if anchor.size != 2 * k:
            raise DimensionError(f"anchor length {anchor.size}, expected {2 * k}")
        self.k = k
        self.anchor = anchor
        self.seller, self.buyer, self.market, self.cfg = seller, buyer, market, cfg
        if cfg.variant is Variant.LAMBDA_DEPENDENT:
            pa0, _ = price_and_gradient(seller, market, anchor[:k])
            pb0, _ = price_and_gradient(buyer, market, anchor[k:])
            self.target = cfg.lam * pa0 + (1.0 - cfg.lam) * pb0
        else:
            self.target = None

    def _split(self, nxt):
        nxt = np.asarray(nxt, dtype=float).reshape(-1)
        if nxt.size != 2 * self.k:
            raise DimensionError(f"state length {nxt.size}, expected {2 * self.k}")
        return nxt[:self.k], nxt[self.k:]

    def evaluate(self, nxt, gradient=True):
        """Return ``(value, gradient or None, P_A(next), P_B(next))``."""
        cfg = self.cfg
        lam, inv_eps, phi = cfg.lam, 1.0 / cfg.epsilon, cfg.phi
        qa, qb = self._split(nxt)
        aa, ab = self.anchor[:self.k], self.anchor[self.k:]
        pa, ga = price_and_gradient(self.seller, self.market, qa)
        pb, gb = price_and_gradient(self.buyer, self.market, qb)
        value = lam * cfg.psi_a.value(qa, aa) + (1.0 - lam) * cfg.psi_b.value(qb, ab)
        if cfg.variant is Variant.LAMBDA_INDEPENDENT:
            gap = pb - pa
            value += inv_eps * phi.value(gap)
            da = db = phi.derivative(gap)
        else:
            t = self.target
            value += inv_eps * (phi.value(pb - t) + phi.value(t - pa))
            db = phi.derivative(pb - t)
            da = phi.derivative(t - pa)
        if not gradient:
            return value, None, pa, pb
        grad_a = lam * cfg.psi_a.gradient(qa, aa) - inv_eps * da * ga
        grad_b = (1.0 - lam) * cfg.psi_b.gradient(qb, ab) + inv_eps * db * gb
        return value, np.concatenate([grad_a, grad_b]), pa, pb

    def value(self, nxt) -> float:
        return self.evaluate(nxt, gradient=False)[0]

    def gradient(self, nxt) -> np.ndarray:
        return self.evaluate(nxt)[1]


def eval_penalized(nxt, anchor, agents, market, cfg: PenaltyConfig) -> float:
    """Value of the configured penalised functional at ``nxt`` given ``anchor``."""
    seller, buyer = agents
    return PenalizedObjective(anchor, seller, buyer, market, cfg).value(nxt)


def grad_next_penalized(nxt, anchor, agents, market, cfg: PenaltyConfig) -> np.ndarray:
    """Gradient with respect to the next-period beliefs, length 2K."""
    seller, buyer = agents
    return PenalizedObjective(anchor, seller, buyer, market, cfg).gradient(nxt)


def dominance_check(nxt, anchor, agents, market, cfg: PenaltyConfig) -> tuple[float, float]:
    """Both functionals at the same point and anchor: ``(L_P, L_P^lambda)``.

    With quadratic Phi the two differ only in the penalty terms, and
    ``L_P <= L_P^lambda`` exactly when ``P_B(next) - T`` and ``T - P_A(next)``
    do not share a strict sign.
    """
    lp = eval_penalized(nxt, anchor, agents, market, cfg.replace(variant=Variant.LAMBDA_INDEPENDENT))
    lpl = eval_penalized(nxt, anchor, agents, market, cfg.replace(variant=Variant.LAMBDA_DEPENDENT))
    return lp, lpl
