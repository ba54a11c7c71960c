"""Beliefs on the probability simplex and the geometry the dynamics live on.

A belief is a point of the K-simplex. The state of the bargaining system is a
pair of beliefs, stored flat as a vector of length 2K (seller block first).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError

SUM_TOL = 1e-12
RENORM_TOL = 1e-9


def _as_vector(v) -> np.ndarray:
    return np.asarray(v, dtype=float).reshape(-1)


@dataclass(frozen=True, eq=False)
class Belief:
    """One agent's subjective probabilities over K states.

    Weights summing to one within ``RENORM_TOL`` are renormalised, anything
    further off is rejected. Components may be slightly negative: the affine
    projection used by the dynamics does not enforce the orthant, so the type
    describes points of the simplex's affine hull and exposes ``interior`` /
    ``in_simplex`` to tell the cases apart.
    """

    weights: np.ndarray

    def __post_init__(self):
        w = _as_vector(self.weights).copy()
        if w.size < 2:
            raise ValueError(f"a belief needs at least 2 states, got {w.size}")
        if not np.all(np.isfinite(w)):
            raise ValueError("belief weights must be finite")
        s = w.sum()
        if abs(s - 1.0) > RENORM_TOL:
            raise ValueError(f"belief weights sum to {s!r}, expected 1")
        if abs(s - 1.0) > SUM_TOL:
            w = w / s
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def k(self) -> int:
        return self.weights.size

    @property
    def interior(self) -> bool:
        return bool(np.all(self.weights > 0))

    @property
    def in_simplex(self) -> bool:
        return bool(np.all(self.weights >= 0))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.weights, dtype=dtype)

    def __len__(self):
        return self.k

    def __eq__(self, other):
        if not isinstance(other, Belief):
            return NotImplemented
        return np.array_equal(self.weights, other.weights)

    def __repr__(self):
        return f"Belief({self.weights.tolist()})"


@dataclass(frozen=True, eq=False)
class BeliefState:
    """The pair (Q_A, Q_B): seller belief then buyer belief."""

    q_a: Belief
    q_b: Belief

    def __post_init__(self):
        qa = self.q_a if isinstance(self.q_a, Belief) else Belief(self.q_a)
        qb = self.q_b if isinstance(self.q_b, Belief) else Belief(self.q_b)
        if qa.k != qb.k:
            raise DimensionError(f"belief sizes differ: {qa.k} vs {qb.k}")
        object.__setattr__(self, "q_a", qa)
        object.__setattr__(self, "q_b", qb)

    @property
    def k(self) -> int:
        return self.q_a.k

    @property
    def interior(self) -> bool:
        return self.q_a.interior and self.q_b.interior

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.q_a.weights, self.q_b.weights])

    @classmethod
    def from_vector(cls, v) -> "BeliefState":
        v = _as_vector(v)
        if v.size % 2 or v.size < 4:
            raise DimensionError(f"state vector length {v.size} is not 2K with K >= 2")
        k = v.size // 2
        return cls(Belief(v[:k]), Belief(v[k:]))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.to_vector(), dtype=dtype)

    def __eq__(self, other):
        if not isinstance(other, BeliefState):
            return NotImplemented
        return self.q_a == other.q_a and self.q_b == other.q_b

    def __repr__(self):
        return f"BeliefState(q_a={self.q_a.weights.tolist()}, q_b={self.q_b.weights.tolist()})"


@dataclass(frozen=True)
class DeviationWeights:
    """Relative bargaining power: weight on the seller's deviation."""

    lam: float

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must lie in [0, 1], got {self.lam}")


def _split(v) -> tuple[np.ndarray, np.ndarray, int]:
    v = _as_vector(v)
    if v.size % 2 or v.size < 4:
        raise DimensionError(f"expected a vector of length 2K with K >= 2, got {v.size}")
    k = v.size // 2
    return v[:k], v[k:], k


def project_pair(v) -> np.ndarray:
    """Blockwise projection onto the affine hull of the simplex product.

    Each K-block gets ``x_i - mean(x) + 1/K``. Nonnegativity is not enforced;
    use :func:`project_pair_clamped` for the true simplex projection.
    """
    a, b, k = _split(v)
    return np.concatenate([a - a.mean() + 1.0 / k, b - b.mean() + 1.0 / k])


def project_simplex(v) -> np.ndarray:
    """Euclidean projection of one vector onto the probability simplex."""
    v = _as_vector(v)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, v.size + 1)
    rho = ind[u - css / ind > 0][-1]
    theta = css[rho - 1] / rho
    return np.maximum(v - theta, 0.0)


def project_pair_clamped(v) -> np.ndarray:
    """Blockwise Euclidean projection onto Delta^K x Delta^K."""
    a, b, _ = _split(v)
    return np.concatenate([project_simplex(a), project_simplex(b)])


def tangent_part(v) -> np.ndarray:
    """Remove each block's mean: the component tangent to the affine hull."""
    a, b, _ = _split(v)
    return np.concatenate([a - a.mean(), b - b.mean()])


class QuadraticDistance:
    """psi(q, q0) = ||q - q0||^2 / 2.

    Any object with ``value(q, anchor)`` and ``gradient(q, anchor)`` that is
    strictly convex in ``q`` and vanishes at ``q == anchor`` can stand in.
    """

    name = "quadratic"

    def value(self, q, anchor) -> float:
        d = _pair(q, anchor)
        return 0.5 * float(d @ d)

    def gradient(self, q, anchor) -> np.ndarray:
        return _pair(q, anchor)

    def __repr__(self):
        return "QuadraticDistance()"


QUADRATIC = QuadraticDistance()


def _pair(q, anchor) -> np.ndarray:
    q = _as_vector(q)
    anchor = _as_vector(anchor)
    if q.shape != anchor.shape:
        raise DimensionError(f"belief sizes differ: {q.size} vs {anchor.size}")
    return q - anchor


def psi_quadratic(q, anchor) -> float:
    return QUADRATIC.value(q, anchor)


def psi_gradient(q, anchor) -> np.ndarray:
    """Gradient of :func:`psi_quadratic` in its first argument."""
    return QUADRATIC.gradient(q, anchor)


def joint_deviation(state, anchors, w, psi_a=QUADRATIC, psi_b=QUADRATIC) -> float:
    """lambda * psi_A + (1 - lambda) * psi_B."""
    lam = w.lam if isinstance(w, DeviationWeights) else float(w)
    xa, xb, k = _split(state)
    aa, ab, k2 = _split(anchors)
    if k != k2:
        raise DimensionError(f"state K={k} but anchors K={k2}")
    return lam * psi_a.value(xa, aa) + (1.0 - lam) * psi_b.value(xb, ab)
