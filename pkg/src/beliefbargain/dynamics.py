"""Implicit projected-gradient bargaining dynamics.

One period maps x = (Q_A, Q_B) to the y solving

    y = (1 - alpha) x + alpha * Pi[x - beta * G(y, x)]

where G is the gradient of the penalised functional in its first argument
and Pi the projection onto the simplex product. The equation is solved by
damped Picard iteration started at y = x.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .errors import PricingError, StepSolverError
from .functionals import PenalizedObjective, PenaltyConfig
from .pricing import agreement_feasible, price_and_gradient
from .simplex import BeliefState, project_pair, project_pair_clamped, tangent_part


@dataclass(frozen=True)
class DynamicsConfig:
    alpha: float
    penalty: PenaltyConfig
    step_solver_tol: float = 1e-12
    step_solver_cap: int = 500
    convergence_tol: float = 1e-10
    max_periods: int = 100_000
    beta_scale: float = 1.0
    fixed_anchor: bool = False
    clamped_projection: bool = False
    explicit_scheme: bool = False

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not self.beta_scale > 0.0:
            raise ValueError(f"beta_scale must be > 0, got {self.beta_scale}")
        if self.step_solver_cap < 1:
            raise ValueError("step_solver_cap must be >= 1")
        if self.max_periods < 0:
            raise ValueError("max_periods must be >= 0")

    @property
    def projection(self):
        return project_pair_clamped if self.clamped_projection else project_pair

    def with_lambda(self, lam: float) -> "DynamicsConfig":
        return replace(self, penalty=self.penalty.replace(lam=lam))

    def replace(self, **changes) -> "DynamicsConfig":
        return replace(self, **changes)


class Status(Enum):
    CONVERGED = "converged"
    MAX_PERIODS = "max_periods"
    STEP_SOLVER_FAILURE = "step_solver_failure"


def generic_pds_step(x, g, alpha: float, beta: float = 1.0, projection=project_pair,
                     tol: float = 1e-12, cap: int = 500, y0=None):
    """Solve ``y = (1-alpha) x + alpha * projection(x - beta * g(y, x))``.

    Damped Picard iteration: the relaxation factor halves whenever the
    max-norm residual grows. Returns ``(y, iterations, residual)``.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    y = x.copy() if y0 is None else np.asarray(y0, dtype=float).reshape(-1).copy()
    omega = 1.0
    prev = math.inf
    res = math.inf
    for it in range(1, cap + 1):
        ty = (1.0 - alpha) * x + alpha * projection(x - beta * g(y, x))
        res = float(np.max(np.abs(ty - y)))
        if res < tol:
            return ty, it, res
        if res > prev:
            omega *= 0.5
        prev = res
        y = y + omega * (ty - y)
    raise StepSolverError(f"step solver did not converge in {cap} iterations "
                          f"(residual {res:.3e})", residual=res, iterations=cap)


def _as_state(x) -> np.ndarray:
    if isinstance(x, BeliefState):
        return x.to_vector()
    return np.asarray(x, dtype=float).reshape(-1)


def _step(x, anchor, seller, buyer, market, cfg: DynamicsConfig, y0=None):
    obj = PenalizedObjective(anchor, seller, buyer, market, cfg.penalty)
    if cfg.explicit_scheme:
        g = obj.gradient(x)
        y = (1.0 - cfg.alpha) * x + cfg.alpha * cfg.projection(x - cfg.beta_scale * g)
        return y, 1, 0.0, obj
    y, it, res = generic_pds_step(
        x, lambda nxt, _prev: obj.gradient(nxt), cfg.alpha, cfg.beta_scale,
        cfg.projection, cfg.step_solver_tol, cfg.step_solver_cap, y0=y0)
    return y, it, res, obj


def implicit_step(x, agents, market, cfg: DynamicsConfig, anchor=None, y0=None) -> BeliefState:
    """One bargaining period from ``x``; the anchor defaults to ``x`` itself."""
    seller, buyer = agents
    xv = _as_state(x)
    av = xv if anchor is None else _as_state(anchor)
    y, _, _, _ = _step(xv, av, seller, buyer, market, cfg, y0=None if y0 is None else _as_state(y0))
    return BeliefState.from_vector(y)


@dataclass
class TrajectoryRecord:
    """Per-period log of a bargaining run.

    Row ``t`` holds the state x(t) and the prices there. ``lyapunov[t]`` is
    V for the step that produced x(t), i.e. ||x(t) - x(t-1)||^2 / alpha^2,
    and ``delta_lyapunov[t]`` its change from the previous step; both are NaN
    where undefined. ``step_gradients[t]`` is G(x(t), x(t-1)).
    """

    k: int
    alpha: float
    beta_scale: float
    states: np.ndarray
    price_a: np.ndarray
    price_b: np.ndarray
    lyapunov: np.ndarray
    delta_lyapunov: np.ndarray
    boundary_violation: np.ndarray
    solver_iters: np.ndarray
    step_gradients: np.ndarray
    status: Status
    message: str = ""
    failed_period: int | None = None
    config: DynamicsConfig | None = field(default=None, repr=False)

    @property
    def periods(self) -> int:
        return self.states.shape[0] - 1

    @property
    def terminal(self) -> BeliefState:
        return BeliefState.from_vector(self.states[-1])

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED

    @property
    def any_boundary_violation(self) -> bool:
        return bool(self.boundary_violation.any())

    def header(self) -> list[str]:
        return (["t"] + [f"qa_{i + 1}" for i in range(self.k)] + [f"qb_{i + 1}" for i in range(self.k)]
                + ["price_a", "price_b", "lyapunov", "delta_lyapunov", "boundary_violation", "solver_iters"])

    def rows(self):
        for t in range(self.states.shape[0]):
            yield ([str(t)] + [f"{v:.17g}" for v in self.states[t]]
                   + [f"{self.price_a[t]:.17g}", f"{self.price_b[t]:.17g}",
                      f"{self.lyapunov[t]:.17g}", f"{self.delta_lyapunov[t]:.17g}",
                      str(int(self.boundary_violation[t])), str(int(self.solver_iters[t]))])


def write_trajectory_csv(traj: TrajectoryRecord, dest) -> None:
    """Write a trajectory as CSV (header row, LF endings, 17 significant digits)."""
    if hasattr(dest, "write"):
        _write_rows(dest, traj)
    else:
        with open(dest, "w", newline="", encoding="utf-8") as fh:
            _write_rows(fh, traj)


def _write_rows(fh, traj):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(traj.header())
    w.writerows(traj.rows())


def run_trajectory(x0, agents, market, cfg: DynamicsConfig) -> TrajectoryRecord:
    """Iterate periods until the state stops moving or a cap is hit."""
    seller, buyer = agents
    x = _as_state(x0)
    k = market.k
    if x.size != 2 * k:
        raise ValueError(f"initial state has length {x.size}, expected {2 * k}")
    if not agreement_feasible(seller, buyer, market):
        warnings.warn("agreement condition fails for these risk levels; running anyway",
                      RuntimeWarning, stacklevel=2)
    x_init = x.copy()

    states = [x.copy()]
    pa0, _ = price_and_gradient(seller, market, x[:k])
    pb0, _ = price_and_gradient(buyer, market, x[k:])
    pas, pbs = [pa0], [pb0]
    lyap, dlyap = [math.nan], [math.nan]
    viol = [bool(np.any(x < 0))]
    iters = [0]
    grads = [np.full(2 * k, math.nan)]
    status = Status.MAX_PERIODS
    message = ""
    failed = None
    a2 = cfg.alpha ** 2

    for t in range(cfg.max_periods):
        anchor = x_init if cfg.fixed_anchor else x
        try:
            y, it, _, obj = _step(x, anchor, seller, buyer, market, cfg)
        except (StepSolverError, PricingError) as exc:
            # a Picard iterate that leaves the pricing domain is a failed step
            status = Status.STEP_SOLVER_FAILURE
            message = f"{type(exc).__name__}: {exc}"
            failed = t + 1
            break
        _, g, pa, pb = obj.evaluate(y)
        dx = y - x
        v = float(dx @ dx) / a2
        states.append(y)
        pas.append(pa)
        pbs.append(pb)
        dlyap.append(v - lyap[-1] if t > 0 else math.nan)
        lyap.append(v)
        viol.append(bool(np.any(y < 0)))
        iters.append(it)
        grads.append(g)
        x = y
        if math.sqrt(float(dx @ dx)) < cfg.convergence_tol:
            status = Status.CONVERGED
            break

    return TrajectoryRecord(
        k=k, alpha=cfg.alpha, beta_scale=cfg.beta_scale,
        states=np.array(states), price_a=np.array(pas), price_b=np.array(pbs),
        lyapunov=np.array(lyap), delta_lyapunov=np.array(dlyap),
        boundary_violation=np.array(viol), solver_iters=np.array(iters),
        step_gradients=np.array(grads), status=status, message=message,
        failed_period=failed, config=cfg)


@dataclass(frozen=True)
class LyapunovReport:
    values: np.ndarray
    deltas: np.ndarray
    lipschitz_estimate: float
    alpha: float
    alpha_threshold: float

    @property
    def violations(self) -> int:
        return int(np.sum(self.deltas >= 0.0))

    @property
    def all_decreasing(self) -> bool:
        return self.violations == 0

    @property
    def within_hypotheses(self) -> bool:
        return self.alpha < self.alpha_threshold


def lyapunov_series(traj: TrajectoryRecord, min_step: float = 1e-8) -> LyapunovReport:
    """V and Delta V along a trajectory, plus the step-size threshold report.

    The threshold is 1 / (1 + beta^2 L^2 / 2) with L an empirical lower bound
    on the Lipschitz constant of x -> G(F(x), x), taken over consecutive
    periods whose displacement exceeds ``min_step`` (smaller ones are
    dominated by rounding).
    """
    if traj.periods < 2:
        raise ValueError("need at least two steps to form Lyapunov differences")
    v = traj.lyapunov[1:]
    dv = traj.delta_lyapunov[2:]
    s = traj.states
    g = traj.step_gradients
    lip = 0.0
    # G(F(x_n), x_n) sits in row n + 1
    for n in range(1, traj.periods):
        dxn = np.linalg.norm(s[n] - s[n - 1])
        if dxn < min_step:
            continue
        lip = max(lip, float(np.linalg.norm(g[n + 1] - g[n]) / dxn))
    thr = 1.0 / (1.0 + traj.beta_scale ** 2 * lip ** 2 / 2.0)
    return LyapunovReport(values=v, deltas=dv, lipschitz_estimate=lip, alpha=traj.alpha,
                          alpha_threshold=thr)


def lyapunov_from_definition(x_next, x, agents, market, cfg: DynamicsConfig, anchor=None) -> float:
    """V(x_next, x) = ||x - Pi[x - beta G(x_next, x)]||^2 evaluated directly."""
    seller, buyer = agents
    x = _as_state(x)
    x_next = _as_state(x_next)
    anchor = x if anchor is None else _as_state(anchor)
    g = PenalizedObjective(anchor, seller, buyer, market, cfg.penalty).gradient(x_next)
    d = x - cfg.projection(x - cfg.beta_scale * g)
    return float(d @ d)


@dataclass(frozen=True)
class FixedPointCertificate:
    price_a: float
    price_b: float
    price_gap: float
    stationarity_norm: float
    interior_margin: float
    interior: bool
    tol: float

    @property
    def passed(self) -> bool:
        return self.interior and self.price_gap < self.tol and self.stationarity_norm < self.tol


def certify_fixed_point(x, agents, market, cfg: DynamicsConfig, tol: float = 1e-6) -> FixedPointCertificate:
    """Check the interior fixed-point conditions at (x, x).

    Reports the price gap, the norm of the tangential part of G(x, x) and
    the smallest belief weight. Boundary states are flagged non-interior and
    never pass: the gradient characterisation only applies in the interior.
    """
    seller, buyer = agents
    xv = _as_state(x)
    _, g, pa, pb = PenalizedObjective(xv, seller, buyer, market, cfg.penalty).evaluate(xv)
    margin = float(xv.min())
    return FixedPointCertificate(
        price_a=pa, price_b=pb, price_gap=abs(pa - pb),
        stationarity_norm=float(np.linalg.norm(tangent_part(g))),
        interior_margin=margin, interior=margin > 0.0, tol=tol)
