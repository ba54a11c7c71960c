"""Optimal agreement beliefs, asymptotic prices and parameter sweeps.

``solve_primal`` minimises lam*psi_A + (1-lam)*psi_B subject to
P_A <= P_B by penalty continuation in eps followed by a Newton polish of the
Lagrange system. ``brute_force_primal_k2`` is an independent grid oracle for
two-state markets.
"""
from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.linalg import null_space

from .dynamics import DynamicsConfig, run_trajectory
from .errors import BargainError, ConvergenceError, PricingError
from .functionals import PenalizedObjective, PenaltyConfig, Variant
from .pricing import agreement_feasible, price_and_gradient, reservation_price
from .simplex import BeliefState, tangent_part

DEFAULT_SCHEDULE = (0.1, 0.01, 1e-3, 1e-4)


@dataclass
class PrimalSolution:
    q_a_star: np.ndarray
    q_b_star: np.ndarray
    price_star: float
    objective: float
    constraint_residual: float
    kkt_multiplier_estimate: float
    status: str = "ok"
    history: list = field(default_factory=list)

    @property
    def state(self) -> BeliefState:
        return BeliefState(self.q_a_star, self.q_b_star)


def _vec(x):
    if isinstance(x, BeliefState):
        return x.to_vector()
    return np.asarray(x, dtype=float).reshape(-1)


def _deviation(x, anchors, lam, k):
    da = x[:k] - anchors[:k]
    db = x[k:] - anchors[k:]
    return 0.5 * lam * float(da @ da) + 0.5 * (1.0 - lam) * float(db @ db)


def _tangent_basis(k):
    n = null_space(np.ones((1, k)))
    b = np.zeros((2 * k, 2 * (k - 1)))
    b[:k, :k - 1] = n
    b[k:, k - 1:] = n
    return b


def minimize_penalized(anchors, agents, market, lam, epsilon, start=None, gtol=1e-9,
                       maxiter=2000):
    """Minimise the lambda-independent penalised functional over the affine hull.

    Works in orthonormal tangent coordinates with BFGS. Returns
    ``(x, tangential_gradient_norm)``.
    """
    seller, buyer = agents
    anchors = _vec(anchors)
    k = market.k
    cfg = PenaltyConfig(epsilon, lam, Variant.LAMBDA_INDEPENDENT)
    obj = PenalizedObjective(anchors, seller, buyer, market, cfg)
    basis = _tangent_basis(k)
    x_ref = anchors if start is None else _vec(start)

    def fun(z):
        x = x_ref + basis @ z
        try:
            val, g, _, _ = obj.evaluate(x)
        except PricingError:
            return math.inf, np.zeros_like(z)
        return val, basis.T @ g

    # the penalty curvature is O(1/eps); an unscaled first step would leave the
    # region where prices exist, so the initial inverse Hessian is scaled by eps
    n = basis.shape[1]
    res = optimize.minimize(fun, np.zeros(n), jac=True, method="BFGS",
                            options={"gtol": gtol, "maxiter": maxiter,
                                     "hess_inv0": min(1.0, epsilon) * np.eye(n)})
    x = x_ref + basis @ res.x
    return x, float(np.linalg.norm(basis.T @ obj.gradient(x)))


def _kkt_polish(x, mu, anchors, agents, market, lam):
    seller, buyer = agents
    k = market.k

    def system(u):
        xa, xb, m, na, nb = u[:k], u[k:2 * k], u[2 * k], u[2 * k + 1], u[2 * k + 2]
        pa, ga = price_and_gradient(seller, market, xa)
        pb, gb = price_and_gradient(buyer, market, xb)
        return np.concatenate([
            lam * (xa - anchors[:k]) + m * ga + na,
            (1.0 - lam) * (xb - anchors[k:]) - m * gb + nb,
            [xa.sum() - 1.0, xb.sum() - 1.0, pa - pb],
        ])

    _, ga = price_and_gradient(seller, market, x[:k])
    _, gb = price_and_gradient(buyer, market, x[k:])
    na = -np.mean(lam * (x[:k] - anchors[:k]) + mu * ga)
    nb = -np.mean((1.0 - lam) * (x[k:] - anchors[k:]) - mu * gb)
    sol = optimize.root(system, np.concatenate([x, [mu, na, nb]]), method="hybr",
                        options={"xtol": 1e-14})
    ok = sol.success or np.max(np.abs(sol.fun)) < 1e-11
    return sol.x[:2 * k], float(sol.x[2 * k]), ok


def _multiplier_ratio(x, anchors, agents, market, lam):
    seller, buyer = agents
    k = market.k
    _, ga = price_and_gradient(seller, market, x[:k])
    _, gb = price_and_gradient(buyer, market, x[k:])
    dev = tangent_part(np.concatenate([lam * (x[:k] - anchors[:k]),
                                       (1.0 - lam) * (x[k:] - anchors[k:])]))
    pg = tangent_part(np.concatenate([ga, -gb]))
    n = np.linalg.norm(pg)
    return float(np.linalg.norm(dev) / n) if n > 0 else math.nan


def solve_primal(anchors, agents, market, lam, schedule=DEFAULT_SCHEDULE, polish=True,
                 gtol=1e-9) -> PrimalSolution:
    """Optimal agreement beliefs by penalty continuation.

    Each eps in ``schedule`` is warm-started from the previous minimiser. With
    ``polish`` the last iterate seeds a Newton solve of the Lagrange system so
    the price constraint binds to rounding. ``lam`` in {0, 1} is accepted but
    the result is flagged ``status="endpoint"``: uniqueness needs 0 < lam < 1.
    """
    seller, buyer = agents
    anchors = _vec(anchors)
    k = market.k
    pa0 = reservation_price(seller, market, anchors[:k])
    pb0 = reservation_price(buyer, market, anchors[k:])
    if pa0 <= pb0:
        return PrimalSolution(anchors[:k].copy(), anchors[k:].copy(), pa0, 0.0, 0.0, 0.0,
                              status="anchors_feasible")
    x = anchors.copy()
    history = []
    status = "ok"
    eps = schedule[-1]
    for eps in schedule:
        x, gnorm = minimize_penalized(anchors, agents, market, lam, eps, start=x, gtol=gtol)
        pa, _ = price_and_gradient(seller, market, x[:k])
        pb, _ = price_and_gradient(buyer, market, x[k:])
        history.append((eps, _deviation(x, anchors, lam, k), abs(pa - pb), gnorm))
        # the penalised Hessian grows like 1/eps, so does the attainable gradient floor
        if not polish and (not np.isfinite(gnorm) or gnorm > 1e3 * gtol / min(1.0, eps)):
            status = "stalled"
    mu = 2.0 * (pa - pb) / eps
    if polish:
        # a converged Lagrange solve near the last iterate certifies stationarity
        xp, mu_p, ok = _kkt_polish(x, mu, anchors, agents, market, lam)
        if ok and np.all(np.isfinite(xp)) and np.linalg.norm(xp - x) < 1e-2:
            x = xp
        else:
            status = "stalled"
    pa, _ = price_and_gradient(seller, market, x[:k])
    pb, _ = price_and_gradient(buyer, market, x[k:])
    if lam in (0.0, 1.0) and status == "ok":
        status = "endpoint"
    return PrimalSolution(
        q_a_star=x[:k].copy(), q_b_star=x[k:].copy(), price_star=0.5 * (pa + pb),
        objective=_deviation(x, anchors, lam, k), constraint_residual=abs(pa - pb),
        kkt_multiplier_estimate=_multiplier_ratio(x, anchors, agents, market, lam),
        status=status, history=history)


def _bisect_belief(fun, lo=0.0, hi=1.0, xtol=1e-15, maxiter=200):
    flo = fun(lo)
    fhi = fun(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo > 0) == (fhi > 0):
        return None
    for _ in range(maxiter):
        mid = 0.5 * (lo + hi)
        fm = fun(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo < xtol:
            break
    return 0.5 * (lo + hi)


def brute_force_primal_k2(anchors, agents, market, lam, grid_n=2001, refine=True) -> PrimalSolution:
    """Grid-scan oracle for two-state markets.

    Scans first components (Q_A^1, Q_B^1) on a ``grid_n`` x ``grid_n`` grid,
    keeps points with P_A <= P_B, then refines the best one along the
    agreement curve: for each Q_A^1 the matching Q_B^1 is found by bisection
    and the deviation is minimised over a two-cell window.
    """
    seller, buyer = agents
    if market.k != 2:
        raise ValueError("brute force oracle is for K = 2 only")
    if grid_n < 101:
        raise ValueError("grid_n must be >= 101")
    anchors = _vec(anchors)
    pa0 = reservation_price(seller, market, anchors[:2])
    pb0 = reservation_price(buyer, market, anchors[2:])
    if pa0 <= pb0:
        return PrimalSolution(anchors[:2].copy(), anchors[2:].copy(), pa0, 0.0, 0.0, 0.0,
                              status="anchors_feasible")
    g = np.linspace(0.0, 1.0, grid_n)
    pa = np.array([reservation_price(seller, market, [a, 1.0 - a]) for a in g])
    pb = np.array([reservation_price(buyer, market, [b, 1.0 - b]) for b in g])
    dev_a = lam * (g - anchors[0]) ** 2        # psi over both components = (diff)^2 for K=2
    dev_b = (1.0 - lam) * (g - anchors[2]) ** 2
    total = dev_a[:, None] + dev_b[None, :]
    total[pa[:, None] > pb[None, :]] = np.inf
    flat = int(np.argmin(total))
    if not np.isfinite(total.flat[flat]):
        return PrimalSolution(anchors[:2].copy(), anchors[2:].copy(), math.nan, math.nan,
                              math.nan, math.nan, status="infeasible")
    i, j = np.unravel_index(flat, total.shape)
    a_best, b_best = g[i], g[j]

    def b_of(a):
        target = reservation_price(seller, market, [a, 1.0 - a])
        return _bisect_belief(lambda b: reservation_price(buyer, market, [b, 1.0 - b]) - target)

    if refine:
        # the grid optimum can sit several cells off the curve optimum because
        # the grid only approximates the curve in the second coordinate
        h = 1.0 / (grid_n - 1)
        lo, hi = max(0.0, a_best - 25 * h), min(1.0, a_best + 25 * h)

        def cost(a):
            b = b_of(a)
            if b is None:
                return 1e3 + abs(a - a_best)
            return lam * (a - anchors[0]) ** 2 + (1.0 - lam) * (b - anchors[2]) ** 2

        res = optimize.minimize_scalar(cost, bounds=(lo, hi), method="bounded",
                                       options={"xatol": 1e-13})
        if res.fun < 1e3 and res.fun <= total[i, j]:
            a_best = float(res.x)
            b_best = b_of(a_best)
    qa = np.array([a_best, 1.0 - a_best])
    qb = np.array([b_best, 1.0 - b_best])
    p_a = reservation_price(seller, market, qa)
    p_b = reservation_price(buyer, market, qb)
    x = np.concatenate([qa, qb])
    return PrimalSolution(qa, qb, 0.5 * (p_a + p_b), _deviation(x, anchors, lam, 2),
                          abs(p_a - p_b), math.nan, status="ok")


def _asymptotic(x0, agents, market, cfg: DynamicsConfig):
    traj = run_trajectory(x0, agents, market, cfg)
    return traj.price_a[-1], traj.price_b[-1], traj


def asymptotic_price(x0, agents, market, cfg: DynamicsConfig, tol: float = 1e-6) -> float:
    """Common terminal price of a converged bargaining orbit.

    Raises :class:`ConvergenceError` if the run does not converge or the two
    terminal prices differ by more than ``tol``.
    """
    pa, pb, traj = _asymptotic(x0, agents, market, cfg)
    if not traj.converged:
        raise ConvergenceError(f"trajectory ended with status {traj.status.value} "
                               f"after {traj.periods} periods")
    if abs(pa - pb) > tol:
        raise ConvergenceError(f"terminal prices differ by {abs(pa - pb):.3e}")
    return float(pa)


@dataclass(frozen=True)
class SweepPoint:
    lam: float
    r_a: float
    r_b: float
    price_star: float
    objective: float
    constraint_residual: float
    status: str


@dataclass
class SweepResult:
    provenance: str
    axes: dict
    points: list

    @property
    def prices(self) -> np.ndarray:
        return np.array([p.price_star for p in self.points])

    @property
    def statuses(self) -> list:
        return [p.status for p in self.points]

    def surface(self) -> np.ndarray:
        """Prices reshaped to (len(r_a grid), len(r_b grid)) for risk sweeps."""
        ra, rb = self.axes["r_a"], self.axes["r_b"]
        return self.prices.reshape(len(ra), len(rb))

    def section(self, r_a=None, r_b=None) -> np.ndarray:
        """Prices along one axis with the other risk level fixed at a grid value."""
        surf = self.surface()
        if r_b is not None:
            j = int(np.argmin(np.abs(np.asarray(self.axes["r_b"]) - r_b)))
            return surf[:, j]
        if r_a is not None:
            i = int(np.argmin(np.abs(np.asarray(self.axes["r_a"]) - r_a)))
            return surf[i, :]
        raise ValueError("give r_a or r_b")


def classify_monotonicity(values, tol=1e-10) -> str:
    """'increasing', 'decreasing', 'constant' or 'non-monotone' (strict, up to tol)."""
    d = np.diff(np.asarray(values, dtype=float))
    if d.size == 0 or np.all(np.abs(d) <= tol):
        return "constant"
    if np.all(d > tol):
        return "increasing"
    if np.all(d < -tol):
        return "decreasing"
    return "non-monotone"


def _check_grid(grid, name):
    g = np.asarray(grid, dtype=float).reshape(-1)
    if g.size == 0 or (g.size > 1 and not np.all(np.diff(g) > 0)):
        raise ValueError(f"{name} grid must be non-empty and strictly increasing")
    return g


def _lambda_point(args):
    x0, agents, market, cfg, lam, provenance = args
    seller, buyer = agents
    k = market.k
    x0 = _vec(x0)
    try:
        if provenance == "dynamics":
            c = cfg.with_lambda(lam)
            pa, pb, traj = _asymptotic(x0, agents, market, c)
            xs = traj.states[-1]
            status = "ok" if traj.converged else traj.status.value
            return SweepPoint(lam, seller.risk_level, buyer.risk_level, float(pa),
                              _deviation(xs, x0, lam, k), abs(pa - pb), status)
        sol = solve_primal(x0, agents, market, lam)
        return SweepPoint(lam, seller.risk_level, buyer.risk_level, sol.price_star,
                          sol.objective, sol.constraint_residual, sol.status)
    except BargainError as exc:
        return SweepPoint(lam, seller.risk_level, buyer.risk_level, math.nan, math.nan,
                          math.nan, f"error:{type(exc).__name__}")


def _risk_point(args):
    x0, agents, market, cfg, lam, ra, rb, provenance = args
    seller, buyer = agents
    s, b = seller.with_risk(ra), buyer.with_risk(rb)
    if not agreement_feasible(s, b, market):
        return SweepPoint(lam, ra, rb, math.nan, math.nan, math.nan, "infeasible")
    p = _lambda_point((x0, (s, b), market, cfg, lam, provenance))
    return p


def _map(fn, tasks, workers):
    if workers is None:
        workers = os.cpu_count() or 1
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def sweep_lambda(x0, agents, market, cfg: DynamicsConfig, lambda_grid, provenance="dynamics",
                 workers=1) -> SweepResult:
    """Asymptotic (``dynamics``) or optimal (``continuation``) price against lambda."""
    if provenance not in ("dynamics", "continuation"):
        raise ValueError(f"unknown provenance {provenance!r}")
    grid = _check_grid(lambda_grid, "lambda")
    if grid.min() < 0 or grid.max() > 1:
        raise ValueError("lambda grid must lie in [0, 1]")
    x0 = _vec(x0)
    tasks = [(x0, agents, market, cfg, float(l), provenance) for l in grid]
    points = _map(_lambda_point, tasks, workers)
    return SweepResult(provenance, {"lambda": grid.tolist()}, points)


def sweep_risks(x0, agents, market, cfg: DynamicsConfig, ra_grid, rb_grid,
                provenance="continuation", workers=1) -> SweepResult:
    """Price surface over (r_A, r_B); lambda comes from ``cfg.penalty.lam``.

    Points failing the agreement condition are marked ``infeasible`` rather
    than aborting the sweep. Rows are ordered r_A-major.
    """
    if provenance not in ("dynamics", "continuation"):
        raise ValueError(f"unknown provenance {provenance!r}")
    ra = _check_grid(ra_grid, "r_a")
    rb = _check_grid(rb_grid, "r_b")
    lam = cfg.penalty.lam
    x0 = _vec(x0)
    tasks = [(x0, agents, market, cfg, lam, float(a), float(b), provenance) for a in ra for b in rb]
    points = _map(_risk_point, tasks, workers)
    return SweepResult(provenance, {"r_a": ra.tolist(), "r_b": rb.tolist(), "lambda": [lam]}, points)


SWEEP_HEADER = ["lambda", "r_a", "r_b", "price_star", "objective", "constraint_residual", "status"]


def write_sweep_csv(result: SweepResult, dest) -> None:
    def rows():
        for p in result.points:
            yield [f"{p.lam:.17g}", f"{p.r_a:.17g}", f"{p.r_b:.17g}", f"{p.price_star:.17g}",
                   f"{p.objective:.17g}", f"{p.constraint_residual:.17g}", p.status]

    if hasattr(dest, "write"):
        w = csv.writer(dest, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        w.writerows(rows())
        return
    with open(dest, "w", newline="", encoding="utf-8") as fh:
        write_sweep_csv(result, fh)


def plot_script(result: SweepResult, csv_name: str) -> str:
    """A gnuplot script that renders the sweep CSV."""
    lines = ["# gnuplot script; run: gnuplot -p <this file>",
             "set datafile separator ','",
             "set key autotitle columnhead"]
    if "r_a" in result.axes:
        lines += ["set xlabel 'r_A'", "set ylabel 'r_B'", "set zlabel 'P*'",
                  f"set dgrid3d {len(result.axes['r_a'])},{len(result.axes['r_b'])}",
                  "set hidden3d",
                  f"splot '{csv_name}' using 2:3:4 with lines title 'P*(r_A, r_B)'"]
    else:
        lines += ["set xlabel 'lambda'", "set ylabel 'P*'",
                  f"plot '{csv_name}' using 1:4 with linespoints title 'P*(lambda)'"]
    return "\n".join(lines) + "\n"
