"""Property suites run by ``beliefbargain validate``.

Each suite samples with the configured seed and reports the largest
violation against a fixed tolerance. Orbit-based suites are downgraded to
WARN when the step size is outside the stability hypothesis
alpha < 1 / (1 + beta^2 L^2 / 2).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import (DynamicsConfig, certify_fixed_point, generic_pds_step, implicit_step,
                       lyapunov_series, run_trajectory)
from .errors import BargainError
from .functionals import PenalizedObjective, Variant, dominance_check
from .pricing import (price_bounds, price_gradient_beliefs, price_sensitivity_risk,
                      reservation_price)
from .simplex import project_pair, psi_gradient, psi_quadratic
from .utility import ExponentialUtility, validate_utility

PASS, WARN, FAIL = "PASS", "WARN", "FAIL"


@dataclass
class SuiteResult:
    name: str
    samples: int
    max_violation: float
    tol: float
    verdict: str
    note: str = ""


def _verdict(v, tol):
    return PASS if v <= tol else FAIL


def _tangent_dir(rng, k):
    d = rng.standard_normal(k)
    d -= d.mean()
    return d / np.linalg.norm(d)


def _interior(rng, k, n, floor=0.05):
    q = rng.dirichlet(np.ones(k), size=n)
    return floor / k + (1 - floor) * q


def suite_projection(rng, k, n=1000):
    worst = 0.0
    for _ in range(n):
        v = rng.normal(size=2 * k) * 2.0
        p = project_pair(v)
        worst = max(worst, float(np.max(np.abs(project_pair(p) - p))))
        # minimality: any other point z of the affine hull is no closer to v
        z = project_pair(rng.normal(size=2 * k))
        worst = max(worst, float(np.linalg.norm(v - p) - np.linalg.norm(v - z)))
    return SuiteResult("projection idempotent/minimal", n, worst, 1e-12, _verdict(worst, 1e-12))


def suite_utility(cfg):
    bad = []
    for agent in cfg.agents:
        try:
            validate_utility(agent.utility)
        except ValueError as exc:
            bad.append(str(exc))
    return SuiteResult("utility Inada shape", 2, float(len(bad)), 0.0,
                       PASS if not bad else FAIL, "; ".join(bad))


def suite_root_vs_closed(rng, cfg, n=1000):
    worst = 0.0
    count = 0
    for agent in cfg.agents:
        if not isinstance(agent.utility, ExponentialUtility):
            continue
        for q in _interior(rng, cfg.market.k, n, floor=0.0):
            a = reservation_price(agent, cfg.market, q, method="closed")
            b = reservation_price(agent, cfg.market, q, method="root")
            worst = max(worst, abs(a - b))
            count += 1
    return SuiteResult("root finder vs closed form", count, worst, 1e-9, _verdict(worst, 1e-9))


def suite_bounds(rng, cfg, n=1000):
    worst = 0.0
    for agent in cfg.agents:
        lo, hi = price_bounds(agent, cfg.market)
        for q in _interior(rng, cfg.market.k, n, floor=0.0):
            p = reservation_price(agent, cfg.market, q)
            worst = max(worst, lo - p, p - hi)
    worst = max(worst, 0.0)
    return SuiteResult("price bounds containment", 2 * n, worst, 1e-12, _verdict(worst, 1e-12))


def _rel(a, b):
    return abs(a - b) / max(abs(a), abs(b), 1e-8)


def suite_gradients(rng, cfg, n=200, h=1e-6):
    k = cfg.market.k
    mk = cfg.market
    worst = {"price belief gradient": 0.0, "price risk sensitivity": 0.0,
             "psi gradient": 0.0, "penalised gradient": 0.0}
    for _ in range(n):
        d = _tangent_dir(rng, k)
        q = _interior(rng, k, 1)[0]
        for agent in cfg.agents:
            fd = (reservation_price(agent, mk, q + h * d) - reservation_price(agent, mk, q - h * d)) / (2 * h)
            worst["price belief gradient"] = max(worst["price belief gradient"],
                                                 _rel(price_gradient_beliefs(agent, mk, q) @ d, fd))
            r = agent.risk_level + 0.05
            fd = (reservation_price(agent.with_risk(r + h), mk, q)
                  - reservation_price(agent.with_risk(r - h), mk, q)) / (2 * h)
            worst["price risk sensitivity"] = max(
                worst["price risk sensitivity"],
                _rel(price_sensitivity_risk(agent.with_risk(r), mk, q), fd))
        anchor = _interior(rng, k, 1)[0]
        fd = (psi_quadratic(q + h * d, anchor) - psi_quadratic(q - h * d, anchor)) / (2 * h)
        worst["psi gradient"] = max(worst["psi gradient"], _rel(psi_gradient(q, anchor) @ d, fd))
        x = np.concatenate([_interior(rng, k, 1)[0], _interior(rng, k, 1)[0]])
        a = np.concatenate([_interior(rng, k, 1)[0], _interior(rng, k, 1)[0]])
        dd = np.concatenate([_tangent_dir(rng, k), _tangent_dir(rng, k)])
        for variant in Variant:
            obj = PenalizedObjective(a, *cfg.agents, mk, cfg.penalty.replace(variant=variant))
            fd = (obj.value(x + h * dd) - obj.value(x - h * dd)) / (2 * h)
            worst["penalised gradient"] = max(worst["penalised gradient"],
                                              _rel(obj.gradient(x) @ dd, fd))
    return [SuiteResult(f"{name} vs finite differences", n, v, 1e-5, _verdict(v, 1e-5))
            for name, v in worst.items()]


def suite_dominance(rng, cfg, n=10_000):
    """L_P <= L_P^lambda holds exactly when (P_B - T)(T - P_A) <= 0 (quadratic Phi).

    The unconditional inequality is false in general; its violation rate is
    reported as a WARN note, the sign-conditioned form is the checked property.
    """
    k = cfg.market.k
    worst = 0.0
    raw_fail = 0
    for _ in range(n):
        x = np.concatenate([_interior(rng, k, 1, 0.0)[0], _interior(rng, k, 1, 0.0)[0]])
        a = np.concatenate([_interior(rng, k, 1, 0.0)[0], _interior(rng, k, 1, 0.0)[0]])
        lp, lpl = dominance_check(x, a, cfg.agents, cfg.market, cfg.penalty)
        obj = PenalizedObjective(a, *cfg.agents, cfg.market,
                                 cfg.penalty.replace(variant=Variant.LAMBDA_DEPENDENT))
        _, _, pa, pb = obj.evaluate(x, gradient=False)
        t = obj.target
        scale = max(1.0, abs(lp), abs(lpl))
        if lp > lpl + 1e-12 * scale:
            raw_fail += 1
        if (pb - t) * (t - pa) <= 0:
            worst = max(worst, (lp - lpl) / scale)
    verdict = _verdict(worst, 1e-12)
    note = f"unconditional L_P <= L_P^lam fails on {raw_fail}/{n} pairs"
    out = [SuiteResult("penalty dominance (sign-conditioned)", n, max(worst, 0.0), 1e-12, verdict)]
    out.append(SuiteResult("penalty dominance (unconditional)", n, raw_fail / n, 0.0,
                           PASS if raw_fail == 0 else WARN, note))
    return out


def suite_contraction(rng, k, alpha, steps=50):
    x0 = project_pair(rng.dirichlet(np.ones(k), size=2).reshape(-1)) + 0.3 * rng.normal(size=2 * k)
    x = x0.copy()
    d0 = np.linalg.norm(x0 - project_pair(x0))
    # stop while the exterior distance is still far above rounding level
    steps = max(1, min(steps, int(math.log(1e-6 / d0) / math.log(1.0 - alpha))))
    worst = 0.0
    for t in range(1, steps + 1):
        x, _, _ = generic_pds_step(x, lambda y, xx: np.zeros_like(y), alpha)
        dt = np.linalg.norm(x - project_pair(x))
        worst = max(worst, abs(dt - (1 - alpha) ** t * d0) / ((1 - alpha) ** t * d0))
    return SuiteResult("exterior contraction rate", steps, worst, 1e-9, _verdict(worst, 1e-9))


def sampled_threshold(cfg, rng, n=50, radius=1e-3):
    """Step-size bound from a sampled Lipschitz constant of y -> G(y, x0)."""
    obj = PenalizedObjective(cfg.anchors, *cfg.agents, cfg.market, cfg.penalty)
    k = cfg.market.k
    lip = 0.0
    for _ in range(n):
        d = np.concatenate([_tangent_dir(rng, k), _tangent_dir(rng, k)]) * radius
        try:
            g1 = obj.gradient(cfg.anchors + d)
            g2 = obj.gradient(cfg.anchors - d)
        except BargainError:
            continue
        lip = max(lip, float(np.linalg.norm(g1 - g2) / np.linalg.norm(2 * d)))
    b = cfg.dynamics.beta_scale
    return 1.0 / (1.0 + b * b * lip * lip / 2.0), lip


def suite_orbit(rng, cfg, uniqueness_starts=5):
    """Orbit-based checks: invariance, Lyapunov decrease, step uniqueness, certificate."""
    dyn: DynamicsConfig = cfg.dynamics
    k = cfg.market.k
    thr_s, _ = sampled_threshold(cfg, rng)
    gated = WARN if dyn.alpha >= thr_s else FAIL
    results = []
    run_cfg = dyn if dyn.max_periods <= 20_000 else dyn.replace(max_periods=20_000)
    try:
        traj = run_trajectory(cfg.anchors, cfg.agents, cfg.market, run_cfg)
        err = None if traj.status.value != "step_solver_failure" else traj.message
    except BargainError as exc:
        traj, err = None, f"{type(exc).__name__}: {exc}"
    if err is not None:
        note = f"run failed: {err}; alpha={dyn.alpha:g}, sampled threshold {thr_s:.3g}"
        for name in ("orbit invariance", "Lyapunov decrease", "fixed-point certificate"):
            results.append(SuiteResult(name, 0, math.inf, 0.0, gated, note))
    else:
        sums = np.abs(traj.states.reshape(-1, 2, k).sum(axis=2) - 1.0)
        results.append(SuiteResult("orbit invariance", traj.periods + 1, float(sums.max()), 1e-10,
                                   _verdict(float(sums.max()), 1e-10)))
        if traj.periods >= 2:
            rep = lyapunov_series(traj)
            worst = float(np.nanmax(rep.deltas)) if rep.deltas.size else -math.inf
            ok = rep.all_decreasing
            note = (f"alpha={dyn.alpha:g}, threshold {rep.alpha_threshold:.3g} "
                    f"(L~{rep.lipschitz_estimate:.3g}), {rep.violations} violations")
            verdict = PASS if ok else (WARN if not rep.within_hypotheses else FAIL)
            results.append(SuiteResult("Lyapunov decrease", rep.deltas.size, max(worst, 0.0) if not ok
                                       else 0.0, 0.0, verdict, note))
        if traj.converged:
            cert = certify_fixed_point(traj.states[-1], cfg.agents, cfg.market, dyn, tol=1e-6)
            v = max(cert.price_gap, cert.stationarity_norm)
            results.append(SuiteResult("fixed-point certificate", 1, v, 1e-6,
                                       PASS if cert.passed else FAIL,
                                       "" if cert.interior else "terminal state not interior"))
        else:
            results.append(SuiteResult("fixed-point certificate", 0, math.inf, 1e-6, gated,
                                       f"run ended with status {traj.status.value}"))
    # step uniqueness from random warm starts
    ys = []
    try:
        for _ in range(uniqueness_starts):
            y0 = cfg.anchors + 0.05 * np.concatenate([_tangent_dir(rng, k), _tangent_dir(rng, k)])
            ys.append(implicit_step(cfg.anchors, cfg.agents, cfg.market, dyn, y0=y0).to_vector())
        spread = float(np.max(np.ptp(np.array(ys), axis=0)))
        results.append(SuiteResult("step uniqueness", uniqueness_starts, spread, 1e-9,
                                   PASS if spread <= 1e-9 else gated))
    except BargainError as exc:
        results.append(SuiteResult("step uniqueness", len(ys), math.inf, 1e-9, gated,
                                   f"{type(exc).__name__}"))
    return results


def run_all(cfg) -> list[SuiteResult]:
    rng = np.random.default_rng(cfg.seed)
    k = cfg.market.k
    out = [suite_projection(rng, k), suite_utility(cfg), suite_root_vs_closed(rng, cfg),
           suite_bounds(rng, cfg)]
    out += suite_gradients(rng, cfg)
    out += suite_dominance(rng, cfg)
    out.append(suite_contraction(rng, k, cfg.dynamics.alpha))
    out += suite_orbit(rng, cfg)
    return out


def format_table(results) -> str:
    w = max(len(r.name) for r in results)
    lines = [f"{'suite':<{w}}  {'samples':>7}  {'max violation':>13}  {'tol':>8}  verdict"]
    for r in results:
        line = f"{r.name:<{w}}  {r.samples:>7d}  {r.max_violation:>13.3e}  {r.tol:>8.1e}  {r.verdict}"
        if r.note:
            line += f"  ({r.note})"
        lines.append(line)
    return "\n".join(lines)
