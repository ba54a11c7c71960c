"""Command-line driver.

    beliefbargain price    --config run.yaml
    beliefbargain simulate --config run.yaml --out results/
    beliefbargain sweep    --config run.yaml --out results/ --workers 4
    beliefbargain validate --config run.yaml --seed 7

Exit codes: 0 success, 1 runtime or solver failure, 2 configuration error.
"""
from __future__ import annotations

import argparse
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, load_config
from .dynamics import Status, certify_fixed_point, run_trajectory, write_trajectory_csv
from .errors import BargainError
from .pricing import agreement_feasible, feasibility_sides, price_bounds, reservation_price
from .solver import classify_monotonicity, plot_script, sweep_lambda, sweep_risks, write_sweep_csv
from .validation import FAIL, format_table, run_all

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2


def _g(x) -> str:
    return f"{x:.12g}"


def _out_dir(cfg: ExperimentConfig) -> Path:
    d = Path(cfg.output_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _write_echo(cfg: ExperimentConfig, d: Path) -> None:
    (d / f"{cfg.output_prefix}.config.yaml").write_text(cfg.dump(), encoding="utf-8")


def cmd_price(cfg: ExperimentConfig, out=None) -> int:
    out = out or sys.stdout
    k = cfg.market.k
    feasible = agreement_feasible(cfg.seller, cfg.buyer, cfg.market)
    for label, agent, q in (("P_A", cfg.seller, cfg.anchors[:k]), ("P_B", cfg.buyer, cfg.anchors[k:])):
        lo, hi = price_bounds(agent, cfg.market)
        p = reservation_price(agent, cfg.market, q)
        print(f"{label} = {_g(p)}  bounds [{_g(lo)}, {_g(hi)}]", file=out)
    lhs, rhs = feasibility_sides(cfg.seller, cfg.buyer, cfg.market)
    print(f"feasible = {'true' if feasible else 'false'}", file=out)
    if not feasible:
        print(f"agreement condition fails: max F - min F = {_g(lhs)} <= risk gap sum = {_g(rhs)}",
              file=out)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_simulate(cfg: ExperimentConfig, out=None) -> int:
    out = out or sys.stdout
    d = _out_dir(cfg)
    _write_echo(cfg, d)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        traj = run_trajectory(cfg.anchors, cfg.agents, cfg.market, cfg.dynamics)
    for w in caught:
        print(f"warning: {w.message}", file=out)
    path = d / f"{cfg.output_prefix}.trajectory.csv"
    write_trajectory_csv(traj, path)
    cert = certify_fixed_point(traj.states[-1], cfg.agents, cfg.market, cfg.dynamics)
    print(f"status={traj.status.value} periods={traj.periods} "
          f"price_a={_g(traj.price_a[-1])} price_b={_g(traj.price_b[-1])} "
          f"certificate={'pass' if cert.passed else 'fail'} "
          f"boundary_violations={int(traj.boundary_violation.sum())}", file=out)
    print(f"wrote {path}", file=out)
    if traj.status is Status.STEP_SOLVER_FAILURE:
        print(f"step solver failed at period {traj.failed_period}: {traj.message}", file=out)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_sweep(cfg: ExperimentConfig, workers=None, out=None) -> int:
    out = out or sys.stdout
    axes = cfg.sweep
    x0 = cfg.anchors
    if axes.kind == "lambda":
        grid = axes.lam if axes.lam is not None else np.linspace(0.0, 1.0, 21)
        res = sweep_lambda(x0, cfg.agents, cfg.market, cfg.dynamics, grid, axes.provenance, workers)
    else:
        if axes.r_a is None or axes.r_b is None:
            raise ConfigError("sweep", "risk sweeps need both r_a and r_b grids")
        res = sweep_risks(x0, cfg.agents, cfg.market, cfg.dynamics, axes.r_a, axes.r_b,
                          axes.provenance, workers)
    d = _out_dir(cfg)
    _write_echo(cfg, d)
    csv_path = d / f"{cfg.output_prefix}.sweep.csv"
    write_sweep_csv(res, csv_path)
    gp_path = d / f"{cfg.output_prefix}.sweep.gp"
    gp_path.write_text(plot_script(res, csv_path.name), encoding="utf-8")
    statuses = res.statuses
    n_ok = sum(s in ("ok", "endpoint", "anchors_feasible") for s in statuses)
    print(f"provenance={res.provenance} points={len(statuses)} ok={n_ok} "
          f"infeasible={statuses.count('infeasible')}", file=out)
    if axes.kind == "lambda":
        print(f"price_star in lambda: {classify_monotonicity(res.prices)}", file=out)
    else:
        surf = res.surface()
        for j, rb in enumerate(axes.r_b):
            col = surf[:, j]
            if np.all(np.isfinite(col)) and col.size > 2:
                print(f"section r_b={_g(rb)}: {classify_monotonicity(col)} in r_a", file=out)
        for i, ra in enumerate(axes.r_a):
            row = surf[i, :]
            if np.all(np.isfinite(row)) and row.size > 2:
                print(f"section r_a={_g(ra)}: {classify_monotonicity(row)} in r_b", file=out)
    print(f"wrote {csv_path} and {gp_path}", file=out)
    return EXIT_OK


def cmd_validate(cfg: ExperimentConfig, out=None) -> int:
    out = out or sys.stdout
    results = run_all(cfg)
    print(format_table(results), file=out)
    failed = [r.name for r in results if r.verdict == FAIL]
    print(f"{len(results) - len(failed)}/{len(results)} suites without failure", file=out)
    return EXIT_RUNTIME if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="YAML experiment file")
    common.add_argument("--out", help="output directory (overrides output.dir)")
    common.add_argument("--seed", type=int, help="random seed for the property suites")
    common.add_argument("--workers", type=int, default=os.cpu_count() or 1,
                        help="worker processes for sweeps (default: number of processors)")
    common.add_argument("--fixed-anchor", action="store_true",
                        help="measure deviations from the initial beliefs throughout")
    common.add_argument("--clamped-projection", action="store_true",
                        help="project onto the simplex itself instead of its affine hull")
    common.add_argument("--explicit-scheme", action="store_true",
                        help="forward (explicit) step instead of the implicit one")
    common.add_argument("--print-config", action="store_true",
                        help="print the resolved configuration before running")
    p = argparse.ArgumentParser(prog="beliefbargain",
                                description="Belief bargaining over a contingent claim.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("price", parents=[common], help="reservation prices and feasibility")
    sub.add_parser("simulate", parents=[common], help="run the bargaining dynamics")
    sub.add_parser("sweep", parents=[common], help="asymptotic price over a parameter grid")
    sub.add_parser("validate", parents=[common], help="run the property suites")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.workers is not None and args.workers < 1:
            raise ConfigError("--workers", "must be >= 1")
        cfg = load_config(args.config).with_overrides(
            seed=args.seed, output_dir=args.out, fixed_anchor=args.fixed_anchor,
            clamped_projection=args.clamped_projection, explicit_scheme=args.explicit_scheme)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.print_config:
        print(cfg.dump(), end="")
    try:
        if args.command == "price":
            return cmd_price(cfg)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "sweep":
            return cmd_sweep(cfg, workers=args.workers)
        return cmd_validate(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BargainError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
