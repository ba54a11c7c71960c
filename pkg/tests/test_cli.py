import copy
import csv
import filecmp
from pathlib import Path

import numpy as np
import pytest
import yaml

from beliefbargain.cli import main
from beliefbargain.config import ConfigError, load_config, parse_config

CONFIGS = Path(__file__).resolve().parents[1] / "demos" / "configs"

BASE = {
    "market": {"payoffs": [1.0, 2.0]},
    "agents": {"seller": {"wealth": 0.0, "risk": 0.4, "utility": "exponential", "risk_aversion": 2.0},
               "buyer": {"wealth": 0.0, "risk": 0.3, "utility": "exponential", "risk_aversion": 1.0}},
    "anchors": {"seller": [0.25, 0.75], "buyer": [0.75, 0.25]},
    "penalty": {"variant": "lambda_dependent", "epsilon": 0.1, "lambda": 0.4},
    "dynamics": {"alpha": 0.05},
}


def write(tmp_path, data, name="c.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(data))
    return p


def edited(**paths):
    d = copy.deepcopy(BASE)
    for path, value in paths.items():
        node = d
        keys = path.split("__")
        for k in keys[:-1]:
            node = node.setdefault(k, {})
        node[keys[-1]] = value
    return d


class TestConfig:
    def test_parse(self):
        cfg = parse_config(BASE)
        assert cfg.market.k == 2
        np.testing.assert_array_equal(cfg.anchors, [0.25, 0.75, 0.75, 0.25])
        assert cfg.dynamics.alpha == 0.05 and cfg.penalty.lam == 0.4

    def test_round_trip(self):
        cfg = parse_config(edited(sweep__kind="risks", sweep__r_a={"start": 0, "stop": 0.2, "num": 3},
                                  sweep__r_b=[0.0, 0.1]))
        again = parse_config(yaml.safe_load(cfg.dump()))
        assert again.raw == cfg.raw
        np.testing.assert_array_equal(again.sweep.r_a, [0.0, 0.1, 0.2])

    def test_string_exponent(self):
        cfg = parse_config(edited(dynamics__step_solver_tol="1e-12"))
        assert cfg.dynamics.step_solver_tol == 1e-12

    @pytest.mark.parametrize("path,value,field", [
        ("market__payoffs", [1.0, 1.0], "market.payoffs"),
        ("anchors__seller", [0.3, 0.6], "anchors.seller"),
        ("anchors__buyer", [1.2, -0.2], "anchors.buyer"),
        ("anchors__buyer", [0.2, 0.3, 0.5], "anchors.buyer"),
        ("dynamics__alpha", 1.0, "dynamics.alpha"),
        ("penalty__epsilon", 0.0, "penalty.epsilon"),
        ("penalty__lambda", 1.5, "penalty.lambda"),
        ("penalty__variant", "both", "penalty.variant"),
        ("agents__seller__risk", -0.1, "agents.seller.risk"),
        ("agents__buyer__risk_aversion", 0.0, "agents.buyer.risk_aversion"),
        ("agents__buyer__utility", "log", "agents.buyer.utility"),
        ("sweep__lambda", [0.5, 0.1], "sweep.lambda"),
        ("dynamics__fixed_anchor", "yes", "dynamics.fixed_anchor"),
    ])
    def test_rejections_name_field(self, path, value, field):
        with pytest.raises(ConfigError) as info:
            parse_config(edited(**{path: value}))
        assert info.value.path == field

    def test_missing_section(self):
        d = copy.deepcopy(BASE)
        del d["anchors"]
        with pytest.raises(ConfigError, match="anchors"):
            parse_config(d)

    def test_overrides(self):
        cfg = parse_config(BASE).with_overrides(seed=9, fixed_anchor=True, clamped_projection=False)
        assert cfg.seed == 9 and cfg.dynamics.fixed_anchor and not cfg.dynamics.clamped_projection

    def test_shipped_configs_parse(self):
        paths = sorted(CONFIGS.glob("*.yaml"))
        assert len(paths) >= 10
        for p in paths:
            load_config(p)


class TestCommands:
    def test_price(self, tmp_path, capsys):
        assert main(["price", "--config", str(write(tmp_path, BASE))]) == 0
        out = capsys.readouterr().out
        assert "P_A = 1.58432754537 " in out and "P_B = 1.43437532522 " in out
        assert "feasible = true" in out

    def test_price_zero_risk_within_payoffs(self, tmp_path, capsys):
        p = write(tmp_path, edited(agents__seller__risk=0.0, agents__buyer__risk=0.0))
        assert main(["price", "--config", str(p)]) == 0
        vals = [float(l.split("=")[1].split()[0]) for l in capsys.readouterr().out.splitlines()[:2]]
        assert all(1.0 <= v <= 2.0 for v in vals)

    def test_price_infeasible(self, tmp_path, capsys):
        p = write(tmp_path, edited(agents__seller__risk=5.0, agents__buyer__risk=5.0))
        assert main(["price", "--config", str(p)]) == 1
        assert "risk gap sum" in capsys.readouterr().out

    def test_config_error_exit(self, tmp_path, capsys):
        p = write(tmp_path, edited(market__payoffs=[2.0, 2.0]))
        assert main(["price", "--config", str(p)]) == 2
        assert "market.payoffs" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["price", "--config", str(tmp_path / "nope.yaml")]) == 2

    def test_bad_anchor_fails_before_validate(self, tmp_path, capsys):
        p = write(tmp_path, edited(anchors__seller=[0.3, 0.6]))
        assert main(["validate", "--config", str(p)]) == 2
        assert "suite" not in capsys.readouterr().out

    def test_simulate(self, tmp_path, capsys):
        p = write(tmp_path, BASE)
        assert main(["simulate", "--config", str(p), "--out", str(tmp_path / "o")]) == 0
        out = capsys.readouterr().out
        assert "status=converged" in out and "certificate=pass" in out
        rows = list(csv.DictReader(open(tmp_path / "o" / "run.trajectory.csv")))
        pa = np.array([float(r["price_a"]) for r in rows])
        pb = np.array([float(r["price_b"]) for r in rows])
        assert np.all(np.diff(pa) <= 1e-10) and np.all(np.diff(pb) >= -1e-10)
        echo = load_config(tmp_path / "o" / "run.config.yaml")
        assert echo.raw["output"]["dir"] == str(tmp_path / "o")

    def test_simulate_zero_periods(self, tmp_path):
        p = write(tmp_path, edited(dynamics__max_periods=0))
        assert main(["simulate", "--config", str(p), "--out", str(tmp_path)]) == 0
        assert len((tmp_path / "run.trajectory.csv").read_text().splitlines()) == 2

    def test_simulate_failure_exit(self, tmp_path, capsys):
        p = write(tmp_path, edited(dynamics__alpha=0.99, penalty__epsilon=1e-4))
        assert main(["simulate", "--config", str(p), "--out", str(tmp_path)]) == 1
        assert "at period 1" in capsys.readouterr().out

    def test_flags_reach_dynamics(self, tmp_path):
        p = write(tmp_path, BASE)
        main(["simulate", "--config", str(p), "--out", str(tmp_path), "--fixed-anchor",
              "--clamped-projection", "--explicit-scheme"])
        echo = yaml.safe_load((tmp_path / "run.config.yaml").read_text())
        assert echo["dynamics"]["fixed_anchor"] and echo["dynamics"]["explicit_scheme"]
        assert echo["dynamics"]["clamped_projection"]

    def test_simulate_deterministic(self, tmp_path):
        p = write(tmp_path, BASE)
        main(["simulate", "--config", str(p), "--out", str(tmp_path / "a")])
        main(["simulate", "--config", str(p), "--out", str(tmp_path / "b")])
        assert filecmp.cmp(tmp_path / "a" / "run.trajectory.csv", tmp_path / "b" / "run.trajectory.csv",
                           shallow=False)

    def test_sweep_lambda(self, tmp_path, capsys):
        p = write(tmp_path, edited(sweep__kind="lambda", sweep__lambda={"start": 0, "stop": 1, "num": 5}))
        assert main(["sweep", "--config", str(p), "--out", str(tmp_path), "--workers", "1"]) == 0
        rows = list(csv.DictReader(open(tmp_path / "run.sweep.csv")))
        prices = [float(r["price_star"]) for r in rows]
        assert np.all(np.diff(prices) >= -1e-8)
        assert (tmp_path / "run.sweep.gp").exists()

    def test_sweep_infeasible_corner(self, tmp_path, capsys):
        p = write(tmp_path, edited(sweep__kind="risks", sweep__r_a=[0.0, 5.0], sweep__r_b=[0.0, 3.0]))
        assert main(["sweep", "--config", str(p), "--out", str(tmp_path), "--workers", "1"]) == 0
        status = [r["status"] for r in csv.DictReader(open(tmp_path / "run.sweep.csv"))]
        assert status == ["ok", "infeasible", "infeasible", "infeasible"]

    def test_sweep_deterministic_across_workers(self, tmp_path):
        p = write(tmp_path, edited(sweep__kind="risks", sweep__r_a=[0.0, 0.1, 0.2], sweep__r_b=[0.0, 0.2]))
        main(["sweep", "--config", str(p), "--out", str(tmp_path / "a"), "--workers", "1"])
        main(["sweep", "--config", str(p), "--out", str(tmp_path / "b"), "--workers", "3"])
        assert filecmp.cmp(tmp_path / "a" / "run.sweep.csv", tmp_path / "b" / "run.sweep.csv", shallow=False)

    def test_risk_sweep_requires_axes(self, tmp_path):
        p = write(tmp_path, edited(sweep__kind="risks", sweep__r_a=[0.0]))
        assert main(["sweep", "--config", str(p), "--out", str(tmp_path)]) == 2

    def test_print_config(self, tmp_path, capsys):
        p = write(tmp_path, BASE)
        main(["price", "--config", str(p), "--print-config"])
        text = capsys.readouterr().out
        echoed = yaml.safe_load(text.split("P_A")[0])
        assert parse_config(echoed).raw == parse_config(BASE).raw
