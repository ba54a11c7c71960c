"""What does each side's exposure to risk do to the agreed price?

``r`` is the utility an agent is willing to give up on the trade. Raising
the seller's ``r`` lowers the ask and raising the buyer's ``r`` lifts the
bid, so both narrow the gap. The agreed price comes from both sides revising
beliefs, though, and its response need not be monotone. With ``r_B = 0`` the
price first rises and then falls in ``r_A``; at ``r_B = 0.2`` it only falls.

Past a threshold the seller's highest possible ask drops below the buyer's
lowest possible bid, and the original beliefs already agree.
"""
import os
from pathlib import Path

import numpy as np

from beliefbargain import classify_monotonicity, risk_threshold, sweep_risks
from beliefbargain.solver import plot_script, write_sweep_csv

from _common import banner, config

workers = os.cpu_count() or 1


def run(name):
    cfg = config(name)
    res = sweep_risks(cfg.anchors, cfg.agents, cfg.market, cfg.dynamics, cfg.sweep.r_a,
                      cfg.sweep.r_b, provenance=cfg.sweep.provenance, workers=workers)
    d = Path(cfg.output_dir)
    d.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(res, d / f"{name}.sweep.csv")
    (d / f"{name}.sweep.gp").write_text(plot_script(res, f"{name}.sweep.csv"))
    return cfg, res


banner("Sections in the seller's risk r_A")
cfg, res = run("risk_sections_ra")
for rb in cfg.sweep.r_b:
    s = res.section(r_b=rb)
    i = int(np.argmax(s))
    print(f"r_B = {rb:.1f}: {classify_monotonicity(s)}, from {s[0]:.5f} to {s[-1]:.5f}, "
          f"highest {s[i]:.5f} at r_A = {cfg.sweep.r_a[i]:.2f}")

banner("Sections in the buyer's risk r_B")
cfg, res = run("risk_sections_rb")
for ra in cfg.sweep.r_a:
    s = res.section(r_a=ra)
    print(f"r_A = {ra:.1f}: {classify_monotonicity(s)}, from {s[0]:.5f} to {s[-1]:.5f}")

banner("The whole surface")
cfg, res = run("risk_surface")
surf = res.surface()
print(f"{surf.shape[0]} x {surf.shape[1]} grid, price range [{np.nanmin(surf):.5f}, {np.nanmax(surf):.5f}]")
print("statuses: " + ", ".join(f"{s} {res.statuses.count(s)}" for s in sorted(set(res.statuses))))
print(f"gnuplot: cd {cfg.output_dir} && gnuplot -p risk_surface.sweep.gp")

banner("Beyond the agreement threshold")
cfg, res = run("infeasible_corner")
print(f"largest seller risk with agreement possible, at r_B = 0: "
      f"{risk_threshold(cfg.seller, cfg.buyer.with_risk(0.0), cfg.market):.4f}")
for pt in res.points:
    print(f"  r_A {pt.r_a:3.0f}  r_B {pt.r_b:3.0f}  {pt.status}")
