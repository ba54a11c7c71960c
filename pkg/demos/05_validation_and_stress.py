"""Property suites, and what happens when the step size is pushed too far.

``run_all`` samples each mathematical property the library relies on and
reports the worst violation against its tolerance. Two results are worth
reading closely:

* the unconditional penalty dominance check (the lambda-independent
  functional never exceeding the lambda-dependent one) is reported as WARN:
  it fails on a large share of random pairs, while the version restricted to
  ask above bid with the target in between holds;
* orbit checks are only enforced when alpha is inside the stability region.

The stress configuration uses alpha = 0.99 and a tiny epsilon. The implicit
step then has no contraction to lean on, the Picard iterates leave the
region where prices are defined, and the run stops with a step-solver
failure instead of producing a misleading orbit.
"""
import numpy as np

from beliefbargain import dominance_check, run_trajectory
from beliefbargain.validation import format_table, run_all, sampled_threshold

from _common import banner, config

cfg = config("baseline")
banner("Property suites on the baseline market")
print(format_table(run_all(cfg)))

banner("Where the dominance inequality fails")
rng = np.random.default_rng(cfg.seed)
bad = []
for _ in range(2000):
    nxt = rng.dirichlet([1, 1], size=2).reshape(-1)
    anchor = rng.dirichlet([1, 1], size=2).reshape(-1)
    lp, lpl = dominance_check(nxt, anchor, cfg.agents, cfg.market, cfg.penalty)
    if lp > lpl:
        bad.append(lp - lpl)
print(f"L_P > L_P^lambda on {len(bad)}/2000 random pairs (largest excess {max(bad):.3g})")
print("With target T, L_P - L_P^lambda = 2 (P_B - T)(T - P_A) / eps. When the ask")
print("exceeds the bid, T lies between them and this is nonnegative, so there the")
print("inequality runs the other way.")

stress = config("stress")
banner(f"Stress run: alpha = {stress.dynamics.alpha}, eps = {stress.penalty.epsilon}")
traj = run_trajectory(stress.anchors, stress.agents, stress.market, stress.dynamics)
print(f"status {traj.status.value} at period {traj.failed_period}: {traj.message}")
thr, lip = sampled_threshold(stress, np.random.default_rng(stress.seed))
print(f"sampled Lipschitz constant {lip:.3g}, so alpha must stay below {thr:.3g}")
print(format_table(run_all(stress)))
