"""How does bargaining power move the agreed price?

``lambda`` is the weight on the seller's belief revision. At 0 the seller
revises freely, so the buyer's bid stands; at 1 the roles swap and the
seller's ask stands. In between the agreed price should rise with lambda.

Two routes give the price. The continuation solver finds the constrained
optimum directly. The dynamics instead let both agents nudge their beliefs
period by period until the prices meet. The sweep writes a CSV and a
gnuplot script under ``demos/out``.
"""
import time
from pathlib import Path

from beliefbargain import classify_monotonicity, reservation_price, sweep_lambda
from beliefbargain.solver import plot_script, write_sweep_csv

from _common import banner, config

for name in ("lambda_sweep", "lambda_sweep_dynamics"):
    cfg = config(name)
    banner(f"{name}: provenance {cfg.sweep.provenance}")
    t0 = time.perf_counter()
    res = sweep_lambda(cfg.anchors, cfg.agents, cfg.market, cfg.dynamics, cfg.sweep.lam,
                       provenance=cfg.sweep.provenance)
    for pt in res.points[::4]:
        print(f"  lambda {pt.lam:4.2f}  price {pt.price_star:.8f}  ({pt.status})")
    print(f"{len(res.points)} points in {time.perf_counter() - t0:.1f}s; "
          f"price is {classify_monotonicity(res.prices)} in lambda")
    d = Path(cfg.output_dir)
    d.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(res, d / f"{name}.sweep.csv")
    (d / f"{name}.sweep.gp").write_text(plot_script(res, f"{name}.sweep.csv"))

cfg = config("lambda_sweep_dynamics")
k = cfg.market.k
pa0 = reservation_price(cfg.seller, cfg.market, cfg.anchors[:k])
pb0 = reservation_price(cfg.buyer, cfg.market, cfg.anchors[k:])
banner("Endpoints")
print(f"buyer's original bid  {pb0:.10f}  (lambda = 0)")
print(f"seller's original ask {pa0:.10f}  (lambda = 1)")
print(f"last sweep endpoints  {res.prices[0]:.10f}, {res.prices[-1]:.10f}")
print(f"max endpoint error {max(abs(res.prices[0] - pb0), abs(res.prices[-1] - pa0)):.1e}")
