"""Where do a seller and a buyer end up agreeing?

A claim pays 1 in the first state and 2 in the second. The seller thinks the
good state is likely (3 to 1), the buyer thinks the opposite. Each prices the
claim by utility indifference, so the seller asks more than the buyer bids
and no trade happens at the original beliefs.

We compute both prices, check that some pair of beliefs could close the gap,
and then find the smallest weighted revision of beliefs that does close it.
The grid search at the end is a slow, assumption-free oracle for the same
answer.
"""
import numpy as np

from beliefbargain import (agreement_feasible, brute_force_primal_k2, feasibility_sides,
                           price_bounds, reservation_price, solve_primal)

from _common import banner, config

cfg = config("baseline")
k = cfg.market.k
qa, qb = cfg.anchors[:k], cfg.anchors[k:]

banner("Reservation prices at the original beliefs")
pa = reservation_price(cfg.seller, cfg.market, qa)
pb = reservation_price(cfg.buyer, cfg.market, qb)
for who, agent, p in (("seller asks", cfg.seller, pa), ("buyer bids", cfg.buyer, pb)):
    lo, hi = price_bounds(agent, cfg.market)
    print(f"{who:12s} {p:.10f}   (any belief gives a price in [{lo:.4f}, {hi:.4f}])")
print(f"gap P_A - P_B = {pa - pb:.6f}")

lhs, rhs = feasibility_sides(cfg.seller, cfg.buyer, cfg.market)
print(f"payoff spread {lhs:.4f} vs combined risk gaps {rhs:.4f}: "
      f"agreement {'reachable' if agreement_feasible(cfg.seller, cfg.buyer, cfg.market) else 'impossible'}")

lam = cfg.penalty.lam
banner(f"Least revision that closes the gap (seller weight lambda = {lam})")
sol = solve_primal(cfg.anchors, cfg.agents, cfg.market, lam)
print(f"status {sol.status}")
print(f"seller moves {qa} -> {np.round(sol.q_a_star, 6)}")
print(f"buyer  moves {qb} -> {np.round(sol.q_b_star, 6)}")
print(f"agreed price {sol.price_star:.10f}, weighted deviation {sol.objective:.6e}, "
      f"price mismatch {sol.constraint_residual:.1e}")
print("continuation path (eps, deviation, price gap):")
for eps, dev, gap, _ in sol.history:
    print(f"  {eps:8.0e}  {dev:.8f}  {gap:.2e}")

banner("Cross-check against a 2001-point grid search")
bf = brute_force_primal_k2(cfg.anchors, cfg.agents, cfg.market, lam, grid_n=2001)
print(f"grid optimum: deviation {bf.objective:.6e}, price {bf.price_star:.10f}")
print(f"difference in deviation {abs(bf.objective - sol.objective):.1e}, "
      f"in beliefs {np.abs(bf.q_a_star - sol.q_a_star).max():.1e}")
