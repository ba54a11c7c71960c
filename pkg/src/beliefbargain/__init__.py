"""Belief bargaining over a contingent claim.

Two agents, a seller and a buyer, hold beliefs over K states and move them
until their utility-indifference prices for the claim agree.
"""
from .errors import (BargainError, ConvergenceError, DimensionError, DomainError,
                     InfeasibleRiskError, PricingError, StepSolverError)
from .simplex import (Belief, BeliefState, DeviationWeights, QUADRATIC, QuadraticDistance,
                      joint_deviation, project_pair, project_pair_clamped, project_simplex,
                      psi_gradient, psi_quadratic, tangent_part)
from .utility import ExponentialUtility, GeneralUtility, UtilityModel, validate_utility
from .pricing import (AgentSpec, MarketSpec, Side, agreement_feasible, feasibility_sides,
                      price_bounds, price_gradient_beliefs, price_gradient_beliefs_exponential,
                      price_sensitivity_risk, reservation_price, risk_threshold)
from .functionals import (PenaltyConfig, PenalizedObjective, QuadraticPenalty, Variant,
                          dominance_check, eval_penalized, grad_next_penalized)
from .dynamics import (DynamicsConfig, Status, TrajectoryRecord, certify_fixed_point,
                       generic_pds_step, implicit_step, lyapunov_series, run_trajectory,
                       write_trajectory_csv)
from .solver import (PrimalSolution, SweepResult, asymptotic_price, brute_force_primal_k2,
                     classify_monotonicity, solve_primal, sweep_lambda, sweep_risks,
                     write_sweep_csv)

__version__ = "0.1.0"
