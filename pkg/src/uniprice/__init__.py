"""Uniform-price dynamic mechanism for large populations of LQ agents."""

from .analysis import (ConstantEstimates, DeviationReport, SearchSpec, best_deviation,
                       check_implementation, empirical_epsilon, estimate_constants,
                       induced_utility)
from .errors import (ConfigError, InfeasibleError, InputError, MessageSpaceError, SizeError,
                     SolverError)
from .mechanism import ClearingOutcome, clear, nu_residual, price_jacobian_wrt_report
from .model import (ActionBox, AgentType, Allocation, BidProfile, MarketConfig, TypeBounds,
                    aggregate_demand, simulate_trajectory, utility, valuation)
from .planner import (GridSpec, PlannerSolution, brute_force_welfare, kkt_residual,
                      solve_social_choice)
from .price_response import (ResponseCoefficients, coefficients, respond, respond_oracle,
                             response_jacobian)
from .scenario import ScenarioSpec, generate_population

__version__ = "0.1.0"
