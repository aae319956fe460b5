"""Forward-looking evolutionary game dynamics with exploration-cost constraints.

A population density of actions on a uniform grid evolves under replicator,
BNN or logit switching.  Every Euler step first solves a static
Hamilton-Jacobi-Bellman system for the value function and the multiplier
that makes the exploration cost meet its budget.
"""
from .diagnostics import (RateTableRow, compare_runs, convergence_rate, eta_constancy, nash_gap,
                          rate_table, true_exploration_cost)
from .dynamics import (ProtocolSpec, SimConfig, SimResult, logit_distribution, run_simulation,
                       run_simulation_2d, run_sweep, step_logit, step_pairwise)
from .errors import *  # noqa: F401,F403
from .grid import (Density, Grid1D, Grid2D, density_from_function, density_from_pdf, mean_action,
                   sup_pdf_diff, uniform_density)
from .hjb import (HjbParams, HjbSolution, LambdaWeights, entropic_cost, eta_bisection_oracle,
                  eta_bounds_quadratic, phi_logit_closed_form, solve_eta_logit, solve_hjb_logit,
                  solve_hjb_quadratic)
from .utility import UtilitySpec, eval_utility, eval_utility_1d, eval_utility_2d, utility_range

__version__ = "0.1.0"
