"""Hawkes processes through their population age pyramid.

Self- and externally-excited counting processes with ODE-closed fertility
kernels: exact thinning simulation, moment ODEs with closed-form oracles,
Laplace transforms via backward exponent ODEs, and a seeded Monte Carlo
harness that validates every analytic quantity against simulation.
"""

from . import errors
from .kernels import (MarkDistribution, MarkKernel, OdeKernel, TimeFactor,
                      branching_ratio, build_ode_kernel, delayed_kernel,
                      eval_kernel_stack, exponential_kernel,
                      kernel_from_exponential_modes, power_law_kernel,
                      zero_kernel)
from .laplace import (LaplaceQuery, RiccatiPath, b_coefficients,
                      joint_laplace_N_lambda, laplace_general, laplace_X,
                      solve_A_ode, solve_matrix_riccati)
from .mc import McReport, compare, estimate, estimate_state_stats, ks_time_rescaling
from .models import GeneralModel, RateFunction, StandardModel
from .moments import (closed_form_mean_delayed, closed_form_mean_exp,
                      closed_form_var_exp, closed_form_var_intensity_critical,
                      mean_ode, second_moment_ode)
from .numerics import OdePath, Propagator, expm, fd_derivative, quad_simpson, rk4
from .pyramid import (AgePyramid, MarkovState, MatrixState, apply_jump,
                      integrate, markov_state_at, markov_state_propagated,
                      matrix_state_at, propagate_state, pyramid_at)
from .simulate import (EventLog, ThinningState, compensator_at_events,
                       dominating_bound, intensity_path, simulate_general,
                       simulate_generations, simulate_standard,
                       simulate_standard_batch)

__version__ = "0.1.0"
