"""Numerical pullback attractors for scalar non-autonomous reaction-diffusion equations.

    y_t = y_xx + h(p.t, x) y + g(y)   on [0, L],

driven by explicit hull flows.  See the README for a tour.
"""
from .errors import *  # noqa: F401,F403
from .hull import (Constant, DriverSpec, HullPoint, NamedPiecewise, QuasiPeriodic, SlowGrowth, Transformed,
                   advance, driver_from_json, evaluate, limit_points, parse_driver)
from .cocycle import (cocycle_trace, is_asymptotic_at_minus_infinity, log_cocycle, lyapunov, spectrum_estimate,
                      tail_integral)
from .parabolic import (Deadzone, FieldState, Grid, LinearCoefficientSpec, PurePower, evolve, evolve_linear,
                        evolve_trajectory, linear_log_norm, max_stable_dt, pde_cocycle, pde_log_cocycle,
                        principal_eigenpair)
from .scalar_ode import (ScalarProblem, closed_form_v, entire_solution_w0, integrate_scalar, lemma_residual,
                         pullback_bstar)
from .attractor import (Problem, equivalence_report, integrability_criterion, orbit_trace, pullback_boundary,
                        sublinear_convergence_check, trichotomy_report)
from .kernels import BACKEND

__version__ = "0.1.0"
