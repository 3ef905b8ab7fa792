"""Multiscale simulation of tide-driven seabed evolution on the unit torus.

The package solves the stiff oscillatory seabed models at fine scale,
constructs their time-periodic cell solutions by penalized period-map
iteration, solves the limiting profile and first-order corrector equations,
and measures conservation, contraction and convergence properties.
"""

from .errors import (ConfigurationError, DuneSimError, FixedPointError,
                     SolvabilityError, SteppingError)
from .grid import (Grid, ScalarField, VectorField, divergence, from_function,
                   gradient, inner, load_scalar, load_vector, make_grid, mass,
                   norm_l2, save_scalar, save_vector, vector_inner, zeros)
from .physics import (CoefficientField, CoefficientProvider, CoefficientSample,
                      Forcing, TransportLaw, assemble_coefficients, chi,
                      eval_g, forcing_eval, power3_law, rotating_tide,
                      tabulated_forcing, unidirectional_tide, van_rijn_law,
                      zero_forcing)
from .scaling import (PhysicalParams, RegimeDerivation, RegimeSpec,
                      derive_regime, params_for, regime_csv, regime_report,
                      snapped_regime)
from .solver import (ConvergenceReport, PeriodicProfile, ProfileFamily,
                     QuasiPeriodicField, SolverConfig, State, Trajectory,
                     default_schedule, find_periodic, load_trajectory,
                     period_map, profile_family, quasi_periodic_reconstruction,
                     save_trajectory, solve_fine, step_implicit)
from .homogenize import (build_profile_family, cell_solve, load_profile,
                         reconstruct, save_profile, slow_time_derivative,
                         solve_corrector)
from .verify import (ErrorReport, contraction_ratio, corrector_error,
                     fit_order, mass_drift, random_zero_mean_field,
                     read_report_csv, two_scale_error, write_plot_script)

__version__ = "0.1.0"
