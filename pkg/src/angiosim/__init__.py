"""angiosim: a 1D numerical laboratory for a chemotaxis model of
tumor-induced angiogenesis with nonlinear flux at the tumor boundary.

The package computes the spectral threshold of the boundary flux, the
steady states it separates, and time-integrates the coupled dynamics to
verify the predicted long-time limits.
"""

__version__ = "0.1.0"

from .dynamics import ModelParams, SimState, StepControl, Trajectory, cfl_dt, run, step
from .grid import Field, Grid1D, const_field, field_from_callable, integrate, make_field, make_grid, norm
from .harness import DecayFit, RegimeReport, classify_regime, fit_decay, mass_audit, sweep
from .sensitivity import SensitivitySpec, linear_saturating, saturating_power, truncated_linear
from .spectral import EigenResult, alpha_of_mu, compute_mu1, principal_eigen
from .steady import SteadyState, semi_trivial_u, theta_closed_form, theta_mu

__all__ = [
    "__version__",
    "Field", "Grid1D", "make_grid", "make_field", "const_field",
    "field_from_callable", "integrate", "norm",
    "EigenResult", "principal_eigen", "alpha_of_mu", "compute_mu1",
    "SteadyState", "theta_mu", "theta_closed_form", "semi_trivial_u",
    "SensitivitySpec", "saturating_power", "linear_saturating", "truncated_linear",
    "ModelParams", "SimState", "StepControl", "Trajectory", "cfl_dt", "step", "run",
    "DecayFit", "RegimeReport", "fit_decay", "mass_audit", "classify_regime", "sweep",
]
