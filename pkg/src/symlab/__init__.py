"""Numerical experiments on symmetric measures and odd singular integral kernels.

Submodules
----------
measures
    Discretized model measures, trusted windows and the measure table format.
kernels
    Odd one-homogeneous kernels, Fourier multipliers and the spike angle equation.
functionals
    Small local action, symmetry defect, densities and principal values.
transport
    Windowed bounded-Lipschitz transport numbers (alpha numbers).
blowup
    Rescalings of a measure at a point and weak convergence diagnostics.
estimators
    Scikit-learn style transformers over the functionals.
cli
    The ``lab`` batch runner.
"""
from .errors import (ConfigError, InputError, LabError, PreconditionError, QuadratureError, ResolutionError,
                     SolverError, TrustedWindowError)
from .functionals import (density_scan, pv_estimator, pv_to_sla_check, sla_functional, sla_scan,
                          symmetric_point_scan, symmetry_defect)
from .kernels import coordinate_kernel, huovinen_kernel, multiplier, riesz_kernel
from .measures import (DiscreteMeasure, MeasureSpec, ball_mass, make_atomic_measure, make_cantor_product_measure,
                       make_flat_measure, make_lattice_lines_measure, make_lines_measure, make_spike_measure,
                       make_triangle_tiling_measure, read_measure_table, write_measure_table)
from .transport import CandidateFamily, alpha_flat, alpha_general, alpha_scan, lipschitz_dual_value

__version__ = "0.1.0"

__all__ = [
    "CandidateFamily", "ConfigError", "DiscreteMeasure", "InputError", "LabError", "MeasureSpec",
    "PreconditionError", "QuadratureError", "ResolutionError", "SolverError", "TrustedWindowError",
    "alpha_flat", "alpha_general", "alpha_scan", "ball_mass", "coordinate_kernel", "density_scan",
    "huovinen_kernel", "lipschitz_dual_value", "make_atomic_measure", "make_cantor_product_measure",
    "make_flat_measure", "make_lattice_lines_measure", "make_lines_measure", "make_spike_measure",
    "make_triangle_tiling_measure", "multiplier", "pv_estimator", "pv_to_sla_check", "read_measure_table",
    "riesz_kernel", "sla_functional", "sla_scan", "symmetric_point_scan", "symmetry_defect",
    "write_measure_table",
]
