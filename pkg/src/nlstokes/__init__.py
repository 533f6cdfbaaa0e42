"""Nonlocal Stokes equations on the periodic torus.

Kernels and their Fourier symbols, a closed-form spectral solver,
refinement studies, a 1D grid audit and real-space operator checks.
"""

from .kernels import (DivergentMomentError, KernelError, RadialProfile, ScaledKernel,
                      check_gradient_monotonicity, constant, cubic_spline, eval_scaled_kernel,
                      fractional, kernel_moment, normalize_profile, piecewise_fractional,
                      truncated_gaussian)
from .symbols import (QuadratureError, SymbolCache, b_symbol, lambda_symbol,
                      scan_b_zero_crossings, symbol_table)
from .spectral import (IllPosedError, IncompatibleForcingError, PeriodicGrid, SpectralField,
                       StokesProblem, apply_nonlocal_operator, divergence_audit, field_norm,
                       solve_pressure_poisson, solve_stokes)
from .convergence import (RateStudy, asymptotic_compatibility_study, delta_refinement_study,
                          modified_gap_study, observed_order, spectral_refinement_study)

__version__ = "0.1.0"
