"""Numerical lab for the repulsive Hartree equation with an attractive Coulomb centre.

Radial fields and functionals, the hydrogen spectrum, three ground-state
solvers, identity and inequality checks, comparison functions for the
operator ``-Delta - 1/|x| + omega`` and a coarse 3D lattice probe.
"""

from .errors import (ConditioningWarning, ConfigurationError, ConvergenceError,
                     GridTooLargeError, GridTooSmallError, HartreeLabError, PreconditionError,
                     RegimeBoundaryError, RegimeWarning, TruncationWarning)
from .radial import (RadialField, RadialGrid, build_grid, differentiate, dilate,
                     integrate_radial, l2_inner, norms)
from .functionals import (FunctionalReport, a_form, action, coulomb_attraction, energy,
                          hartree_potential, hminus1_norm_sq, l_omega, report)
from .spectral import EigenPair, exact_omega, hydrogen_eigenpairs, project_e0
from .solver import (MinimizerResult, SolverConfig, minimize_action, minimize_energy_constrained,
                     multistart_uniqueness, n_of_omega, scf_fixed_point)
from .maxprinciple import TestFunctionSpec, build_test_function, q_sign_analysis, residual_h, sweep
from .verify import IdentityReport

__version__ = "0.1.0"

__all__ = [
    "ConditioningWarning", "ConfigurationError", "ConvergenceError", "GridTooLargeError",
    "GridTooSmallError", "HartreeLabError", "PreconditionError", "RegimeBoundaryError",
    "RegimeWarning", "TruncationWarning",
    "RadialField", "RadialGrid", "build_grid", "differentiate", "dilate", "integrate_radial",
    "l2_inner", "norms",
    "FunctionalReport", "a_form", "action", "coulomb_attraction", "energy", "hartree_potential",
    "hminus1_norm_sq", "l_omega", "report",
    "EigenPair", "exact_omega", "hydrogen_eigenpairs", "project_e0",
    "MinimizerResult", "SolverConfig", "minimize_action", "minimize_energy_constrained",
    "multistart_uniqueness", "n_of_omega", "scf_fixed_point",
    "TestFunctionSpec", "build_test_function", "q_sign_analysis", "residual_h", "sweep",
    "IdentityReport",
]
