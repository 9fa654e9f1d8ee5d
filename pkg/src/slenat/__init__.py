"""Monte Carlo tools for the natural parametrization of chordal SLE.

Conventions: ``a = 2/kappa``, ``d = 1 + kappa/8``, the driving function is a
standard Brownian motion and the curve has half-plane capacity ``a t``.
"""
from .core import DrivingPath, KappaParams, MCAccumulator, make_params, mean_stderr, rng_for, sample_driving, seed_stream
from .errors import CoverageError, DomainError, ParameterError
from .green import DomainBox, QuadratureGrid, box_grid, green_g, integrate_G, mart_M, psi
from .hitting import PhiTable, build_phi_table, hitting_times, phi, sample_T_direct, sample_T_functional
from .loewner import LoewnerChain, build_chain, fhat_deriv, forward_state, full_trace, inverse_point, reverse_state, trace
from .moments import estimate_F, estimate_I, martingale_N, sample_reverse, two_point_N
from .natparam import ThetaEstimate, ThetaPlan, d_variation, minkowski_content, theta_estimate

__version__ = "0.1.0"

__all__ = [
    "DrivingPath", "KappaParams", "MCAccumulator", "make_params", "mean_stderr", "rng_for", "sample_driving",
    "seed_stream", "CoverageError", "DomainError", "ParameterError", "DomainBox", "QuadratureGrid", "box_grid",
    "green_g", "integrate_G", "mart_M", "psi", "PhiTable", "build_phi_table", "hitting_times", "phi",
    "sample_T_direct", "sample_T_functional", "LoewnerChain", "build_chain", "fhat_deriv", "forward_state",
    "full_trace", "inverse_point", "reverse_state", "trace", "estimate_F", "estimate_I", "martingale_N",
    "sample_reverse", "two_point_N", "ThetaEstimate", "ThetaPlan", "d_variation", "minkowski_content",
    "theta_estimate", "__version__",
]
