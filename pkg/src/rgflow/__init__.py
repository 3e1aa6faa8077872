"""Scale decomposition of the lattice Green function, second-order flow
coefficients, coupling-constant maps, and an exact contraction calculus that
re-derives the flow table."""

from .coeffs import FlowCoefficients, RawMoments, beta_limit, coefficient_table, greek_coefficients, raw_moments
from .config import ConfigError, RunConfig, Tolerances, parse_config
from .decomp import ScaleDecomposition, WindowProfile, build_decomposition, range_profile, verify_estimates
from .flow import (
    BulkVector,
    CheckedVector,
    CouplingVector,
    TransformedVector,
    conjugacy_residual,
    invert_T,
    iterate_flow,
    phi_pt,
    phi_pt_bulk,
    phibar,
    transform_T,
)
from .lattice import Kernel, Moments, TorusSpec, apply_difference, convolve, green_kernel, grad_square, moments

__version__ = "0.1.0"
