"""Exact contraction calculus on local field polynomials."""

from .algebra import (
    FieldAtom,
    KernelFactor,
    LocalPolynomial,
    apply_Q,
    obs_a,
    obs_b,
    obs_ss,
    symbolic_V,
    tau,
    tau2,
    tau_ab,
    tau_delta,
    tau_nabla,
)
from .contraction import laplacian, laplacian_cross, truncated_pair, wick_exp
from .derive import (
    compare_tables,
    derive_flow_table,
    format_table,
    hardcoded_flow_table,
    numeric_cross_check,
    perturbative_map,
    symbols,
    table_to_terms,
)
from .loc import LocError, decompose, kernel_moment, loc_local, loc_reduce, scalarize

__all__ = [
    "FieldAtom", "KernelFactor", "LocalPolynomial", "apply_Q", "obs_a", "obs_b", "obs_ss", "symbolic_V",
    "tau", "tau2", "tau_ab", "tau_delta", "tau_nabla", "laplacian", "laplacian_cross", "truncated_pair",
    "wick_exp", "compare_tables", "derive_flow_table", "format_table", "hardcoded_flow_table",
    "numeric_cross_check", "perturbative_map", "symbols", "table_to_terms", "LocError", "decompose",
    "kernel_moment", "loc_local", "loc_reduce", "scalarize",
]
