"""Structured distance to defectivity.

Computes the smallest Frobenius-norm perturbation, optionally real and/or
confined to a sparsity pattern, that makes a matrix defective.  An inner
gradient flow minimizes ``y^H x`` for a pseudoeigenvalue at fixed ``eps``
and an outer iteration drives that minimum to a small target value.
"""

from .exceptions import DefectivityError
from .flow import FlowOptions, integrate_to_stationary
from .initialization import candidate, condition_rates, upper_bound
from .io import grcar, example1, load_matrix, read_matrix_market, write_report
from .linalg import EigenTriple, GroupInverse, eig_pairs, group_inverse, nearest_triple
from .outer import (
    COALESCED,
    DistanceReport,
    OuterOptions,
    puiseux_diagnostics,
    r_of_eps,
    solve_distance,
)
from .structure import StructureMode

__all__ = [
    "COALESCED",
    "DefectivityError",
    "DistanceReport",
    "EigenTriple",
    "FlowOptions",
    "GroupInverse",
    "OuterOptions",
    "StructureMode",
    "candidate",
    "condition_rates",
    "eig_pairs",
    "example1",
    "grcar",
    "group_inverse",
    "integrate_to_stationary",
    "load_matrix",
    "nearest_triple",
    "puiseux_diagnostics",
    "r_of_eps",
    "read_matrix_market",
    "solve_distance",
    "upper_bound",
    "write_report",
]

__version__ = "0.1.0"
