"""Symbolic interior point solver for logical quadratic programs."""

from ._symqp import (
    BpdnInstance,
    DimensionError,
    InvalidArgument,
    NumericError,
    ParseError,
    SolveReport,
    SymqpError,
    UnsupportedStructure,
    ground,
    make_bpdn,
    mdp_source,
    solve,
    solve_bpdn,
    stats,
    value_iteration,
)

__all__ = [
    "BpdnInstance",
    "DimensionError",
    "InvalidArgument",
    "NumericError",
    "ParseError",
    "SolveReport",
    "SymqpError",
    "UnsupportedStructure",
    "ground",
    "make_bpdn",
    "mdp_source",
    "solve",
    "solve_bpdn",
    "stats",
    "value_iteration",
]
