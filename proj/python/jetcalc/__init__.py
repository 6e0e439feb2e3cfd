"""Symbolic jet-space calculus: Euler operators, adjoints, Helmholtz tests,
Kovalevskaya forms and coverings for PDE systems described in .pde files."""

from ._jetcalc import (
    Expr,
    ExprError,
    Operator,
    ParseError,
    System,
    euler,
    is_symmetry,
    is_variational,
    kovalevskaya,
    lagrangian_covering,
    verify_covering,
)

__all__ = [
    "Expr",
    "ExprError",
    "Operator",
    "ParseError",
    "System",
    "euler",
    "is_symmetry",
    "is_variational",
    "kovalevskaya",
    "lagrangian_covering",
    "verify_covering",
]
__version__ = "0.1.0"
