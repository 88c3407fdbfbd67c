"""Universal implicit solutions of weight-one variational problems.

The field defined by ``sum_j x_j F^j(phi) = c`` solves the Euler-Lagrange
equation of every Lagrangian that is homogeneous of weight one in the
gradient.  This package builds such fields with exact first and second
derivatives and checks that claim, its multifield and iterated forms, and
the first-order ratio relations, numerically.
"""

from .errors import (
    ConfigError,
    DegenerateFit,
    DomainError,
    ExprError,
    NoConvergence,
    ParseError,
    Singular,
    SingularJacobian,
    UnboundVariable,
    VanishingDenominator,
    VarsolError,
)
from .expr import evaluate, parse_expression, to_text
from .implicit import FamilySpec, FieldSample, sample_field, solve_phi
from .lagrangian import LagrangianSpec, companion, el_residual
from .multifield import MultiFamilySpec, MultiLagrangianSpec, jacobian_companion, sample_multifield
from .version import __version__

__all__ = [
    "ConfigError",
    "DegenerateFit",
    "DomainError",
    "ExprError",
    "FamilySpec",
    "FieldSample",
    "LagrangianSpec",
    "MultiFamilySpec",
    "MultiLagrangianSpec",
    "NoConvergence",
    "ParseError",
    "Singular",
    "SingularJacobian",
    "UnboundVariable",
    "VanishingDenominator",
    "VarsolError",
    "__version__",
    "companion",
    "el_residual",
    "evaluate",
    "jacobian_companion",
    "parse_expression",
    "sample_field",
    "sample_multifield",
    "solve_phi",
    "to_text",
]
