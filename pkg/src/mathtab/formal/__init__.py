"""Formal fragment: AST, parser, exact evaluator, and propagation solver."""

from .core import (
    BinOp,
    Const,
    Constraint,
    ConstraintTag,
    DivisionByZero,
    Domain,
    DomainViolation,
    Expr,
    FormalError,
    Goal,
    ModelingState,
    Relation,
    UnboundVariable,
    UnknownSymbol,
    Var,
    Variable,
    active_constraints,
    ancestors,
    assignment_shape,
    constant_assignments,
    constraint_variables,
    dependency_parents,
    evaluate,
    free_variables,
    tag_active,
)
from .parse import ParseError, UnsupportedConstruct, emit_smtlib, parse_formal
from .solve import SolveResult, SolveStatus, goal_value, solve, solve_external

__all__ = [
    "BinOp",
    "Const",
    "Constraint",
    "ConstraintTag",
    "DivisionByZero",
    "Domain",
    "DomainViolation",
    "Expr",
    "FormalError",
    "Goal",
    "ModelingState",
    "ParseError",
    "Relation",
    "SolveResult",
    "SolveStatus",
    "UnboundVariable",
    "UnknownSymbol",
    "UnsupportedConstruct",
    "Var",
    "Variable",
    "active_constraints",
    "ancestors",
    "assignment_shape",
    "constant_assignments",
    "constraint_variables",
    "dependency_parents",
    "emit_smtlib",
    "evaluate",
    "free_variables",
    "goal_value",
    "parse_formal",
    "solve",
    "solve_external",
    "tag_active",
]
