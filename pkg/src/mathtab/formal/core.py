"""Formal problem states: variables, constraints, goals, and exact evaluation.

Everything here is immutable and works over exact rationals
(:class:`fractions.Fraction`); no floating point enters the core.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Mapping, Optional, Union


class FormalError(Exception):
    """Base class for errors raised by the formal layer."""


class UnknownSymbol(FormalError):
    def __init__(self, name: str, context: str = ""):
        self.name = name
        suffix = f" ({context})" if context else ""
        super().__init__(f"unknown symbol '{name}'{suffix}")


class DivisionByZero(FormalError):
    def __init__(self, constraint: Optional["Constraint"] = None):
        self.constraint = constraint
        detail = f" while checking {constraint}" if constraint is not None else ""
        super().__init__(f"division by zero{detail}")


class UnboundVariable(FormalError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"variable '{name}' is not bound in the assignment")


class DomainViolation(FormalError):
    def __init__(self, variable: str, value: Fraction, domain: "Domain"):
        self.variable = variable
        self.value = value
        self.domain = domain
        super().__init__(
            f"value {value} violates domain {domain.value} of variable '{variable}'"
        )


class Domain(Enum):
    """Value domains a variable may range over.

    INT (signed) is only produced by the parser when explicitly allowed;
    the default fragment knows naturals, positive naturals and reals.
    """

    NAT = "Nat"
    POS_NAT = "PosNat"
    REAL = "Real"
    INT = "Int"

    def admits(self, value: Fraction) -> bool:
        if self is Domain.REAL:
            return True
        if value.denominator != 1:
            return False
        if self is Domain.NAT:
            return value >= 0
        if self is Domain.POS_NAT:
            return value >= 1
        return True  # INT


@dataclass(frozen=True)
class Variable:
    name: str
    domain: Domain = Domain.REAL

    def __post_init__(self):
        if not self.name:
            raise ValueError("variable name must be nonempty")


@dataclass(frozen=True)
class Const:
    value: Fraction

    def __post_init__(self):
        if not isinstance(self.value, Fraction):
            object.__setattr__(self, "value", Fraction(self.value))


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "Expr"
    right: "Expr"

    def __post_init__(self):
        if self.op not in ("+", "-", "*", "/"):
            raise ValueError(f"unsupported operator {self.op!r}")


Expr = Union[Const, Var, BinOp]


class Relation(Enum):
    EQ = "="
    GE = ">="
    LE = "<="
    GT = ">"
    LT = "<"
    NE = "distinct"

    def holds(self, left: Fraction, right: Fraction) -> bool:
        if self is Relation.EQ:
            return left == right
        if self is Relation.GE:
            return left >= right
        if self is Relation.LE:
            return left <= right
        if self is Relation.GT:
            return left > right
        if self is Relation.LT:
            return left < right
        return left != right


class ConstraintTag(Enum):
    CORE = "core"
    # Active constraints are the constant facts that get moved into a table.
    ACTIVE = "active"


@dataclass(frozen=True)
class Constraint:
    left: Expr
    relation: Relation
    right: Expr
    tag: ConstraintTag = ConstraintTag.CORE

    def untagged(self) -> "Constraint":
        return Constraint(self.left, self.relation, self.right)


@dataclass(frozen=True)
class Goal:
    """The single variable the problem asks for."""

    target: str


def free_variables(expr: Expr) -> set[str]:
    if isinstance(expr, Const):
        return set()
    if isinstance(expr, Var):
        return {expr.name}
    return free_variables(expr.left) | free_variables(expr.right)


def constraint_variables(constraint: Constraint) -> set[str]:
    return free_variables(constraint.left) | free_variables(constraint.right)


@dataclass(frozen=True)
class ModelingState:
    """A formal problem: declared variables, constraints over them, and a goal."""

    variables: tuple[Variable, ...]
    constraints: tuple[Constraint, ...]
    goal: Optional[Goal] = None

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            dupe = next(n for n in names if names.count(n) > 1)
            raise ValueError(f"duplicate variable name '{dupe}'")
        declared = set(names)
        for c in self.constraints:
            for name in constraint_variables(c):
                if name not in declared:
                    raise UnknownSymbol(name, "constraint references undeclared variable")
        if self.goal is not None and self.goal.target not in declared:
            raise UnknownSymbol(self.goal.target, "goal targets undeclared variable")

    @property
    def domains(self) -> dict[str, Domain]:
        return {v.name: v.domain for v in self.variables}

    def variable(self, name: str) -> Variable:
        for v in self.variables:
            if v.name == name:
                return v
        raise UnknownSymbol(name)

    def with_constraints(self, constraints) -> "ModelingState":
        return ModelingState(self.variables, tuple(constraints), self.goal)


def evaluate(expr: Expr, assignment: Mapping[str, Fraction]) -> Fraction:
    """Exactly evaluate ``expr`` under ``assignment``.

    Raises UnboundVariable for free variables and DivisionByZero when a
    divisor evaluates to zero.
    """
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, Var):
        try:
            return assignment[expr.name]
        except KeyError:
            raise UnboundVariable(expr.name) from None
    left = evaluate(expr.left, assignment)
    right = evaluate(expr.right, assignment)
    if expr.op == "+":
        return left + right
    if expr.op == "-":
        return left - right
    if expr.op == "*":
        return left * right
    if right == 0:
        raise DivisionByZero()
    return left / right


def assignment_shape(constraint: Constraint) -> Optional[tuple[str, Expr]]:
    """Return (variable, defining expression) when the constraint is ``var = expr``."""
    if constraint.relation is not Relation.EQ:
        return None
    if isinstance(constraint.left, Var):
        return constraint.left.name, constraint.right
    if isinstance(constraint.right, Var):
        return constraint.right.name, constraint.left
    return None


def constant_assignments(state: ModelingState) -> list[Constraint]:
    """The ``var = constant`` facts; these are what a table can carry."""
    out = []
    for c in state.constraints:
        shape = assignment_shape(c)
        if shape is not None and isinstance(shape[1], Const):
            out.append(c)
    return out


def dependency_parents(state: ModelingState) -> dict[str, set[str]]:
    """Map each variable to the variables its defining equations read from."""
    parents: dict[str, set[str]] = {v.name: set() for v in state.variables}
    for c in state.constraints:
        shape = assignment_shape(c)
        if shape is not None:
            var, expr = shape
            parents[var] |= free_variables(expr)
    return parents


def ancestors(state: ModelingState, name: str) -> set[str]:
    """Transitive closure of dependency parents of ``name`` (excluding itself)."""
    parents = dependency_parents(state)
    seen: set[str] = set()
    frontier = set(parents.get(name, ()))
    while frontier:
        nxt = frontier.pop()
        if nxt in seen:
            continue
        seen.add(nxt)
        frontier |= parents.get(nxt, set()) - seen
    return seen


def _is_constant_assignment(constraint: Constraint) -> bool:
    shape = assignment_shape(constraint)
    return shape is not None and isinstance(shape[1], Const)


def tag_active(state: ModelingState) -> ModelingState:
    """Tag every constant assignment as active, everything else as core."""
    tagged = tuple(
        Constraint(c.left, c.relation, c.right,
                   ConstraintTag.ACTIVE if _is_constant_assignment(c) else ConstraintTag.CORE)
        for c in state.constraints
    )
    return ModelingState(state.variables, tagged, state.goal)


def active_constraints(state: ModelingState) -> list[Constraint]:
    tagged = [c for c in state.constraints if c.tag is ConstraintTag.ACTIVE]
    if tagged:
        return tagged
    return constant_assignments(state)
