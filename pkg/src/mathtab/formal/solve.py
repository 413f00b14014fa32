"""Deterministic solver for the equation-chain fragment.

The strategy is propagation plus single-unknown linear isolation run to a
fixpoint, then a final check of every constraint against the derived
assignment. Anything the fixpoint cannot settle is classified as either
underdetermined (an assignment chain is missing inputs) or unsupported
(a shape propagation cannot handle, left for an external solver).
"""

from __future__ import annotations

import shlex
import subprocess
import tempfile
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Optional

from .core import (
    BinOp,
    Const,
    Constraint,
    DivisionByZero,
    DomainViolation,
    Expr,
    ModelingState,
    Relation,
    Var,
    ancestors,
    assignment_shape,
    constraint_variables,
    evaluate,
    free_variables,
)
from .parse import emit_smtlib


class SolveStatus(Enum):
    SAT = "sat"
    CONTRADICTION = "contradiction"
    UNDERDETERMINED = "underdetermined"
    UNSUPPORTED = "unsupported"


@dataclass(frozen=True)
class SolveResult:
    status: SolveStatus
    assignment: Optional[dict[str, Fraction]] = None
    conflict: Optional[tuple[Constraint, Constraint]] = None
    unresolved: Optional[frozenset[str]] = None

    @property
    def is_sat(self) -> bool:
        return self.status is SolveStatus.SAT


class _NonLinear(Exception):
    """The expression is not affine in the single unknown."""


def _linear_form(expr: Expr, assignment, unknown: str,
                 constraint: Constraint) -> tuple[Fraction, Fraction]:
    """Express ``expr`` as ``a * unknown + b``; raises _NonLinear otherwise."""
    if isinstance(expr, Const):
        return Fraction(0), expr.value
    if isinstance(expr, Var):
        if expr.name == unknown:
            return Fraction(1), Fraction(0)
        return Fraction(0), assignment[expr.name]
    la, lb = _linear_form(expr.left, assignment, unknown, constraint)
    ra, rb = _linear_form(expr.right, assignment, unknown, constraint)
    if expr.op == "+":
        return la + ra, lb + rb
    if expr.op == "-":
        return la - ra, lb - rb
    if expr.op == "*":
        if la != 0 and ra != 0:
            raise _NonLinear()
        if la != 0:
            return la * rb, lb * rb
        return ra * lb, rb * lb
    # division: the divisor must not involve the unknown
    if ra != 0:
        raise _NonLinear()
    if rb == 0:
        raise DivisionByZero(constraint)
    return la / rb, lb / rb


def _unknowns(constraint: Constraint, assignment) -> set[str]:
    return {v for v in constraint_variables(constraint) if v not in assignment}


def _check(constraint: Constraint, assignment) -> bool:
    try:
        left = evaluate(constraint.left, assignment)
        right = evaluate(constraint.right, assignment)
    except DivisionByZero:
        raise DivisionByZero(constraint) from None
    return constraint.relation.holds(left, right)


def _conflict_pair(constraint: Constraint, assignment_source: dict[str, Constraint],
                   assignment) -> tuple[Constraint, Constraint]:
    """Pick the constraint that clashes with ``constraint``.

    Prefers the source of a bare-variable side (two facts about the same
    variable), falling back to the source of any variable it reads.
    """
    shape = assignment_shape(constraint)
    if shape is not None:
        source = assignment_source.get(shape[0])
        if source is not None and source is not constraint:
            return (constraint, source)
    for name in sorted(constraint_variables(constraint)):
        source = assignment_source.get(name)
        if source is not None and source is not constraint:
            return (constraint, source)
    return (constraint, constraint)


def solve(state: ModelingState) -> SolveResult:
    """Solve the state by propagation; see module docstring for scope."""
    domains = state.domains
    assignment: dict[str, Fraction] = {}
    source: dict[str, Constraint] = {}

    equalities = [c for c in state.constraints if c.relation is Relation.EQ]
    relational = [c for c in state.constraints if c.relation is not Relation.EQ]
    pending = list(equalities)
    nonlinear_stuck: set[int] = set()

    progress = True
    while progress:
        progress = False
        still_pending = []
        for c in pending:
            unknowns = _unknowns(c, assignment)
            if not unknowns:
                if not _check(c, assignment):
                    return SolveResult(SolveStatus.CONTRADICTION,
                                       conflict=_conflict_pair(c, source, assignment))
                progress = True
                continue
            if len(unknowns) > 1:
                still_pending.append(c)
                continue
            (unknown,) = unknowns
            try:
                la, lb = _linear_form(c.left, assignment, unknown, c)
                ra, rb = _linear_form(c.right, assignment, unknown, c)
            except _NonLinear:
                nonlinear_stuck.add(id(c))
                still_pending.append(c)
                continue
            if la == ra:
                if lb == rb:
                    progress = True  # redundant once values substituted
                    continue
                return SolveResult(SolveStatus.CONTRADICTION,
                                   conflict=_conflict_pair(c, source, assignment))
            value = (rb - lb) / (la - ra)
            if not domains[unknown].admits(value):
                raise DomainViolation(unknown, value, domains[unknown])
            assignment[unknown] = value
            source[unknown] = c
            nonlinear_stuck.discard(id(c))
            progress = True
        pending = still_pending

    checked_relational = []
    for c in relational:
        if _unknowns(c, assignment):
            checked_relational.append(c)
            continue
        if not _check(c, assignment):
            return SolveResult(SolveStatus.CONTRADICTION,
                               conflict=_conflict_pair(c, source, assignment))
    unchecked = pending + checked_relational

    if not unchecked:
        return SolveResult(SolveStatus.SAT, assignment=dict(assignment))

    goal = state.goal.target if state.goal is not None else None
    goal_known = goal is not None and goal in assignment
    if goal is None or goal_known:
        # Every fragment state we certify must have all constraints checked.
        return SolveResult(SolveStatus.UNSUPPORTED)

    for c in unchecked:
        if id(c) in nonlinear_stuck:
            return SolveResult(SolveStatus.UNSUPPORTED)
        if c.relation is not Relation.EQ:
            continue
        # Only a definition still waiting on its inputs counts as missing
        # information; anything else (x + y = 10, 12 = a * b) needs search.
        shape = assignment_shape(c)
        waiting = (
            shape is not None
            and shape[0] not in assignment
            and shape[0] not in free_variables(shape[1])
        )
        if not waiting:
            return SolveResult(SolveStatus.UNSUPPORTED)

    relevant = ancestors(state, goal) | {goal}
    unresolved = frozenset(
        v.name for v in state.variables if v.name in relevant and v.name not in assignment
    )
    return SolveResult(SolveStatus.UNDERDETERMINED, unresolved=unresolved)


def goal_value(state: ModelingState) -> Fraction:
    """Solve and return the goal's value; raises if the state is not cleanly solvable."""
    if state.goal is None:
        raise ValueError("state has no goal")
    result = solve(state)
    if not result.is_sat or state.goal.target not in result.assignment:
        raise ValueError(f"goal '{state.goal.target}' not derivable ({result.status.value})")
    return result.assignment[state.goal.target]


def solve_external(state: ModelingState, command_template: str,
                   timeout: float = 30.0) -> str:
    """Escape hatch: hand the state to an external solver binary.

    ``command_template`` contains ``{path}``, e.g. ``"z3 {path}"``; the first
    stdout line ("sat"/"unsat"/"unknown") is returned.
    """
    with tempfile.NamedTemporaryFile("w", suffix=".smt2", delete=False) as handle:
        handle.write(emit_smtlib(state))
        path = handle.name
    try:
        command = [part.format(path=path) for part in shlex.split(command_template)]
        proc = subprocess.run(command, capture_output=True, text=True, timeout=timeout)
        first = proc.stdout.strip().splitlines()
        return first[0].strip() if first else ""
    finally:
        Path(path).unlink(missing_ok=True)
