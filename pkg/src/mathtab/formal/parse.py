"""Parse the supported SMT-LIB fragment and emit canonical text for it.

The fragment: zero-arity ``declare-fun`` over Int/Real, ``assert`` over
``= >= <= > < distinct`` with prefix arithmetic ``+ - * /``,
``check-sat`` and a single-variable ``get-value``. Anything else is
rejected as unsupported rather than silently ignored.
"""

from __future__ import annotations

import re
from fractions import Fraction
from typing import Optional, Union

from .core import (
    BinOp,
    Const,
    Constraint,
    Domain,
    DomainViolation,
    Expr,
    FormalError,
    Goal,
    ModelingState,
    Relation,
    Var,
    Variable,
    constraint_variables,
)


class ParseError(FormalError):
    def __init__(self, position: int, expected: str):
        self.position = position
        self.expected = expected
        super().__init__(f"syntax error at position {position}: expected {expected}")


class UnsupportedConstruct(FormalError):
    def __init__(self, form: str):
        self.form = form
        super().__init__(f"unsupported construct: {form}")


_TOKEN = re.compile(r"\s*(;[^\n]*|\(|\)|[^\s()]+)")
_NUMBER = re.compile(r"-?\d+(\.\d+)?$")
_RELATIONS = {r.value: r for r in Relation}
_SORTS = {"Int", "Real"}


def _tokenize(text: str) -> list[tuple[str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            break
        tok = m.group(1)
        if not tok.startswith(";"):
            tokens.append((tok, m.start(1)))
        pos = m.end()
    if text[pos:].strip():
        raise ParseError(pos, "token")
    return tokens


SExpr = Union[tuple, str]
# An s-expression is a (children..., position) tuple or an atom (token, position).


def _read_sexprs(tokens: list[tuple[str, int]]) -> list:
    stack: list[list] = [[]]
    positions: list[int] = []
    for tok, pos in tokens:
        if tok == "(":
            stack.append([])
            positions.append(pos)
        elif tok == ")":
            if len(stack) == 1:
                raise ParseError(pos, "matching '('")
            done = stack.pop()
            open_pos = positions.pop()
            stack[-1].append((tuple(done), open_pos))
        else:
            stack[-1].append((tok, pos))
    if len(stack) != 1:
        raise ParseError(positions[-1], "matching ')'")
    return stack[0]


def _is_atom(node) -> bool:
    return isinstance(node[0], str)


def _fraction_from_token(tok: str) -> Fraction:
    # Decimal text converts exactly: "12.0" -> 12, "0.25" -> 1/4.
    return Fraction(tok)


class _Parser:
    def __init__(self, signed_ints: bool = False):
        self.signed_ints = signed_ints
        self.variables: list[Variable] = []
        self.declared: dict[str, Variable] = {}
        self.constraints: list[Constraint] = []
        self.goal: Optional[Goal] = None
        self.saw_check_sat = False

    def run(self, text: str) -> ModelingState:
        for node in _read_sexprs(_tokenize(text)):
            self.command(node)
        return ModelingState(tuple(self.variables), tuple(self.constraints), self.goal)

    def command(self, node):
        if _is_atom(node):
            raise ParseError(node[1], "a command in parentheses")
        children, pos = node
        if not children or not _is_atom(children[0]):
            raise ParseError(pos, "command name")
        head = children[0][0]
        if head == "declare-fun":
            self.declare_fun(children, pos)
        elif head == "assert":
            self.assert_form(children, pos)
        elif head == "check-sat":
            self.saw_check_sat = True
        elif head == "get-value":
            self.get_value(children, pos)
        else:
            raise UnsupportedConstruct(head)

    def declare_fun(self, children, pos):
        if len(children) != 4:
            raise ParseError(pos, "(declare-fun name () sort)")
        name_node, args_node, sort_node = children[1], children[2], children[3]
        if not _is_atom(name_node):
            raise ParseError(name_node[1], "a symbol")
        name = name_node[0]
        if _NUMBER.match(name):
            raise ParseError(name_node[1], "a symbol, not a number")
        if name in self.declared:
            raise ParseError(name_node[1], f"a fresh symbol ('{name}' already declared)")
        if _is_atom(args_node) or args_node[0] != ():
            raise UnsupportedConstruct("declare-fun with arguments (only arity 0 supported)")
        if not _is_atom(sort_node) or sort_node[0] not in _SORTS:
            raise UnsupportedConstruct(
                f"sort {sort_node[0] if _is_atom(sort_node) else '(...)'} (only Int/Real)"
            )
        if sort_node[0] == "Real":
            domain = Domain.REAL
        else:
            domain = Domain.INT if self.signed_ints else Domain.NAT
        var = Variable(name, domain)
        self.variables.append(var)
        self.declared[name] = var

    def assert_form(self, children, pos):
        if len(children) != 2:
            raise ParseError(pos, "(assert (rel e1 e2))")
        body = children[1]
        if _is_atom(body):
            raise ParseError(body[1], "a relation application")
        inner, inner_pos = body
        if not inner or not _is_atom(inner[0]):
            raise ParseError(inner_pos, "a relation symbol")
        rel_tok = inner[0][0]
        if rel_tok not in _RELATIONS:
            if rel_tok in ("+", "-", "*", "/"):
                raise ParseError(inner[0][1], "a relation, not arithmetic")
            raise UnsupportedConstruct(f"relation '{rel_tok}'")
        if len(inner) != 3:
            raise UnsupportedConstruct(f"'{rel_tok}' with {len(inner) - 1} arguments (need 2)")
        left = self.expression(inner[1])
        right = self.expression(inner[2])
        constraint = Constraint(left, _RELATIONS[rel_tok], right)
        self.check_nonnegative_literal(constraint)
        self.constraints.append(constraint)

    def check_nonnegative_literal(self, constraint: Constraint):
        # Int maps to naturals: a direct negative constant assignment is an error.
        for var_side, const_side in ((constraint.left, constraint.right),
                                     (constraint.right, constraint.left)):
            if (constraint.relation is Relation.EQ
                    and isinstance(var_side, Var) and isinstance(const_side, Const)):
                domain = self.declared[var_side.name].domain
                if domain is Domain.NAT and const_side.value < 0:
                    raise DomainViolation(var_side.name, const_side.value, domain)

    def expression(self, node) -> Expr:
        if _is_atom(node):
            tok, pos = node
            if _NUMBER.match(tok):
                return Const(_fraction_from_token(tok))
            if tok not in self.declared:
                raise ParseError(pos, f"a declared symbol or number (got '{tok}')")
            return Var(tok)
        children, pos = node
        if not children or not _is_atom(children[0]):
            raise ParseError(pos, "an operator")
        op = children[0][0]
        if op not in ("+", "-", "*", "/"):
            raise UnsupportedConstruct(f"operator '{op}'")
        args = [self.expression(child) for child in children[1:]]
        if not args:
            raise ParseError(pos, "operands")
        if len(args) == 1:
            if op == "-":
                if isinstance(args[0], Const):
                    return Const(-args[0].value)
                return BinOp("-", Const(Fraction(0)), args[0])
            raise ParseError(pos, f"two operands for '{op}'")
        folded = args[0]
        for arg in args[1:]:
            folded = BinOp(op, folded, arg)
        if (op == "/" and isinstance(folded, BinOp)
                and isinstance(folded.left, Const) and isinstance(folded.right, Const)
                and folded.right.value != 0):
            # Constant division is a rational literal, e.g. (/ 5 6).
            return Const(folded.left.value / folded.right.value)
        return folded

    def get_value(self, children, pos):
        if self.goal is not None:
            raise UnsupportedConstruct("multiple get-value commands")
        if len(children) != 2 or _is_atom(children[1]):
            raise ParseError(pos, "(get-value (variable))")
        targets, _ = children[1]
        if len(targets) != 1:
            raise UnsupportedConstruct("get-value over multiple terms")
        target = targets[0]
        if not _is_atom(target):
            raise UnsupportedConstruct("get-value over a compound term")
        name = target[0]
        if name not in self.declared:
            raise ParseError(target[1], f"a declared symbol (got '{name}')")
        self.goal = Goal(name)


def parse_formal(text: str, *, signed_ints: bool = False) -> ModelingState:
    """Parse fragment text into a ModelingState.

    ``signed_ints`` maps the Int sort to signed integers instead of naturals.
    """
    return _Parser(signed_ints=signed_ints).run(text)


# ----------------------------- emission -----------------------------

_HEADER = "; formal problem export"


def _terminating_decimal(value: Fraction) -> Optional[str]:
    """Exact decimal text for the fraction, or None if it does not terminate."""
    den = value.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        return None
    digits = max(twos, fives)
    if digits == 0:
        return str(value.numerator)
    scaled = value.numerator * 10 ** digits // value.denominator
    sign = "-" if scaled < 0 else ""
    text = str(abs(scaled)).rjust(digits + 1, "0")
    return f"{sign}{text[:-digits]}.{text[-digits:]}"


def _emit_literal(value: Fraction, real_context: bool) -> str:
    if value.denominator == 1:
        if value < 0:
            inner = f"{-value.numerator}.0" if real_context else str(-value.numerator)
            return f"(- {inner})"
        return f"{value.numerator}.0" if real_context else str(value.numerator)
    decimal = _terminating_decimal(value)
    if decimal is not None:
        if value < 0:
            return f"(- {decimal.lstrip('-')})"
        return decimal
    num, den = value.numerator, value.denominator
    if num < 0:
        return f"(- (/ {-num} {den}))"
    return f"(/ {num} {den})"


def _emit_expr(expr: Expr, real_context: bool) -> str:
    if isinstance(expr, Const):
        return _emit_literal(expr.value, real_context)
    if isinstance(expr, Var):
        return expr.name
    return f"({expr.op} {_emit_expr(expr.left, real_context)} {_emit_expr(expr.right, real_context)})"


def _real_context(constraint: Constraint, domains: dict[str, Domain]) -> bool:
    if any(domains[name] is Domain.REAL for name in constraint_variables(constraint)):
        return True

    def has_fractional(expr: Expr) -> bool:
        if isinstance(expr, Const):
            return expr.value.denominator != 1
        if isinstance(expr, Var):
            return False
        return has_fractional(expr.left) or has_fractional(expr.right)

    return has_fractional(constraint.left) or has_fractional(constraint.right)


def emit_smtlib(state: ModelingState) -> str:
    """Canonical fragment text for the state.

    Asserted literals in real-sorted constraints carry a ``.0`` suffix;
    positive-natural domains are emitted as Int plus an explicit
    positivity assertion (the fragment has no dedicated sort for them).
    """
    lines = [_HEADER]
    domains = state.domains
    for var in state.variables:
        sort = "Real" if var.domain is Domain.REAL else "Int"
        lines.append(f"(declare-fun {var.name} () {sort})")
    for var in state.variables:
        if var.domain is Domain.POS_NAT:
            lines.append(f"(assert (>= {var.name} 1))")
    for c in state.constraints:
        real = _real_context(c, domains)
        lines.append(
            f"(assert ({c.relation.value} {_emit_expr(c.left, real)} {_emit_expr(c.right, real)}))"
        )
    lines.append("(check-sat)")
    if state.goal is not None:
        lines.append(f"(get-value ({state.goal.target}))")
    return "\n".join(lines) + "\n"
