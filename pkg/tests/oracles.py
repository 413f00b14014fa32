"""Independent oracles: brute-force search over small integer valuations.

The enumerator knows nothing about propagation or isolation; it assigns
candidate values variable by variable and keeps whatever satisfies every
constraint. Deliberately dumb so it cannot share bugs with the solver.
"""

import random
from fractions import Fraction

from mathtab.formal import (
    BinOp,
    Const,
    Constraint,
    DivisionByZero,
    Domain,
    Goal,
    ModelingState,
    Relation,
    Var,
    Variable,
    constraint_variables,
    evaluate,
)


def brute_force(state, lo=0, hi=400, max_solutions=3, max_total=2000):
    """All total valuations over [lo, hi] satisfying every constraint.

    Stops early once ``max_solutions`` solutions with distinct goal values
    have been found (enough to classify unique vs underdetermined), or the
    total solution count exceeds ``max_total``.
    """
    names = [v.name for v in state.variables]
    goal = state.goal.target if state.goal else None
    solutions = []
    goal_values = set()

    # a constraint is checkable once its last-declared variable is assigned;
    # indexing by that variable makes the candidate loop incremental without
    # changing the generate-and-test semantics
    position = {name: i for i, name in enumerate(names)}
    checkable_at: dict[int, list] = {i: [] for i in range(len(names))}
    for c in state.constraints:
        used = constraint_variables(c)
        last = max((position[v] for v in used), default=0)
        checkable_at[last].append(c)

    def satisfied(constraints, partial):
        for c in constraints:
            try:
                left = evaluate(c.left, partial)
                right = evaluate(c.right, partial)
            except DivisionByZero:
                return False
            if not c.relation.holds(left, right):
                return False
        return True

    def extend(index, partial):
        if len(goal_values) >= max_solutions or len(solutions) >= max_total:
            return
        if index == len(names):
            solutions.append(dict(partial))
            if goal is not None:
                goal_values.add(partial[goal])
            else:
                goal_values.add(len(solutions))
            return
        name = names[index]
        checks = checkable_at[index]
        for value in range(lo, hi + 1):
            partial[name] = Fraction(value)
            if satisfied(checks, partial):
                extend(index + 1, partial)
            if len(goal_values) >= max_solutions or len(solutions) >= max_total:
                break
        del partial[name]

    extend(0, {})
    return solutions


def classify(solutions, goal):
    if not solutions:
        return "contradiction"
    values = {s[goal] for s in solutions}
    return "unique" if len(values) == 1 else "multiple"


_OPS = ("+", "-", "*", "/")


def random_chain(rng: random.Random, max_vars=8, const_lo=0, const_hi=20,
                 value_cap=400):
    """A random acyclic assignment chain with all values integral in range.

    Roughly half the variables are base facts (constant assignments); the
    rest are defined from earlier variables and constants. The final
    variable is the goal.
    """
    n = rng.randint(2, max_vars)
    names = [f"v{i}" for i in range(n)]
    values = {}
    constraints = []
    for i, name in enumerate(names):
        if i == 0 or (i < n - 1 and rng.random() < 0.45):
            value = Fraction(rng.randint(const_lo, const_hi))
            constraints.append(Constraint(Var(name), Relation.EQ, Const(value)))
            values[name] = value
            continue
        for _ in range(200):
            op = rng.choice(_OPS)
            left_name = rng.choice(names[:i])
            if rng.random() < 0.5:
                right_expr = Const(Fraction(rng.randint(max(const_lo, 1), const_hi)))
                right_val = right_expr.value
            else:
                right_pick = rng.choice(names[:i])
                right_expr = Var(right_pick)
                right_val = values[right_pick]
            left_val = values[left_name]
            if op == "+":
                value = left_val + right_val
            elif op == "-":
                value = left_val - right_val
            elif op == "*":
                value = left_val * right_val
            else:
                if right_val == 0:
                    continue
                value = left_val / right_val
            if value.denominator != 1 or not (0 <= value <= value_cap):
                continue
            constraints.append(
                Constraint(Var(name), Relation.EQ, BinOp(op, Var(left_name), right_expr))
            )
            values[name] = value
            break
        else:
            value = Fraction(rng.randint(const_lo, const_hi))
            constraints.append(Constraint(Var(name), Relation.EQ, Const(value)))
            values[name] = value
    variables = tuple(Variable(name, Domain.NAT) for name in names)
    state = ModelingState(variables, tuple(constraints), Goal(names[-1]))
    return state, values
