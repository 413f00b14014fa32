"""Parse a formal problem, solve it exactly, and emit canonical text.

The babysitting problem: $12/hour for 50 minutes. The solver works in
exact rationals, so the intermediate 50/60 hours stays 5/6 and the final
answer is exactly 10, never 9.999....
"""

from fractions import Fraction

from mathtab.formal import emit_smtlib, parse_formal, solve

PROGRAM = """\
(declare-fun hourly_rate () Real)
(declare-fun minutes_worked () Int)
(declare-fun minutes_per_hour () Int)
(declare-fun hours_worked () Real)
(declare-fun earnings () Real)
(assert (= hourly_rate 12.0))
(assert (= minutes_worked 50))
(assert (= minutes_per_hour 60))
(assert (= hours_worked (/ minutes_worked minutes_per_hour)))
(assert (= earnings (* hourly_rate hours_worked)))
(check-sat)
(get-value (earnings))
"""

state = parse_formal(PROGRAM)
print(f"parsed {len(state.variables)} variables, "
      f"{len(state.constraints)} constraints, goal = {state.goal.target}")

result = solve(state)
print(f"status: {result.status.value}")
for name, value in result.assignment.items():
    note = " (exact rational)" if value.denominator != 1 else ""
    print(f"  {name} = {value}{note}")

assert result.assignment["earnings"] == Fraction(10)

print("\ncanonical emission, which parses back to the same state:")
print(emit_smtlib(state))

# a contradiction: assert a conflicting fact and watch the solver object
conflicted = PROGRAM.replace("(check-sat)", "(assert (= earnings 11.0))(check-sat)")
bad = solve(parse_formal(conflicted))
print(f"with a conflicting fact: {bad.status.value}")
first, second = bad.conflict
print("  clashing pair found (removing both resolves the conflict)")
