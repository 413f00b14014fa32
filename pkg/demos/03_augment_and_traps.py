"""Grow a seed table into easy, hard, and trapped variants.

Benign operators (row growth, irrelevant columns, shuffling) never change
the answer; trap injection makes the problem unsolvable in a way the
solver can certify: a nulled cell leaves the goal underdetermined, an
injected implicit variable contradicts the derivable value.
"""

from pathlib import Path

from mathtab.augment import AugOp, TrapType, apply_sequence, verify_trap
from mathtab.dataset import load_transformed_corpus
from mathtab.formal import SolveStatus, solve
from mathtab.serialize import TableFormat, render
from mathtab.transform import swap_in_facts, tabled_facts

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
corpus = load_transformed_corpus(FIXTURES / "transformed.jsonl")
janet = next(e for e in corpus if e.problem_id == "janet")

easy = apply_sequence(janet.seed, [AugOp("row_aug", rng_seed=1, count=10)],
                      janet.state)
print(f"easy table: {easy.n_rows} rows x {easy.n_cols} columns")

hard = apply_sequence(
    janet.seed,
    [AugOp("row_aug", rng_seed=1, count=20),
     AugOp("ord_shf", rng_seed=2),
     AugOp("col_aug", rng_seed=3, count=4)],
    janet.state,
)
print(f"hard table: {hard.n_rows} rows x {hard.n_cols} columns")
keys, facts = tabled_facts(hard)
result = solve(swap_in_facts(janet.state, keys, facts))
print(f"hard table still solves to {result.assignment['earnings']}")

missing = apply_sequence(
    janet.seed,
    [AugOp("row_aug", rng_seed=4, count=5),
     AugOp("inf_mut", rng_seed=5, trap=TrapType.MISSING)],
    janet.state,
)
print(f"\nmissing trap: nulled '{missing.trap.variable}' "
      f"(was {missing.trap.derived_value})")
keys, facts = tabled_facts(missing)
print("solver says:", solve(swap_in_facts(janet.state, keys, facts)).status.value)
print("verified:", verify_trap(janet.state, missing))

contra = apply_sequence(
    janet.seed,
    [AugOp("inf_mut", rng_seed=6, trap=TrapType.CONTRA)],
    janet.state,
)
print(f"\ncontra trap: injected {contra.trap.variable} = "
      f"{contra.trap.injected_value} (derivable value: {contra.trap.derived_value})")
print("verified:", verify_trap(janet.state, contra))
print("\nthe trapped seed row, as a model would see it:")
print(render(contra, TableFormat.SERIALIZED).splitlines()[contra.seed_row_index])
