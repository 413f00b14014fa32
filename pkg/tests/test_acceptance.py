"""Acceptance suite: one test per shipping criterion, one PASS line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the line printed
per criterion; each line names the criterion and the measured outcome.
"""

import json
import random
import time
from fractions import Fraction

import pytest

from mathtab.augment import (
    AugOp,
    PoolExhausted,
    TrapType,
    apply_sequence,
    from_seed,
)
from mathtab.dataset import (
    build_subset,
    default_recipes,
    instances_jsonl,
    load_transformed_corpus,
)
from mathtab.decouple import SeedProblem, load_corpus
from mathtab.evaluate import aggregate, score, score_probes
from mathtab.formal import (
    SolveStatus,
    Const,
    Constraint,
    Relation,
    Var,
    emit_smtlib,
    parse_formal,
    solve,
)
from mathtab.llm import ReplayProvider
from mathtab.serialize import FormatError, TableFormat, parse_back, render, values_grid
from mathtab.transform import swap_in_facts, tabled_facts, transform_corpus, validate_table
from conftest import FIXTURES
from fixtures_weng import WENG_PROGRAM
from oracles import brute_force, random_chain
from test_serialize import random_table


def report(criterion: str, detail: str):
    print(f"[PASS] {criterion}: {detail}")


# -------------------------------------------------------------------------
# 1. solver vs brute-force oracle on 500 random chains, under 10 seconds
# -------------------------------------------------------------------------

def test_c1_solver_oracle_suite():
    rng = random.Random(20240809)
    start = time.perf_counter()
    for _ in range(500):
        state, chained_values = random_chain(
            rng, max_vars=8, const_lo=0, const_hi=20, value_cap=400
        )
        result = solve(state)
        assert result.status is SolveStatus.SAT
        assert result.assignment == chained_values
        solutions = brute_force(state, lo=0, hi=400)
        assert len(solutions) == 1
        assert solutions[0] == result.assignment
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0, f"oracle suite took {elapsed:.1f}s"
    report("C1 solver oracle suite",
           f"500/500 chains agree with enumerator in {elapsed:.1f}s")


# -------------------------------------------------------------------------
# 2. canonical babysitting program: parse, solve to exactly 10, round-trip
# -------------------------------------------------------------------------

def test_c2_weng_fixture():
    state = parse_formal(WENG_PROGRAM)
    result = solve(state)
    assert result.status is SolveStatus.SAT
    assert result.assignment["earnings"] == Fraction(10)
    emitted = emit_smtlib(state)
    assert "(assert (= hourly_rate 12.0))" in emitted
    assert parse_formal(emitted) == state
    report("C2 babysitting fixture", "earnings = 10 exactly; emission round-trips")


# -------------------------------------------------------------------------
# 3. end-to-end replay: decouple -> transform -> validate over the corpus
# -------------------------------------------------------------------------

def test_c3_end_to_end_replay():
    problems = load_corpus(FIXTURES / "corpus.jsonl")
    assert len(problems) >= 20
    provider = ReplayProvider.from_transcript(FIXTURES / "replay_transcript.jsonl")
    entries, failures = transform_corpus(problems, provider)
    assert failures == []
    assert len(entries) == len(problems)
    assert all(entry.validation.ok for entry in entries)

    janet = next(e for e in entries if e.problem_id == "janet")
    seed_values = {
        key: cell.value for key, cell in janet.seed.seed_row.items() if key != "name"
    }
    assert seed_values == {
        "eggs_per_day": Fraction(16),
        "eggs_eaten": Fraction(3),
        "eggs_for_muffins": Fraction(4),
        "price_per_egg": Fraction(2),
    }
    assert janet.validation.expected == Fraction(18)
    report("C3 end-to-end replay",
           f"{len(entries)}/{len(problems)} problems validated; "
           "seed row 16/3/4/2, gold 18")


# -------------------------------------------------------------------------
# 4. 1,000 imperfect instances: exact 50/50 split, every trap solver-verified
# -------------------------------------------------------------------------

def test_c4_trap_verification_at_scale():
    corpus = load_transformed_corpus(FIXTURES / "transformed.jsonl")
    recipe = default_recipes(master_seed=404)["imperfect"]
    recipe.slots = 1000
    instances, manifest = build_subset(corpus, recipe)
    assert len(instances) == 1000
    kinds = [i.trap_type for i in instances]
    assert kinds.count(TrapType.MISSING) == 500
    assert kinds.count(TrapType.CONTRA) == 500

    # independent re-verification straight from the emitted tables
    states = {e.problem_id: e.state for e in corpus}
    for instance in instances:
        state = states[instance.problem_id]
        keys, facts = tabled_facts(instance.table)
        if instance.trap_type is TrapType.MISSING:
            status = solve(swap_in_facts(state, keys, facts)).status
            assert status is SolveStatus.UNDERDETERMINED
        else:
            trap = instance.table.trap
            extra = Constraint(Var(trap.variable), Relation.EQ,
                               Const(trap.injected_value))
            status = solve(swap_in_facts(state, keys, list(facts) + [extra])).status
            assert status is SolveStatus.CONTRADICTION
    rejected = manifest["counts"]["excluded"]
    report("C4 trap verification",
           f"1000 instances, split 500/500, 100% solver-verified "
           f"({rejected} rejected candidates logged)")


# -------------------------------------------------------------------------
# 5. 1,000 fuzzed benign sequences preserve the answer; builds are identical
# -------------------------------------------------------------------------

def test_c5_augmentation_invariance():
    corpus = load_transformed_corpus(FIXTURES / "transformed.jsonl")
    rng = random.Random(505)
    checked = 0
    while checked < 1000:
        entry = corpus[checked % len(corpus)]
        ops = []
        for _ in range(rng.randint(1, 4)):
            kind = rng.choice(["row_aug", "col_aug", "ord_shf"])
            if kind == "row_aug":
                ops.append(AugOp("row_aug", rng_seed=rng.getrandbits(32),
                                 count=rng.randint(1, 12)))
            elif kind == "col_aug":
                ops.append(AugOp("col_aug", rng_seed=rng.getrandbits(32),
                                 count=rng.randint(1, 2)))
            else:
                ops.append(AugOp("ord_shf", rng_seed=rng.getrandbits(32)))
        try:
            table = apply_sequence(entry.seed, ops, entry.state)
        except PoolExhausted:
            continue
        keys, facts = tabled_facts(table)
        result = solve(swap_in_facts(entry.state, keys, facts))
        assert result.status is SolveStatus.SAT
        assert result.assignment[entry.state.goal.target] == entry.validation.expected
        checked += 1

    recipe = default_recipes(master_seed=55)["imperfect"]
    recipe.slots = 60
    first, _ = build_subset(corpus, recipe)
    second, _ = build_subset(corpus, recipe)
    assert instances_jsonl(first) == instances_jsonl(second)
    report("C5 augmentation invariance",
           "1000 fuzzed sequences preserved exact answers; "
           "rebuild is byte-identical")


# -------------------------------------------------------------------------
# 6. serialization goldens, 500-table round-trip, duplicate-header JSON ban
# -------------------------------------------------------------------------

def test_c6_serialization_goldens():
    corpus = load_transformed_corpus(FIXTURES / "transformed.jsonl")
    janet = next(e for e in corpus if e.problem_id == "janet")
    seed_table = from_seed(janet.seed, janet.state)
    easy_table = apply_sequence(
        janet.seed, [AugOp("row_aug", rng_seed=742001, count=10)], janet.state
    )
    suffixes = {TableFormat.SERIALIZED: "se.txt", TableFormat.MARKDOWN: "md.txt",
                TableFormat.JSON: "json.txt"}
    for label, table in (("janet_seed", seed_table), ("janet_easy", easy_table)):
        for fmt, suffix in suffixes.items():
            golden = (FIXTURES / "golden" / f"{label}.{suffix}").read_text(
                encoding="utf-8"
            )
            assert render(table, fmt) == golden, f"{label} {fmt.value} drifted"

    rng = random.Random(606)
    for _ in range(500):
        table = random_table(rng)
        for fmt in TableFormat:
            assert values_grid(parse_back(render(table, fmt), fmt)) \
                == values_grid(table)

    trapped = apply_sequence(
        janet.seed,
        [AugOp("inf_mut", rng_seed=9, trap=TrapType.DIRECT_CONTRA)],
        janet.state,
    )
    with pytest.raises(FormatError):
        render(trapped, TableFormat.JSON)
    report("C6 serialization goldens",
           "6 golden files byte-identical; 500-table round-trip; "
           "duplicate-header JSON rejected")


# -------------------------------------------------------------------------
# 7. metrics oracle: hand-computed numbers from a 12-transcript fixture
# -------------------------------------------------------------------------

def test_c7_metrics_oracle():
    from test_evaluate import answer, make_instance, trap
    from mathtab.dataset import RetrievalProbe

    instances = [
        make_instance("e1", "easy", answer(18), n_variables=6),
        make_instance("e2", "easy", answer(10), n_variables=5),
        make_instance("m1", "medium", answer(280), n_variables=5),
        make_instance("m2", "medium", answer(54), n_variables=3),
        make_instance("h1", "hard", answer(765), n_variables=3),
        make_instance("h2", "hard", answer(140), n_variables=7),
        make_instance("t1", "imperfect", trap(TrapType.MISSING)),
        make_instance("t2", "imperfect", trap(TrapType.MISSING)),
        make_instance("t3", "imperfect", trap(TrapType.CONTRA)),
        make_instance("t4", "imperfect", trap(TrapType.CONTRA)),
    ]
    transcripts = [
        {"instance_id": "e1", "raw_response": "sum is right #### 18"},
        {"instance_id": "e2", "raw_response": "I think the answer is 12"},
        {"instance_id": "m1", "raw_response": "#### 280"},
        {"instance_id": "m2", "raw_response": r"\boxed{54}"},
        {"instance_id": "h1", "raw_response": ""},
        {"instance_id": "h2", "raw_response": "#### 140"},
        {"instance_id": "e1", "raw_response": "#### 18", "variant": "warned"},
        {"instance_id": "m1", "raw_response": "This cannot be determined.",
         "variant": "warned"},
        {"instance_id": "t1", "raw_response": "A value is missing; unsolvable."},
        {"instance_id": "t2", "raw_response": "#### 25"},
        {"instance_id": "t3", "raw_response": "The facts contradict each other."},
        {"instance_id": "t4", "raw_response": "I get 40"},
    ]
    assert len(transcripts) == 12
    records = score(instances, transcripts)

    probes = [
        RetrievalProbe("probe:e1:a", "e1", "a", "What is a?", Fraction(16)),
        RetrievalProbe("probe:e2:b", "e2", "b", "What is b?", Fraction(2)),
    ]
    probe_records = score_probes(probes, [
        {"instance_id": "probe:e1:a", "raw_response": "#### 16"},
        {"instance_id": "probe:e2:b", "raw_response": "#### 3"},
    ])
    metrics = aggregate(records, instances, probe_records, probes)

    # hand-computed: plain 4/6 correct; warned 1/2; traps 1/2 and 1/2
    assert metrics.well_defined_accuracy_plain == Fraction(4, 6)
    assert metrics.well_defined_accuracy_warned == Fraction(1, 2)
    assert metrics.warned_delta == Fraction(4, 6) - Fraction(1, 2) == Fraction(1, 6)
    assert metrics.missing_rejection_rate == Fraction(1, 2)
    assert metrics.contra_rejection_rate == Fraction(1, 2)
    assert metrics.rejection_denominators == {"missing": 2, "contra": 2}
    assert metrics.per_subset_accuracy == {
        "easy": Fraction(1, 2), "medium": Fraction(1), "hard": Fraction(1, 2),
    }
    assert metrics.difficulty_grid == {
        "easy": [None, Fraction(0), Fraction(1)],
        "medium": [Fraction(1), Fraction(1), None],
        "hard": [Fraction(0), None, Fraction(1)],
    }
    assert metrics.retrieval_accuracy == {"easy": Fraction(1, 2)}
    assert metrics.reasoning_accuracy["easy"] == Fraction(1, 2)
    report("C7 metrics oracle",
           "12-transcript fixture reproduces hand-computed rates exactly "
           "(delta 1/6, rejections 1/2 and 1/2, retrieval vs reasoning)")


# -------------------------------------------------------------------------
# 8. default recipes produce the documented shapes; manifest carries a note
# -------------------------------------------------------------------------

def test_c8_recipe_stats():
    corpus = load_transformed_corpus(FIXTURES / "transformed.jsonl")
    recipes = default_recipes(master_seed=808)
    expected_rows = {"easy": 11, "medium": 21, "hard": 21}
    manifests = {}
    base_cols = {}
    for name, rows in expected_rows.items():
        instances, manifest = build_subset(corpus, recipes[name])
        manifests[name] = manifest
        assert all(i.difficulty_meta["n_rows"] == rows for i in instances), name
        assert manifest["stats"][name]["mean_rows"] == rows
        base_cols[name] = {
            i.problem_id: i.difficulty_meta["n_cols"] for i in instances
        }
    for problem_id, cols in base_cols["hard"].items():
        assert cols == base_cols["medium"][problem_id] + 4
    for manifest in manifests.values():
        assert any("recipe operator parameters" in note
                   for note in manifest["notes"])
    report("C8 recipe stats",
           "data rows 11/21/21; hard adds 4 irrelevant columns; "
           "manifest notes where the stats come from")
