"""Table transformation: LLM output parsing, seed fidelity, validation."""

import json
from fractions import Fraction

import pytest

from mathtab.decouple import SeedProblem
from mathtab.formal import parse_formal, solve
from mathtab.llm import ScriptedProvider
from mathtab.transform import (
    Cell,
    Column,
    ColumnKind,
    MalformedLLMOutput,
    MissingVariable,
    Provenance,
    SeedTable,
    ValueRange,
    align_placeholders,
    parse_transform_output,
    transform,
    validate_table,
)
from fixtures_weng import JANET_PROGRAM, WENG_PROGRAM

WENG_TEXT = (
    "Weng earns $12 an hour for babysitting. Yesterday, she just did "
    "50 minutes of babysitting. How much did she earn?"
)
JANET_TEXT = (
    "Janet's ducks lay 16 eggs per day. She eats three for breakfast every "
    "morning and bakes muffins for her friends every day with four. She sells "
    "the remainder at the farmers' market daily for $2 per fresh duck egg. "
    "How much in dollars does she make every day at the farmers' market?"
)

WENG_TRANSFORM = json.dumps({
    "problem": WENG_TEXT,
    "table": {
        "name": "Weng",
        "hourly_rate": [12, "Given"],
        "minutes_worked": [50, "Given"],
        "minutes_per_hour": [60, "Given"],
        "hours_worked": [0.8333, "Calculated"],
        "earnings": [10, "Calculated"],
    },
    "generalization": (
        "Weng earns $x an hour for babysitting. Yesterday, she just did "
        "t minutes of babysitting. How much did she earn?"
    ),
    "value_ranges": {
        "name": None,
        "hourly_rate": {"min": 7.25, "max": 100, "unit": "dollars"},
        "minutes_worked": {"min": 10, "max": 1440, "unit": "minutes"},
        "minutes_per_hour": {"min": 60, "max": 60, "unit": "minutes"},
    },
})

JANET_TRANSFORM = json.dumps({
    "problem": JANET_TEXT,
    "table": {
        "name": "Janet",
        "eggs_per_day": [16, "Given"],
        "eggs_eaten": [3, "Given"],
        "eggs_for_muffins": [4, "Given"],
        "price_per_egg": [2, "Given"],
        "eggs_for_sale": [9, "Calculated"],
        "earnings": [18, "Calculated"],
    },
    "generalization": (
        "Janet's ducks lay x eggs per day. She eats y for breakfast every "
        "morning and bakes muffins for her friends every day with z. She sells "
        "the remainder at the farmers' market daily for $w per fresh duck egg. "
        "How much in dollars does she make every day at the farmers' market?"
    ),
    "value_ranges": {
        "eggs_per_day": {"min": 1, "max": 100, "unit": "eggs"},
        "eggs_eaten": {"min": 0, "max": 10, "unit": "eggs"},
        "eggs_for_muffins": {"min": 0, "max": 20, "unit": "eggs"},
        "price_per_egg": {"min": 1, "max": 10, "unit": "dollars"},
    },
})


def weng_pair():
    problem = SeedProblem("weng", WENG_TEXT, Fraction(10))
    state = parse_formal(WENG_PROGRAM)
    return problem, state


def janet_pair():
    problem = SeedProblem("janet", JANET_TEXT, Fraction(18))
    state = parse_formal(JANET_PROGRAM)
    return problem, state


def test_weng_transform_matches_expected_layout():
    problem, state = weng_pair()
    blurred, seed = transform(problem, state, ScriptedProvider([WENG_TRANSFORM]))
    keys = [c.key for c in seed.columns]
    assert keys == ["name", "hourly_rate", "minutes_worked", "minutes_per_hour"]
    assert seed.seed_row["hourly_rate"].value == 12
    assert "$x an hour" in blurred.text
    assert blurred.placeholder_map == {"x": "hourly_rate", "t": "minutes_worked"}
    # calculated entries are metadata, not columns
    assert set(seed.calculated) == {"hours_worked", "earnings"}
    assert seed.calculated["earnings"].value == Fraction(10)


def test_janet_seed_row_comes_from_solver():
    problem, state = janet_pair()
    _, seed = transform(problem, state, ScriptedProvider([JANET_TRANSFORM]))
    assert seed.seed_name == "Janet"
    values = {k: c.value for k, c in seed.seed_row.items() if k != "name"}
    assert values == {
        "eggs_per_day": Fraction(16),
        "eggs_eaten": Fraction(3),
        "eggs_for_muffins": Fraction(4),
        "price_per_egg": Fraction(2),
    }


def test_seed_row_fidelity_ignores_llm_echoed_numbers():
    problem, state = janet_pair()
    doctored = JANET_TRANSFORM.replace('"eggs_per_day": [16, "Given"]',
                                       '"eggs_per_day": [99, "Given"]')
    _, seed = transform(problem, state, ScriptedProvider([doctored]))
    assert seed.seed_row["eggs_per_day"].value == Fraction(16)


def test_placeholders_map_to_given_columns():
    problem, state = janet_pair()
    blurred, seed = transform(problem, state, ScriptedProvider([JANET_TRANSFORM]))
    given = {c.key for c in seed.columns if c.kind is ColumnKind.GIVEN}
    assert blurred.placeholder_map == {
        "x": "eggs_per_day", "y": "eggs_eaten",
        "z": "eggs_for_muffins", "w": "price_per_egg",
    }
    assert set(blurred.placeholder_map.values()) <= given


def test_word_numbers_align():
    mapping = align_placeholders(
        "She eats three eggs.", "She eats y eggs.", {"eggs_eaten": Fraction(3)}
    )
    assert mapping == {"y": "eggs_eaten"}


def test_missing_variable_raises():
    problem, state = janet_pair()
    broken = json.loads(JANET_TRANSFORM)
    del broken["table"]["price_per_egg"]
    with pytest.raises(MissingVariable):
        transform(problem, state, ScriptedProvider([json.dumps(broken)]))


def test_malformed_output_retries_then_succeeds():
    problem, state = weng_pair()
    provider = ScriptedProvider(["not json at all", WENG_TRANSFORM])
    _, seed = transform(problem, state, provider)
    assert seed.seed_name == "Weng"
    assert len(provider.calls) == 2
    assert "could not be used" in provider.calls[1][1]["content"]


def test_malformed_output_exhausts_retries():
    problem, state = weng_pair()
    with pytest.raises(MalformedLLMOutput):
        transform(problem, state, ScriptedProvider(["nope"] * 3), max_retries=2)


def test_value_range_defaults_fill_missing_entries():
    problem, state = janet_pair()
    trimmed = json.loads(JANET_TRANSFORM)
    trimmed["value_ranges"] = {"eggs_per_day": {"min": 1, "max": 100, "unit": "eggs"}}
    _, seed = transform(problem, state, ScriptedProvider([json.dumps(trimmed)]))
    # omitted ranges default to [value/2, value*10] with unit unknown
    assert seed.value_ranges["price_per_egg"] == ValueRange(
        Fraction(1), Fraction(20), "unknown"
    )


def test_validate_table_janet_ok():
    # solver oracle: (16 - 3 - 4) * 2 = 18
    problem, state = janet_pair()
    _, seed = transform(problem, state, ScriptedProvider([JANET_TRANSFORM]))
    report = validate_table(state, seed)
    assert report.ok
    assert report.recomputed == Fraction(18)


def test_validate_table_detects_altered_price():
    # solver oracle: (16 - 3 - 4) * 3 = 27
    problem, state = janet_pair()
    _, seed = transform(problem, state, ScriptedProvider([JANET_TRANSFORM]))
    seed.seed_row["price_per_egg"] = Cell(Fraction(3), Provenance.GIVEN)
    report = validate_table(state, seed)
    assert not report.ok
    assert report.recomputed == Fraction(27)
    assert report.expected == Fraction(18)


def test_validate_trivial_table_with_no_given_columns():
    state = parse_formal(
        "(declare-fun answer () Int)(assert (= answer 5))(check-sat)(get-value (answer))"
    )
    table = SeedTable(
        columns=[Column("name", "name", ColumnKind.NAME)],
        seed_row={"name": Cell("Pat", Provenance.GIVEN)},
        value_ranges={},
    )
    report = validate_table(state, table)
    assert report.ok
    assert report.recomputed == Fraction(5)


def test_seed_table_requires_one_name_column():
    with pytest.raises(ValueError):
        SeedTable(columns=[], seed_row={}, value_ranges={})


def test_validation_agrees_with_brute_force_substitution():
    # enumerate all valuations of the swapped-in state independently
    from mathtab.transform import swap_in_facts, tabled_facts
    from mathtab.dataset import load_transformed_corpus
    from conftest import FIXTURES
    from oracles import brute_force

    corpus = load_transformed_corpus(FIXTURES / "transformed.jsonl")
    for problem_id in ("janet", "omar", "tara", "milo"):
        entry = next(e for e in corpus if e.problem_id == problem_id)
        report = validate_table(entry.state, entry.seed)
        keys, facts = tabled_facts(entry.seed)
        solutions = brute_force(swap_in_facts(entry.state, keys, facts))
        assert len(solutions) == 1
        assert report.ok
        assert solutions[0][entry.state.goal.target] == report.recomputed
