"""Text formats: rendering grammar, exact value round-trips, JSON rejection."""

import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from mathtab.augment import AugOp, TrapType, apply, from_seed
from mathtab.decouple import SeedProblem
from mathtab.formal import parse_formal
from mathtab.llm import ScriptedProvider
from mathtab.serialize import (
    FormatError,
    TableFormat,
    format_value,
    parse_back,
    parse_value,
    render,
    values_grid,
)
from mathtab.transform import Cell, Column, ColumnKind, Provenance, transform
from mathtab.augment import AugmentedTable
from fixtures_weng import JANET_PROGRAM
from test_transform import JANET_TRANSFORM, JANET_TEXT


def janet_table():
    problem = SeedProblem("janet", JANET_TEXT, Fraction(18))
    state = parse_formal(JANET_PROGRAM)
    _, seed = transform(problem, state, ScriptedProvider([JANET_TRANSFORM]))
    return from_seed(seed, state), state


def test_serialized_seed_row_matches_published_prefix():
    table, _ = janet_table()
    text = render(table, TableFormat.SERIALIZED)
    assert text.startswith("name: Janet, Eggs_per_day: 16")
    assert text == (
        "name: Janet, Eggs_per_day: 16, Eggs_eaten: 3, "
        "Eggs_for_muffins: 4, Price_per_egg: 2"
    )


def test_markdown_uses_pipe_delimiters():
    table, _ = janet_table()
    lines = render(table, TableFormat.MARKDOWN).splitlines()
    assert lines[0] == "| name | Eggs_per_day | Eggs_eaten | Eggs_for_muffins | Price_per_egg |"
    assert lines[1] == "| --- | --- | --- | --- | --- |"
    assert lines[2] == "| Janet | 16 | 3 | 4 | 2 |"


def test_json_renders_integer_without_decimal_point():
    table, _ = janet_table()
    text = render(table, TableFormat.JSON)
    assert '"Eggs_per_day": 16' in text
    assert "16.0" not in text


def test_empty_table_renders():
    table = AugmentedTable(
        columns=[Column("name", "name", ColumnKind.NAME)],
        rows=[], seed_row_index=None, value_ranges={},
    )
    assert render(table, TableFormat.JSON) == "[]"
    md = render(table, TableFormat.MARKDOWN).splitlines()
    assert len(md) == 2  # header and separator only
    assert render(table, TableFormat.SERIALIZED) == ""


def test_null_cells_render_as_null_in_all_formats():
    table, state = janet_table()
    trapped = apply(table, AugOp("inf_mut", rng_seed=1, trap=TrapType.MISSING), state)
    for fmt in TableFormat:
        assert "null" in render(trapped, fmt)


def test_format_value_rules():
    assert format_value(Fraction(16)) == "16"
    assert format_value(Fraction(5, 4)) == "1.25"
    assert format_value(Fraction(5, 6)) == "5/6"
    assert format_value(Fraction(-3, 2)) == "-1.5"
    assert format_value(None) == "null"
    assert parse_value("1.25") == Fraction(5, 4)
    assert parse_value("5/6") == Fraction(5, 6)
    assert parse_value("null") is None
    assert parse_value("Janet") == "Janet"


def test_direct_contra_renders_in_serialized_and_markdown_but_not_json():
    table, state = janet_table()
    trapped = apply(table, AugOp("inf_mut", rng_seed=2, trap=TrapType.DIRECT_CONTRA), state)
    assert render(trapped, TableFormat.SERIALIZED)
    assert render(trapped, TableFormat.MARKDOWN)
    with pytest.raises(FormatError, match="duplicate"):
        render(trapped, TableFormat.JSON)


def test_parse_back_rejects_duplicate_json_keys():
    text = '[\n  {"name": "A", "x": 1, "x": 2}\n]'
    with pytest.raises(FormatError, match="not expressible in JSON"):
        parse_back(text, TableFormat.JSON)


def test_parse_back_rejects_malformed_markdown_row():
    table, _ = janet_table()
    text = render(table, TableFormat.MARKDOWN)
    broken = text.replace("| Janet | 16 ", "Janet | 16 ")
    with pytest.raises(FormatError):
        parse_back(broken, TableFormat.MARKDOWN)


NAMES = ["Janet", "Weng", "Mia", "Oliver", "Ava", "Noah"]
HEADERS = ["Eggs_per_day", "Price", "Count", "Minutes", "Rate", "Total", "Left"]


def random_table(rng: random.Random) -> AugmentedTable:
    n_cols = rng.randint(1, 6)
    headers = ["name"] + rng.sample(HEADERS, n_cols)
    columns = [Column("name", "name", ColumnKind.NAME)] + [
        Column(h.lower(), h, ColumnKind.GIVEN) for h in headers[1:]
    ]
    rows = []
    for _ in range(rng.randint(1, 8)):
        row = {"name": Cell(rng.choice(NAMES))}
        for column in columns[1:]:
            roll = rng.random()
            if roll < 0.1:
                row[column.key] = Cell(None, Provenance.NULL)
            elif roll < 0.3:
                row[column.key] = Cell(Fraction(rng.randint(1, 40), rng.randint(1, 12)))
            else:
                row[column.key] = Cell(Fraction(rng.randint(0, 400)))
        rows.append(row)
    return AugmentedTable(columns=columns, rows=rows, seed_row_index=0, value_ranges={})


@pytest.mark.parametrize("fmt", list(TableFormat))
def test_parse_back_round_trip_500_random_tables(fmt):
    rng = random.Random(hash(fmt.value) % (2**32))
    for _ in range(500):
        table = random_table(rng)
        text = render(table, fmt)
        back = parse_back(text, fmt)
        assert values_grid(back) == values_grid(table)


@settings(max_examples=100, deadline=None)
@given(st.data())
def test_parse_back_round_trip_property(data):
    seed = data.draw(st.integers(min_value=0, max_value=2**32 - 1))
    table = random_table(random.Random(seed))
    for fmt in TableFormat:
        back = parse_back(render(table, fmt), fmt)
        assert values_grid(back) == values_grid(table)
