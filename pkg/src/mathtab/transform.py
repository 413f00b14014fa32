"""Turn a verified formal state into a blurred question plus a seed table.

The LLM proposes the table layout and the generalized question; the seed
row values always come from the solver assignment, never from numbers the
model echoed. A validation pass rebuilds the fact set from the table and
re-solves, requiring the exact original goal value.
"""

from __future__ import annotations

import difflib
import json
import re
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Optional, Union

from .decouple import SeedProblem
from .formal import (
    Const,
    Constraint,
    ModelingState,
    Relation,
    SolveStatus,
    Var,
    active_constraints,
    assignment_shape,
    emit_smtlib,
    goal_value,
    solve,
)
from .llm import Provider, TEMPLATES, render_template


class TransformError(Exception):
    pass


class MalformedLLMOutput(TransformError):
    pass


class MissingVariable(TransformError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"tabled fact variable '{name}' missing from model output")


class ColumnKind(Enum):
    NAME = "name"
    GIVEN = "given"
    IRRELEVANT = "irrelevant"
    INJECTED = "injected"


class Provenance(Enum):
    GIVEN = "given"
    CALCULATED = "calculated"
    INJECTED = "injected"
    NULL = "null"


CellValue = Union[Fraction, str, None]


@dataclass(frozen=True)
class Cell:
    value: CellValue
    provenance: Provenance = Provenance.GIVEN

    def __post_init__(self):
        if (self.value is None) != (self.provenance is Provenance.NULL):
            raise ValueError("null provenance exactly when the value is null")


@dataclass(frozen=True)
class Column:
    key: str
    display: str
    kind: ColumnKind


@dataclass(frozen=True)
class ValueRange:
    low: Fraction
    high: Fraction
    unit: str = "unknown"


@dataclass
class SeedTable:
    columns: list[Column]
    seed_row: dict[str, Cell]
    value_ranges: dict[str, ValueRange]
    calculated: dict[str, Cell] = field(default_factory=dict)

    def __post_init__(self):
        names = [c for c in self.columns if c.kind is ColumnKind.NAME]
        if len(names) != 1:
            raise ValueError("a seed table has exactly one name column")

    @property
    def name_key(self) -> str:
        return next(c.key for c in self.columns if c.kind is ColumnKind.NAME)

    @property
    def seed_name(self) -> str:
        return self.seed_row[self.name_key].value


@dataclass(frozen=True)
class BlurredProblem:
    text: str
    placeholder_map: dict[str, str]  # placeholder letter -> column key


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    recomputed: Optional[Fraction]
    expected: Optional[Fraction]
    mismatch_detail: Optional[str] = None


def display_header(key: str) -> str:
    """Presentation form of a column key: first letter upper-cased."""
    return key[:1].upper() + key[1:] if key else key


_WORD_NUMBERS = {
    "zero": 0, "one": 1, "two": 2, "three": 3, "four": 4, "five": 5,
    "six": 6, "seven": 7, "eight": 8, "nine": 9, "ten": 10, "eleven": 11,
    "twelve": 12, "twenty": 20, "thirty": 30, "forty": 40, "fifty": 50,
    "sixty": 60, "seventy": 70, "eighty": 80, "ninety": 90, "hundred": 100,
}
_NUM_CORE = re.compile(r"^-?\d+(?:\.\d+)?$")
_LETTER_CORE = re.compile(r"^[a-z]$")


def _token_core(token: str) -> tuple[str, str, str]:
    """Split off leading/trailing punctuation: returns (prefix, core, suffix)."""
    match = re.match(r"^([^\w]*)(.*?)([^\w]*)$", token)
    return match.group(1), match.group(2), match.group(3)


def _numeric_token(core: str) -> Optional[Fraction]:
    lowered = core.lower()
    if lowered in _WORD_NUMBERS:
        return Fraction(_WORD_NUMBERS[lowered])
    if _NUM_CORE.match(core.replace(",", "")):
        return Fraction(core.replace(",", ""))
    return None


def align_placeholders(original: str, generalized: str,
                       seed_values: dict[str, Fraction]) -> dict[str, str]:
    """Recover placeholder -> column mapping by aligning the two texts.

    Wherever the generalized text replaces a number with a single letter, the
    letter maps to the column whose seed value equals that number; ties break
    to the first still-unclaimed matching column.
    """
    orig_tokens = original.split()
    gen_tokens = generalized.split()
    matcher = difflib.SequenceMatcher(a=orig_tokens, b=gen_tokens, autojunk=False)
    mapping: dict[str, str] = {}
    claimed: set[str] = set()
    for op, a0, a1, b0, b1 in matcher.get_opcodes():
        if op != "replace" or (a1 - a0) != (b1 - b0):
            continue
        for orig_tok, gen_tok in zip(orig_tokens[a0:a1], gen_tokens[b0:b1]):
            _, orig_core, _ = _token_core(orig_tok)
            _, gen_core, _ = _token_core(gen_tok)
            if not _LETTER_CORE.match(gen_core):
                continue
            value = _numeric_token(orig_core)
            if value is None:
                continue
            for key, seed_value in seed_values.items():
                if key not in claimed and seed_value == value:
                    mapping[gen_core] = key
                    claimed.add(key)
                    break
    return mapping


def _strip_json(raw: str) -> dict:
    text = raw.strip()
    fence = re.search(r"```[a-zA-Z]*\n(.*?)```", text, re.DOTALL)
    if fence:
        text = fence.group(1).strip()
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as err:
        raise MalformedLLMOutput(f"response is not valid JSON: {err}") from None
    if not isinstance(payload, dict):
        raise MalformedLLMOutput("response JSON is not an object")
    for required in ("table", "generalization"):
        if required not in payload:
            raise MalformedLLMOutput(f"response JSON lacks '{required}'")
    return payload


def _coerce_range(key: str, raw, seed_value: Fraction) -> ValueRange:
    default_low = seed_value / 2
    default_high = seed_value * 10
    if seed_value == 0:
        default_low, default_high = Fraction(0), Fraction(10)
    if not isinstance(raw, dict):
        return ValueRange(default_low, default_high, "unknown")
    try:
        low = Fraction(str(raw.get("min", default_low)))
        high = Fraction(str(raw.get("max", default_high)))
    except (ValueError, ZeroDivisionError):
        return ValueRange(default_low, default_high, "unknown")
    if high < low:
        low, high = high, low
    unit = str(raw.get("unit") or "unknown")
    return ValueRange(low, high, unit)


def parse_transform_output(raw: str, state: ModelingState,
                           problem_text: str = "") -> tuple[BlurredProblem, SeedTable]:
    """Build the blurred problem and seed table from one model response."""
    payload = _strip_json(raw)
    assignment = solve(state).assignment
    if assignment is None:
        raise TransformError("state must be satisfiable before transformation")
    table = payload["table"]
    if not isinstance(table, dict) or "name" not in table:
        raise MalformedLLMOutput("table must be an object with a 'name' entry")

    given_keys = [
        c.left.name if isinstance(c.left, Var) else c.right.name
        for c in active_constraints(state)
    ]
    for key in given_keys:
        if key not in table:
            raise MissingVariable(key)

    columns = [Column("name", "name", ColumnKind.NAME)]
    seed_row = {"name": Cell(str(table["name"]), Provenance.GIVEN)}
    calculated: dict[str, Cell] = {}
    for key in table:
        if key == "name":
            continue
        if key in given_keys:
            columns.append(Column(key, display_header(key), ColumnKind.GIVEN))
            seed_row[key] = Cell(assignment[key], Provenance.GIVEN)
        elif key in assignment:
            # provenance metadata only; never emitted as a benchmark column
            calculated[key] = Cell(assignment[key], Provenance.CALCULATED)

    ranges_raw = payload.get("value_ranges") or {}
    value_ranges = {}
    for column in columns:
        if column.kind is ColumnKind.NAME:
            continue
        value_ranges[column.key] = _coerce_range(
            column.key, ranges_raw.get(column.key), seed_row[column.key].value
        )

    generalized = str(payload["generalization"])
    source_text = problem_text or str(payload.get("problem", "") or "")
    seed_values = {
        c.key: seed_row[c.key].value for c in columns if c.kind is ColumnKind.GIVEN
    }
    placeholder_map = align_placeholders(source_text, generalized, seed_values)
    blurred = BlurredProblem(generalized, placeholder_map)
    seed = SeedTable(columns, seed_row, value_ranges, calculated)
    return blurred, seed


def transform(problem: SeedProblem, state: ModelingState, provider: Provider,
              max_retries: int = 2) -> tuple[BlurredProblem, SeedTable]:
    """Ask the model for the table shape, retrying on malformed output."""
    template = TEMPLATES["table_transformation"]
    slots = {"problem": problem.text, "formal_problem": emit_smtlib(state)}
    last_error: Optional[Exception] = None
    for round_index in range(max_retries + 1):
        messages = render_template(template, slots)
        if round_index and last_error is not None:
            messages[1]["content"] += (
                f"\n\nYour previous output could not be used: {last_error}."
                "\nRespond with valid JSON only."
            )
        raw = provider.complete_messages(messages)["text"]
        try:
            return parse_transform_output(raw, state, problem_text=problem.text)
        except MalformedLLMOutput as err:
            last_error = err
    raise last_error


def tabled_facts(table) -> tuple[set[str], list[Constraint]]:
    """Keys carried by the table's given columns and the non-null fact set.

    Works for seed tables and augmented tables alike; all that is needed is
    ``columns`` plus a ``seed_row`` mapping (empty when the seed row is gone).
    """
    keys = set()
    facts = []
    seed_row = table.seed_row or {}
    for column in table.columns:
        if column.kind is not ColumnKind.GIVEN:
            continue
        keys.add(column.key)
        cell = seed_row.get(column.key)
        if cell is not None and cell.value is not None:
            facts.append(Constraint(Var(column.key), Relation.EQ, Const(cell.value)))
    return keys, facts


def swap_in_facts(state: ModelingState, tabled_keys: set[str],
                  facts) -> ModelingState:
    """Replace the constant assignments for tabled keys with table-derived facts."""
    kept = []
    for c in state.constraints:
        shape = assignment_shape(c)
        if (shape is not None and isinstance(shape[1], Const)
                and shape[0] in tabled_keys):
            continue
        kept.append(c.untagged())
    return state.with_constraints(tuple(kept) + tuple(facts))


def validate_table(state: ModelingState, table: SeedTable,
                   blurred: Optional[BlurredProblem] = None) -> ValidationReport:
    """Re-derive the goal from table facts alone and compare exactly."""
    expected = goal_value(state)
    keys, facts = tabled_facts(table)
    result = solve(swap_in_facts(state, keys, facts))
    if result.status is not SolveStatus.SAT:
        return ValidationReport(False, None, expected,
                                f"re-solve returned {result.status.value}")
    recomputed = result.assignment.get(state.goal.target)
    if recomputed != expected:
        return ValidationReport(False, recomputed, expected,
                                f"goal mismatch: {recomputed} != {expected}")
    return ValidationReport(True, recomputed, expected)


# ----------------------------- records -----------------------------

def cell_to_json(cell: Cell):
    value = cell.value
    if isinstance(value, Fraction):
        value = str(value)
    return {"v": value, "p": cell.provenance.value}


def cell_from_json(raw) -> Cell:
    value = raw["v"]
    provenance = Provenance(raw["p"])
    if value is None:
        return Cell(None, provenance)
    try:
        parsed: object = Fraction(str(value))
    except (ValueError, ZeroDivisionError):
        parsed = value
    return Cell(parsed, provenance)


@dataclass
class TransformedSeed:
    """One corpus entry after decouple, transform, and validation."""

    problem_id: str
    text: str
    gold: Optional[Fraction]
    state: ModelingState
    blurred: BlurredProblem
    seed: SeedTable
    validation: ValidationReport


def transformed_to_record(entry: TransformedSeed) -> dict:
    return {
        "problem_id": entry.problem_id,
        "text": entry.text,
        "gold": None if entry.gold is None else str(entry.gold),
        "state": emit_smtlib(entry.state),
        "blurred_text": entry.blurred.text,
        "placeholder_map": entry.blurred.placeholder_map,
        "columns": [
            {"key": c.key, "display": c.display, "kind": c.kind.value}
            for c in entry.seed.columns
        ],
        "seed_row": {k: cell_to_json(c) for k, c in entry.seed.seed_row.items()},
        "value_ranges": {
            k: {"min": str(r.low), "max": str(r.high), "unit": r.unit}
            for k, r in entry.seed.value_ranges.items()
        },
        "calculated": {k: cell_to_json(c) for k, c in entry.seed.calculated.items()},
        "validation": {
            "ok": entry.validation.ok,
            "recomputed": None if entry.validation.recomputed is None
            else str(entry.validation.recomputed),
            "expected": None if entry.validation.expected is None
            else str(entry.validation.expected),
        },
    }


def transformed_from_record(record: dict) -> TransformedSeed:
    from .formal import parse_formal

    seed = SeedTable(
        columns=[Column(c["key"], c["display"], ColumnKind(c["kind"]))
                 for c in record["columns"]],
        seed_row={k: cell_from_json(v) for k, v in record["seed_row"].items()},
        value_ranges={
            k: ValueRange(Fraction(v["min"]), Fraction(v["max"]), v.get("unit", "unknown"))
            for k, v in record["value_ranges"].items()
        },
        calculated={k: cell_from_json(v)
                    for k, v in record.get("calculated", {}).items()},
    )
    validation = ValidationReport(
        ok=record["validation"]["ok"],
        recomputed=None if record["validation"]["recomputed"] is None
        else Fraction(record["validation"]["recomputed"]),
        expected=None if record["validation"]["expected"] is None
        else Fraction(record["validation"]["expected"]),
    )
    return TransformedSeed(
        problem_id=record["problem_id"],
        text=record["text"],
        gold=None if record.get("gold") is None else Fraction(record["gold"]),
        state=parse_formal(record["state"]),
        blurred=BlurredProblem(record["blurred_text"], dict(record["placeholder_map"])),
        seed=seed,
        validation=validation,
    )


def transform_corpus(problems, provider: Provider, max_rounds: int = 3,
                     max_retries: int = 2) -> tuple[list[TransformedSeed], list[dict]]:
    """Run decouple, transform, validate over a corpus.

    Returns validated entries plus a failure log of skipped problems.
    """
    from .decouple import DecoupleStatus, decouple

    entries = []
    failures = []
    for problem in problems:
        outcome = decouple(problem, provider, max_rounds=max_rounds)
        if outcome.status is not DecoupleStatus.VERIFIED:
            failures.append({
                "problem_id": problem.id,
                "stage": "decouple",
                "reason": outcome.reason or outcome.status.value,
            })
            continue
        try:
            blurred, seed = transform(problem, outcome.state, provider,
                                      max_retries=max_retries)
        except TransformError as err:
            failures.append({
                "problem_id": problem.id, "stage": "transform", "reason": str(err),
            })
            continue
        report = validate_table(outcome.state, seed, blurred)
        entries.append(TransformedSeed(
            problem.id, problem.text, problem.gold_answer,
            outcome.state, blurred, seed, report,
        ))
        if not report.ok:
            failures.append({
                "problem_id": problem.id, "stage": "validate",
                "reason": report.mismatch_detail or "mismatch",
            })
    return entries, failures
