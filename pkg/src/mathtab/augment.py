"""Augmentation pool: grow, shuffle, and corrupt tables deterministically.

Operators never touch the seed row's facts except through an explicit trap
injection, so any sequence of the benign operators preserves the original
answer. Every trap is solver-verifiable: missing cells leave the goal
underdetermined, injected contradictions make the fact set unsatisfiable.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Optional

from .formal import (
    Const,
    Constraint,
    Domain,
    ModelingState,
    Relation,
    SolveStatus,
    Var,
    ancestors,
    assignment_shape,
    solve,
)
from .transform import (
    Cell,
    Column,
    ColumnKind,
    Provenance,
    SeedTable,
    ValueRange,
    cell_from_json,
    cell_to_json,
    display_header,
    swap_in_facts,
    tabled_facts,
)


class AugmentError(Exception):
    pass


class PoolExhausted(AugmentError):
    pass


class TrapNotApplicable(AugmentError):
    pass


class TrapType(Enum):
    MISSING = "missing"
    CONTRA = "contra"
    DIRECT_MISSING = "direct_missing"
    DIRECT_CONTRA = "direct_contra"


@dataclass(frozen=True)
class AugOp:
    """One operator application; ``params`` depend on ``kind``."""

    kind: str  # row_aug | col_aug | ord_shf | inf_mut
    rng_seed: int = 0
    count: int = 1                      # row_aug / col_aug
    shuffle_rows: bool = True           # ord_shf
    shuffle_cols: bool = True           # ord_shf
    trap: Optional[TrapType] = None     # inf_mut

    def __post_init__(self):
        if self.kind not in ("row_aug", "col_aug", "ord_shf", "inf_mut"):
            raise ValueError(f"unknown operator kind '{self.kind}'")
        if self.kind in ("row_aug", "col_aug") and self.count < 0:
            raise ValueError("count must be >= 0")


@dataclass(frozen=True)
class TrapInfo:
    type: TrapType
    location: Optional[tuple[int, int]]  # (row index, column index)
    injected_value: Optional[Fraction]
    derived_value: Optional[Fraction]
    variable: Optional[str] = None       # state variable the trap is about


@dataclass
class AugmentedTable:
    columns: list[Column]
    rows: list[dict[str, Cell]]
    seed_row_index: Optional[int]
    value_ranges: dict[str, ValueRange]
    trap: Optional[TrapInfo] = None
    domains: dict[str, Domain] = field(default_factory=dict)

    @property
    def seed_row(self) -> dict[str, Cell]:
        if self.seed_row_index is None:
            return {}
        return self.rows[self.seed_row_index]

    @property
    def name_key(self) -> str:
        return next(c.key for c in self.columns if c.kind is ColumnKind.NAME)

    @property
    def seed_name(self) -> Optional[str]:
        row = self.seed_row
        return row[self.name_key].value if row else None

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    @property
    def n_cols(self) -> int:
        return len(self.columns)

    def copy(self) -> "AugmentedTable":
        return AugmentedTable(
            columns=list(self.columns),
            rows=[dict(row) for row in self.rows],
            seed_row_index=self.seed_row_index,
            value_ranges=dict(self.value_ranges),
            trap=self.trap,
            domains=dict(self.domains),
        )


def from_seed(seed: SeedTable, state: Optional[ModelingState] = None) -> AugmentedTable:
    """Wrap a two-row seed table (header plus one data row) for augmentation."""
    domains = state.domains if state is not None else {}
    return AugmentedTable(
        columns=list(seed.columns),
        rows=[dict(seed.seed_row)],
        seed_row_index=0,
        value_ranges=dict(seed.value_ranges),
        domains=domains,
    )


# names seen across published example tables plus common fillers
NAME_POOL = (
    "Sebastian", "Sofia", "Elijah", "Mia", "Ava", "Samuel", "Logan", "Henry",
    "Ella", "Elizabeth", "Jacob", "Lillian", "Aiden", "Joseph", "James",
    "Grace", "Oliver", "Charlotte", "Mason", "Lucas", "Liam", "Eleanor",
    "Victoria", "Emma", "Chloe", "Madison", "Olivia", "Lily", "David",
    "Isabella", "Avery", "Emily", "John", "Camila", "Layla", "Harper",
    "Noah", "Wyatt", "Jayden", "Ethan", "Sophia", "Michael", "Riley",
    "Hannah", "Penelope", "Benjamin", "Matthew",
)

# irrelevant personal attributes with plausible ranges
IRRELEVANT_POOL = (
    ("age", "Age", 18, 75),
    ("heart_rate", "HeartRate", 60, 100),
    ("height", "Height", 140, 200),
    ("body_temp", "BodyTemp", 36, 40),
    ("sleep_hours", "SleepHours", 4, 10),
    ("weight", "Weight", 45, 100),
)


def _sample_value(rng: random.Random, value_range: ValueRange) -> Fraction:
    # integer samples keep distractors looking like published tables; a range
    # without any integer falls back to its lower bound
    lo = math.ceil(value_range.low)
    hi = math.floor(value_range.high)
    if lo > hi:
        return value_range.low
    return Fraction(rng.randint(lo, hi))


def _distractor_name(rng: random.Random, seed_name: Optional[str]) -> str:
    while True:
        name = rng.choice(NAME_POOL)
        if name != seed_name:
            return name


def row_aug(table: AugmentedTable, count: int, rng: random.Random) -> AugmentedTable:
    """Append ``count`` distractor rows sampled inside each column's range."""
    out = table.copy()
    seed_name = out.seed_name
    for _ in range(count):
        row: dict[str, Cell] = {}
        for column in out.columns:
            if column.kind is ColumnKind.NAME:
                row[column.key] = Cell(_distractor_name(rng, seed_name))
                continue
            value_range = out.value_ranges.get(column.key)
            if value_range is None:
                value_range = ValueRange(Fraction(1), Fraction(20))
            value = _sample_value(rng, value_range)
            row[column.key] = Cell(value)
        out.rows.append(row)
    return out


def col_aug(table: AugmentedTable, count: int, rng: random.Random) -> AugmentedTable:
    """Append irrelevant attribute columns, filling every row including the seed."""
    out = table.copy()
    present = {c.key for c in out.columns}
    available = [entry for entry in IRRELEVANT_POOL if entry[0] not in present]
    if count > len(available):
        raise PoolExhausted(
            f"requested {count} irrelevant columns, only {len(available)} remain"
        )
    picked = rng.sample(available, count)
    for key, display, lo, hi in picked:
        out.columns.append(Column(key, display, ColumnKind.IRRELEVANT))
        out.value_ranges[key] = ValueRange(Fraction(lo), Fraction(hi))
        for row in out.rows:
            row[key] = Cell(Fraction(rng.randint(lo, hi)))
    return out


def ord_shf(table: AugmentedTable, rows: bool, cols: bool,
            rng: random.Random) -> AugmentedTable:
    """Permute row and/or column order; the seed row index follows along."""
    out = table.copy()
    if rows and out.rows:
        order = list(range(len(out.rows)))
        rng.shuffle(order)
        out.rows = [out.rows[i] for i in order]
        if out.seed_row_index is not None:
            out.seed_row_index = order.index(out.seed_row_index)
    if cols:
        rng.shuffle(out.columns)
    return out


def _calculated_variables(state: ModelingState) -> list[str]:
    """Variables defined by a non-constant equation, in declaration order."""
    defined = []
    for c in state.constraints:
        shape = assignment_shape(c)
        if shape is not None and not isinstance(shape[1], Const):
            defined.append(shape[0])
    order = [v.name for v in state.variables]
    return sorted(set(defined), key=order.index)


def _contra_value(rng: random.Random, derived: Fraction) -> Fraction:
    hi = max(2, math.ceil(2 * derived))
    choices = [Fraction(n) for n in range(1, hi + 1) if Fraction(n) != derived]
    return rng.choice(choices)


def inf_mut(table: AugmentedTable, trap: TrapType, state: ModelingState,
            rng: random.Random) -> AugmentedTable:
    """Inject one trap; see TrapType for the four shapes."""
    if table.trap is not None:
        raise AugmentError("table already carries a trap")
    out = table.copy()
    goal = state.goal.target if state.goal else None

    if trap is TrapType.MISSING:
        if out.seed_row_index is None:
            raise TrapNotApplicable("no seed row to blank a cell in")
        path = ancestors(state, goal) if goal else set()
        candidates = [c.key for c in out.columns
                      if c.kind is ColumnKind.GIVEN and c.key in path
                      and out.seed_row.get(c.key) is not None
                      and out.seed_row[c.key].value is not None]
        if not candidates:
            raise TrapNotApplicable("no given fact lies on the goal's dependency path")
        key = rng.choice(candidates)
        removed = out.rows[out.seed_row_index][key].value
        out.rows[out.seed_row_index][key] = Cell(None, Provenance.NULL)
        col_index = next(i for i, c in enumerate(out.columns) if c.key == key)
        out.trap = TrapInfo(trap, (out.seed_row_index, col_index), None, removed, key)
        return out

    if trap is TrapType.CONTRA:
        if out.seed_row_index is None:
            raise TrapNotApplicable("no seed row to contradict")
        calculated = _calculated_variables(state)
        candidates = [v for v in calculated if v != goal] or \
            [v for v in calculated if v == goal]
        if not candidates:
            raise TrapNotApplicable("goal directly assigned; no implicit variable")
        variable = rng.choice(candidates)
        assignment = solve(state).assignment
        derived = assignment[variable]
        injected = _contra_value(rng, derived)
        column = Column(variable, display_header(variable), ColumnKind.INJECTED)
        out.columns.append(column)
        hi = max(2, math.ceil(2 * derived))
        out.value_ranges[variable] = ValueRange(Fraction(1), Fraction(hi))
        for index, row in enumerate(out.rows):
            if index == out.seed_row_index:
                row[variable] = Cell(injected, Provenance.INJECTED)
            else:
                row[variable] = Cell(Fraction(rng.randint(1, hi)))
        out.trap = TrapInfo(
            trap, (out.seed_row_index, len(out.columns) - 1), injected, derived, variable
        )
        return out

    if trap is TrapType.DIRECT_MISSING:
        if out.seed_row_index is None:
            raise TrapNotApplicable("seed row already absent")
        del out.rows[out.seed_row_index]
        out.seed_row_index = None
        out.trap = TrapInfo(trap, None, None, None, None)
        return out

    # DIRECT_CONTRA: duplicate a given column header with a conflicting value
    if out.seed_row_index is None:
        raise TrapNotApplicable("no seed row to contradict")
    given = [c for c in out.columns if c.kind is ColumnKind.GIVEN
             and out.seed_row.get(c.key) is not None
             and out.seed_row[c.key].value is not None]
    if not given:
        raise TrapNotApplicable("no given column to duplicate")
    original = rng.choice(given)
    base_value = out.seed_row[original.key].value
    injected = _contra_value(rng, base_value)
    dup_key = original.key + "__dup"
    out.columns.append(Column(dup_key, original.display, ColumnKind.INJECTED))
    value_range = out.value_ranges.get(
        original.key, ValueRange(Fraction(1), max(Fraction(2), 2 * base_value))
    )
    out.value_ranges[dup_key] = value_range
    for index, row in enumerate(out.rows):
        if index == out.seed_row_index:
            row[dup_key] = Cell(injected, Provenance.INJECTED)
        else:
            row[dup_key] = Cell(_sample_value(rng, value_range))
    out.trap = TrapInfo(
        TrapType.DIRECT_CONTRA, (out.seed_row_index, len(out.columns) - 1),
        injected, base_value, original.key,
    )
    return out


def apply(table: AugmentedTable | SeedTable, op: AugOp,
          state: ModelingState) -> AugmentedTable:
    """Apply one operator; deterministic given (input, op.rng_seed)."""
    if isinstance(table, SeedTable):
        table = from_seed(table, state)
    rng = random.Random(op.rng_seed)
    if op.kind == "row_aug":
        return row_aug(table, op.count, rng)
    if op.kind == "col_aug":
        return col_aug(table, op.count, rng)
    if op.kind == "ord_shf":
        return ord_shf(table, op.shuffle_rows, op.shuffle_cols, rng)
    if op.trap is None:
        raise ValueError("inf_mut op needs a trap type")
    return inf_mut(table, op.trap, state, rng)


def apply_sequence(seed: SeedTable, ops, state: ModelingState) -> AugmentedTable:
    table = from_seed(seed, state)
    for op in ops:
        table = apply(table, op, state)
    return table


def verify_trap(state: ModelingState, table: AugmentedTable) -> bool:
    """Check the trap actually trips the solver; benign tables re-validate."""
    keys, facts = tabled_facts(table)
    if table.trap is None:
        result = solve(swap_in_facts(state, keys, facts))
        return result.status is SolveStatus.SAT
    trap = table.trap
    if trap.type in (TrapType.MISSING, TrapType.DIRECT_MISSING):
        result = solve(swap_in_facts(state, keys, facts))
        return result.status is SolveStatus.UNDERDETERMINED
    extra = Constraint(Var(trap.variable), Relation.EQ, Const(trap.injected_value))
    result = solve(swap_in_facts(state, keys, list(facts) + [extra]))
    return result.status is SolveStatus.CONTRADICTION


# ----------------------------- table records -----------------------------

def table_to_record(table: AugmentedTable) -> dict:
    record = {
        "columns": [
            {"key": c.key, "display": c.display, "kind": c.kind.value}
            for c in table.columns
        ],
        "rows": [
            [cell_to_json(row[c.key]) for c in table.columns] for row in table.rows
        ],
        "seed_row_index": table.seed_row_index,
        "value_ranges": {
            k: {"min": str(r.low), "max": str(r.high), "unit": r.unit}
            for k, r in table.value_ranges.items()
        },
        "domains": {k: d.value for k, d in table.domains.items()},
    }
    if table.trap is not None:
        record["trap"] = {
            "type": table.trap.type.value,
            "location": list(table.trap.location) if table.trap.location else None,
            "injected_value": None if table.trap.injected_value is None
            else str(table.trap.injected_value),
            "derived_value": None if table.trap.derived_value is None
            else str(table.trap.derived_value),
            "variable": table.trap.variable,
        }
    else:
        record["trap"] = None
    return record


def table_from_record(record: dict) -> AugmentedTable:
    columns = [
        Column(c["key"], c["display"], ColumnKind(c["kind"]))
        for c in record["columns"]
    ]
    rows = []
    for raw_row in record["rows"]:
        rows.append({
            column.key: cell_from_json(raw)
            for column, raw in zip(columns, raw_row)
        })
    trap = None
    if record.get("trap"):
        raw = record["trap"]
        trap = TrapInfo(
            TrapType(raw["type"]),
            tuple(raw["location"]) if raw.get("location") else None,
            Fraction(raw["injected_value"]) if raw.get("injected_value") else None,
            Fraction(raw["derived_value"]) if raw.get("derived_value") else None,
            raw.get("variable"),
        )
    return AugmentedTable(
        columns=columns,
        rows=rows,
        seed_row_index=record.get("seed_row_index"),
        value_ranges={
            k: ValueRange(Fraction(v["min"]), Fraction(v["max"]), v.get("unit", "unknown"))
            for k, v in record.get("value_ranges", {}).items()
        },
        trap=trap,
        domains={
            k: Domain(v) for k, v in record.get("domains", {}).items()
        },
    )
