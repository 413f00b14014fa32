"""Subset construction: recipes, instances, probes, stats, and manifests.

A recipe names an ordered operator sequence; per-instance RNG seeds are
hash-chained from the master seed so builds are bit-reproducible and a
change to one slot never reshuffles another. Trap instances that fail
solver verification are discarded, logged, and replaced until the
configured trap mix is met exactly.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

from .augment import (
    AugOp,
    AugmentedTable,
    AugmentError,
    TrapType,
    apply,
    from_seed,
    table_from_record,
    table_to_record,
    verify_trap,
)
from .formal import ModelingState
from .serialize import FORMAT_ALIASES, FormatError, TableFormat, render
from .transform import (
    ColumnKind,
    TransformedSeed,
    transformed_from_record,
    transformed_to_record,
    validate_table,
)


class DatasetError(Exception):
    pass


class EmptyCorpus(DatasetError):
    pass


class ColumnMissing(DatasetError):
    pass


class NullCell(DatasetError):
    pass


PLAIN_PREAMBLE = (
    "Answer the question using the table below. Reason step by step, then "
    "give the final numeric answer on a line starting with '####'."
)
WARNED_PREAMBLE = PLAIN_PREAMBLE + (
    " Be careful: the inputs may contain trap problems, where the table is "
    "missing needed information or contains contradictory values. If the "
    "question cannot be answered from the table, say it cannot be determined "
    "instead of giving a number."
)


@dataclass(frozen=True)
class OpTemplate:
    """An operator without a concrete seed; the build derives one per slot."""

    kind: str
    count: int = 1
    shuffle_rows: bool = True
    shuffle_cols: bool = True
    trap: Optional[TrapType] = None

    def bind(self, rng_seed: int, trap: Optional[TrapType] = None) -> AugOp:
        return AugOp(
            kind=self.kind, rng_seed=rng_seed, count=self.count,
            shuffle_rows=self.shuffle_rows, shuffle_cols=self.shuffle_cols,
            trap=trap or self.trap,
        )


@dataclass
class Recipe:
    name: str
    ops: list[OpTemplate]
    formats: list[TableFormat] = field(default_factory=lambda: [TableFormat.SERIALIZED])
    trap_mix: Optional[dict[str, float]] = None  # {"missing": .5, "contra": .5}
    master_seed: int = 0
    slots: Optional[int] = None  # trap recipes may exceed the corpus size

    def __post_init__(self):
        has_trap_op = any(op.kind == "inf_mut" for op in self.ops)
        pinned = any(op.kind == "inf_mut" and op.trap is not None for op in self.ops)
        if has_trap_op and not pinned and self.trap_mix is None:
            self.trap_mix = {"missing": 0.5, "contra": 0.5}
        if self.trap_mix is not None:
            if not has_trap_op:
                raise ValueError("trap_mix given but no inf_mut op present")
            total = sum(self.trap_mix.values())
            if abs(total - 1.0) > 1e-9:
                raise ValueError("trap_mix fractions must sum to 1")

    @property
    def has_trap(self) -> bool:
        return any(op.kind == "inf_mut" for op in self.ops)


def default_recipes(master_seed: int = 0) -> dict[str, Recipe]:
    """The four shipped subsets: easy, medium, hard, imperfect."""
    return {
        "easy": Recipe("easy", [OpTemplate("row_aug", count=10)],
                       master_seed=master_seed),
        "medium": Recipe("medium",
                         [OpTemplate("row_aug", count=20), OpTemplate("ord_shf")],
                         master_seed=master_seed),
        "hard": Recipe("hard",
                       [OpTemplate("row_aug", count=20), OpTemplate("ord_shf"),
                        OpTemplate("col_aug", count=4)],
                       master_seed=master_seed),
        "imperfect": Recipe("imperfect",
                            [OpTemplate("row_aug", count=20), OpTemplate("ord_shf"),
                             OpTemplate("inf_mut")],
                            trap_mix={"missing": 0.5, "contra": 0.5},
                            master_seed=master_seed),
    }


def recipe_to_dict(recipe: Recipe) -> dict:
    return {
        "name": recipe.name,
        "ops": [
            {
                "kind": op.kind, "count": op.count,
                "shuffle_rows": op.shuffle_rows, "shuffle_cols": op.shuffle_cols,
                "trap": op.trap.value if op.trap else None,
            }
            for op in recipe.ops
        ],
        "formats": [f.value for f in recipe.formats],
        "trap_mix": recipe.trap_mix,
        "master_seed": recipe.master_seed,
        "slots": recipe.slots,
    }


def recipe_from_dict(raw: dict) -> Recipe:
    ops = [
        OpTemplate(
            kind=op["kind"], count=op.get("count", 1),
            shuffle_rows=op.get("shuffle_rows", True),
            shuffle_cols=op.get("shuffle_cols", True),
            trap=TrapType(op["trap"]) if op.get("trap") else None,
        )
        for op in raw["ops"]
    ]
    formats = [FORMAT_ALIASES[f] for f in raw.get("formats", ["serialized"])]
    return Recipe(
        name=raw["name"], ops=ops, formats=formats,
        trap_mix=raw.get("trap_mix"), master_seed=raw.get("master_seed", 0),
        slots=raw.get("slots"),
    )


def load_recipe(path: str | Path) -> Recipe:
    with open(path, encoding="utf-8") as handle:
        return recipe_from_dict(json.load(handle))


def derive_seed(master_seed: int, problem_id: str, op_index: int,
                slot: int = 0, attempt: int = 0) -> int:
    material = f"{master_seed}:{problem_id}:{op_index}:{slot}:{attempt}"
    digest = hashlib.blake2b(material.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


@dataclass
class Instance:
    instance_id: str
    problem_id: str
    subset: str
    format: TableFormat
    question: str          # plain preamble variant
    question_warned: str   # trap-warned preamble variant
    blurred_text: str
    table: AugmentedTable
    label: dict            # {"kind": "answer", "value": Fraction} or
    #                        {"kind": "ill_defined", "trap": TrapType}
    difficulty_meta: dict

    @property
    def is_ill_defined(self) -> bool:
        return self.label["kind"] == "ill_defined"

    @property
    def answer(self) -> Optional[Fraction]:
        return self.label.get("value")

    @property
    def trap_type(self) -> Optional[TrapType]:
        return self.label.get("trap")


@dataclass(frozen=True)
class RetrievalProbe:
    probe_id: str
    instance_id: str
    column_key: str
    question: str
    gold: Fraction


def compose_question(preamble: str, blurred_text: str, table_text: str) -> str:
    return f"{preamble}\n\n{blurred_text}\n\nTable:\n{table_text}"


def _difficulty_meta(table: AugmentedTable, state: ModelingState) -> dict:
    return {
        "n_rows": table.n_rows,
        "n_cols": table.n_cols,
        "n_cells": table.n_rows * table.n_cols,
        "n_variables": len(state.variables),
    }


def _make_instance(entry: TransformedSeed, recipe: Recipe, fmt: TableFormat,
                   table: AugmentedTable, slot: int) -> Instance:
    table_text = render(table, fmt)
    question = compose_question(PLAIN_PREAMBLE, entry.blurred.text, table_text)
    warned = compose_question(WARNED_PREAMBLE, entry.blurred.text, table_text)
    if table.trap is None:
        label = {"kind": "answer", "value": entry.validation.expected}
    else:
        label = {"kind": "ill_defined", "trap": table.trap.type}
    return Instance(
        instance_id=f"{recipe.name}:{entry.problem_id}:{fmt.value}:{slot}",
        problem_id=entry.problem_id,
        subset=recipe.name,
        format=fmt,
        question=question,
        question_warned=warned,
        blurred_text=entry.blurred.text,
        table=table,
        label=label,
        difficulty_meta=_difficulty_meta(table, entry.state),
    )


def _build_benign(corpus, recipe: Recipe):
    instances, exclusions = [], []
    for entry in corpus:
        ops = [
            template.bind(derive_seed(recipe.master_seed, entry.problem_id, i))
            for i, template in enumerate(recipe.ops)
        ]
        table = from_seed(entry.seed, entry.state)
        try:
            for op in ops:
                table = apply(table, op, entry.state)
        except AugmentError as err:
            for fmt in recipe.formats:
                exclusions.append({"problem_id": entry.problem_id,
                                   "format": fmt.value, "reason": str(err)})
            continue
        report = validate_table(entry.state, table)
        if not report.ok or report.recomputed != entry.validation.expected:
            for fmt in recipe.formats:
                exclusions.append({
                    "problem_id": entry.problem_id, "format": fmt.value,
                    "reason": f"re-validation failed: {report.mismatch_detail}",
                })
            continue
        for fmt in recipe.formats:
            instances.append(_make_instance(entry, recipe, fmt, table, slot=0))
    return instances, exclusions


def _trap_quotas(recipe: Recipe, slots: int) -> dict[TrapType, int]:
    pinned = next(
        (op.trap for op in recipe.ops if op.kind == "inf_mut" and op.trap), None
    )
    if pinned is not None:
        return {pinned: slots}
    mix = recipe.trap_mix or {"missing": 0.5, "contra": 0.5}
    quotas = {}
    assigned = 0
    types = sorted(mix)
    for name in types[:-1]:
        quotas[TrapType(name)] = round(slots * mix[name])
        assigned += quotas[TrapType(name)]
    quotas[TrapType(types[-1])] = slots - assigned
    return quotas


def _build_trapped(corpus, recipe: Recipe):
    slots = recipe.slots if recipe.slots is not None else len(corpus)
    quotas = _trap_quotas(recipe, slots)
    instances, exclusions = [], []
    max_attempts_per_slot = 6
    cursor = 0
    safety = 0
    while any(q > 0 for q in quotas.values()):
        safety += 1
        if safety > slots * 20:
            raise DatasetError("could not satisfy the trap mix for this corpus")
        entry = corpus[cursor % len(corpus)]
        slot = cursor
        cursor += 1
        # keep the split exact: always work on the type furthest from done
        trap = max(quotas, key=lambda t: (quotas[t], t.value))
        built = None
        for attempt in range(max_attempts_per_slot):
            ops = [
                template.bind(
                    derive_seed(recipe.master_seed, entry.problem_id, i, slot, attempt),
                    trap=trap if template.kind == "inf_mut" else None,
                )
                for i, template in enumerate(recipe.ops)
            ]
            table = from_seed(entry.seed, entry.state)
            try:
                for op in ops:
                    table = apply(table, op, entry.state)
            except AugmentError as err:
                exclusions.append({
                    "problem_id": entry.problem_id, "slot": slot,
                    "trap": trap.value, "reason": str(err),
                })
                break
            if verify_trap(entry.state, table):
                built = table
                break
            exclusions.append({
                "problem_id": entry.problem_id, "slot": slot, "trap": trap.value,
                "reason": "trap verification failed",
            })
        if built is None:
            continue
        emitted_any = False
        for fmt in recipe.formats:
            try:
                instances.append(_make_instance(entry, recipe, fmt, built, slot))
                emitted_any = True
            except FormatError as err:
                exclusions.append({
                    "problem_id": entry.problem_id, "slot": slot,
                    "format": fmt.value, "reason": str(err),
                })
        if emitted_any:
            quotas[trap] -= 1
    return instances, exclusions


def build_subset(corpus: list[TransformedSeed], recipe: Recipe):
    """Build one subset; returns (instances, manifest)."""
    usable = [entry for entry in corpus if entry.validation.ok]
    if not usable:
        raise EmptyCorpus("no validated corpus entries")
    if recipe.has_trap:
        instances, exclusions = _build_trapped(usable, recipe)
    else:
        instances, exclusions = _build_benign(usable, recipe)
    manifest = build_manifest(recipe, usable, instances, exclusions)
    return instances, manifest


# ----------------------------- probes -----------------------------

def make_retrieval_probe(instance: Instance, column_key: str) -> RetrievalProbe:
    """Single-step lookup question for one given cell of the seed row."""
    columns = {c.key: c for c in instance.table.columns}
    if column_key not in columns or columns[column_key].kind is not ColumnKind.GIVEN:
        raise ColumnMissing(f"no given column '{column_key}'")
    seed_row = instance.table.seed_row
    cell = seed_row.get(column_key) if seed_row else None
    if cell is None or cell.value is None:
        raise NullCell(f"seed cell for '{column_key}' is null or absent")
    display = columns[column_key].display
    name = instance.table.seed_name
    table_text = render(instance.table, instance.format)
    question = (
        "Answer using the table below. Reply with the single requested value "
        f"on a line starting with '####'.\n\nWhat is the {display} for {name}?"
        f"\n\nTable:\n{table_text}"
    )
    return RetrievalProbe(
        probe_id=f"probe:{instance.instance_id}:{column_key}",
        instance_id=instance.instance_id,
        column_key=column_key,
        question=question,
        gold=cell.value,
    )


def build_probes(instances) -> list[RetrievalProbe]:
    """One probe per instance over a deterministically chosen given column."""
    probes = []
    for instance in instances:
        seed_row = instance.table.seed_row
        if not seed_row:
            continue
        candidates = sorted(
            c.key for c in instance.table.columns
            if c.kind is ColumnKind.GIVEN
            and seed_row.get(c.key) is not None
            and seed_row[c.key].value is not None
        )
        if not candidates:
            continue
        pick = derive_seed(0, instance.instance_id, 0) % len(candidates)
        probes.append(make_retrieval_probe(instance, candidates[pick]))
    return probes


# ----------------------------- stats -----------------------------

DEFAULT_VARIABLE_BINS = (3, 5)  # <=3, 4..5, >=6


def variable_bin(n_variables: int, bins=DEFAULT_VARIABLE_BINS) -> int:
    low, high = bins
    if n_variables <= low:
        return 0
    if n_variables <= high:
        return 1
    return 2


def bucket_difficulty(instances, bins=DEFAULT_VARIABLE_BINS) -> dict:
    """Counts over subset (retrieval difficulty) x variable-count bins."""
    order = []
    for instance in instances:
        if instance.subset not in order:
            order.append(instance.subset)
    grid = {subset: [0, 0, 0] for subset in order}
    for instance in instances:
        grid[instance.subset][
            variable_bin(instance.difficulty_meta["n_variables"], bins)
        ] += 1
    low, high = bins
    return {
        "bins": [f"<={low}", f"{low + 1}-{high}", f">={high + 1}"],
        "grid": grid,
    }


def stats(instances) -> dict:
    """Per-subset question counts, table dimensions, and trap histogram."""
    subsets: dict[str, list[Instance]] = {}
    for instance in instances:
        subsets.setdefault(instance.subset, []).append(instance)
    out = {}
    for subset, members in subsets.items():
        n = len(members)
        mean = lambda key: sum(m.difficulty_meta[key] for m in members) / n
        traps: dict[str, int] = {}
        for m in members:
            if m.is_ill_defined:
                traps[m.trap_type.value] = traps.get(m.trap_type.value, 0) + 1
        out[subset] = {
            "questions": n,
            "mean_rows": mean("n_rows"),
            "mean_cols": mean("n_cols"),
            "mean_cells": mean("n_cells"),
            "mean_question_chars": sum(len(m.question) for m in members) / n,
            "trap_histogram": traps,
        }
    return out


# ----------------------------- io & manifests -----------------------------

def instance_to_record(instance: Instance) -> dict:
    label = {"kind": instance.label["kind"]}
    if instance.label["kind"] == "answer":
        label["value"] = str(instance.label["value"])
    else:
        label["trap"] = instance.label["trap"].value
    return {
        "instance_id": instance.instance_id,
        "problem_id": instance.problem_id,
        "subset": instance.subset,
        "format": instance.format.value,
        "question": instance.question,
        "question_warned": instance.question_warned,
        "blurred_text": instance.blurred_text,
        "table": table_to_record(instance.table),
        "label": label,
        "difficulty_meta": instance.difficulty_meta,
    }


def instance_from_record(record: dict) -> Instance:
    label_raw = record["label"]
    if label_raw["kind"] == "answer":
        label = {"kind": "answer", "value": Fraction(label_raw["value"])}
    else:
        label = {"kind": "ill_defined", "trap": TrapType(label_raw["trap"])}
    return Instance(
        instance_id=record["instance_id"],
        problem_id=record["problem_id"],
        subset=record["subset"],
        format=TableFormat(record["format"]),
        question=record["question"],
        question_warned=record["question_warned"],
        blurred_text=record.get("blurred_text", ""),
        table=table_from_record(record["table"]),
        label=label,
        difficulty_meta=dict(record["difficulty_meta"]),
    )


def instances_jsonl(instances) -> str:
    lines = [
        json.dumps(instance_to_record(i), ensure_ascii=False, sort_keys=True)
        for i in instances
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def content_hash(text: str) -> str:
    return "sha256:" + hashlib.sha256(text.encode("utf-8")).hexdigest()


def build_manifest(recipe: Recipe, corpus, instances, exclusions) -> dict:
    text = instances_jsonl(instances)
    return {
        "recipe": recipe_to_dict(recipe),
        "corpus_size": len(corpus),
        "counts": {"emitted": len(instances), "excluded": len(exclusions)},
        "exclusions": exclusions,
        "content_hash": content_hash(text),
        "stats": stats(instances),
        "notes": [
            "Row and column statistics are computed from the emitted tables and "
            "follow directly from the recipe operator parameters; externally "
            "quoted summary figures for similarly named subsets may differ and "
            "are not used here.",
        ],
    }


def atomic_write(path: str | Path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def write_dataset(out_dir: str | Path, recipe: Recipe, instances, manifest):
    out_dir = Path(out_dir)
    dataset_path = out_dir / f"{recipe.name}.jsonl"
    manifest_path = out_dir / f"{recipe.name}.manifest.json"
    atomic_write(dataset_path, instances_jsonl(instances))
    atomic_write(manifest_path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return dataset_path, manifest_path


def load_instances(path: str | Path) -> list[Instance]:
    instances = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                instances.append(instance_from_record(json.loads(line)))
    return instances


def load_transformed_corpus(path: str | Path) -> list[TransformedSeed]:
    entries = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                entries.append(transformed_from_record(json.loads(line)))
    return entries


def write_transformed_corpus(path: str | Path, entries):
    lines = [
        json.dumps(transformed_to_record(e), ensure_ascii=False, sort_keys=True)
        for e in entries
    ]
    atomic_write(path, "\n".join(lines) + ("\n" if lines else ""))


def probe_to_record(probe: RetrievalProbe) -> dict:
    return {
        "probe_id": probe.probe_id,
        "instance_id": probe.instance_id,
        "column_key": probe.column_key,
        "question": probe.question,
        "gold": str(probe.gold),
    }


def probe_from_record(record: dict) -> RetrievalProbe:
    return RetrievalProbe(
        probe_id=record["probe_id"],
        instance_id=record["instance_id"],
        column_key=record["column_key"],
        question=record["question"],
        gold=Fraction(record["gold"]),
    )
