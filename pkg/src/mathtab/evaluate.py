"""Score model transcripts: answer extraction, verdicts, and metric tables.

Extraction precedence is boxed expression, then a '####' marker, then the
last number token; refusal phrases only count when no final-answer marker
exists, so a model that hedges and then answers anyway is scored on the
answer. All rates are exact fractions so reports reproduce bit-for-bit.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Optional

from .dataset import Instance, RetrievalProbe, variable_bin
from .llm import BudgetExhausted, Provider, TEMPLATES, render_template


class EvalError(Exception):
    pass


class UnknownInstance(EvalError):
    def __init__(self, instance_id: str):
        self.instance_id = instance_id
        super().__init__(f"transcript references unknown instance '{instance_id}'")


class ExtractedKind(Enum):
    NUMBER = "number"
    REFUSAL = "refusal"
    UNPARSEABLE = "unparseable"


@dataclass(frozen=True)
class Extracted:
    kind: ExtractedKind
    value: Optional[Fraction] = None


class Verdict(Enum):
    CORRECT = "correct"
    WRONG = "wrong"
    CORRECT_REJECTION = "correct_rejection"
    MISSED_TRAP = "missed_trap"
    FALSE_REJECTION = "false_rejection"


@dataclass
class EvalRecord:
    instance_id: str
    raw_response: str
    extracted: Extracted
    verdict: Verdict
    variant: str = "plain"  # which preamble the model saw


DEFAULT_REFUSAL_PATTERNS = (
    "unsolvable",
    "cannot be determined",
    "can't be determined",
    "cannot determine",
    "cannot be answered",
    "not enough information",
    "insufficient information",
    "missing",
    "contradict",
    "contradiction",
    "contradictory",
    "ill-posed",
    "ill-defined",
    "no valid answer",
    "impossible to answer",
)


@dataclass
class ScoringPolicy:
    refusal_patterns: tuple[str, ...] = DEFAULT_REFUSAL_PATTERNS
    relative_tolerance: Fraction = Fraction(1, 10000)

    @classmethod
    def from_file(cls, path: str | Path) -> "ScoringPolicy":
        with open(path, encoding="utf-8") as handle:
            raw = json.load(handle)
        return cls(
            refusal_patterns=tuple(raw.get("refusal_patterns",
                                           DEFAULT_REFUSAL_PATTERNS)),
            relative_tolerance=Fraction(str(raw.get("relative_tolerance", "1/10000"))),
        )


_BOXED = re.compile(r"\\boxed\{([^{}]*)\}")
_MARKED = re.compile(r"####\s*([^\n]*)")
_NUMBER = re.compile(r"-?\$?\d[\d,]*(?:\.\d+)?(?:/\d+)?")


def _clean_number(token: str) -> Optional[Fraction]:
    text = token.strip().strip(".").replace("$", "").replace(",", "").replace("%", "")
    if not text:
        return None
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        return None


def _last_number(text: str) -> Optional[Fraction]:
    hits = [_clean_number(m.group(0)) for m in _NUMBER.finditer(text)]
    hits = [h for h in hits if h is not None]
    return hits[-1] if hits else None


def _matches_refusal(text: str, patterns) -> bool:
    lowered = text.lower()
    return any(p in lowered for p in patterns)


def extract_answer(raw: str,
                   policy: Optional[ScoringPolicy] = None) -> Extracted:
    """Classify a transcript as a number, a refusal, or unparseable."""
    policy = policy or ScoringPolicy()
    boxed = _BOXED.findall(raw)
    if boxed:
        value = _clean_number(boxed[-1]) or _last_number(boxed[-1])
        if value is not None:
            return Extracted(ExtractedKind.NUMBER, value)
        if _matches_refusal(boxed[-1], policy.refusal_patterns):
            return Extracted(ExtractedKind.REFUSAL)
    marked = _MARKED.findall(raw)
    if marked:
        value = _clean_number(marked[-1]) or _last_number(marked[-1])
        if value is not None:
            return Extracted(ExtractedKind.NUMBER, value)
        if _matches_refusal(marked[-1], policy.refusal_patterns):
            return Extracted(ExtractedKind.REFUSAL)
    # no final-answer marker: refusal phrases take precedence over stray numbers
    if _matches_refusal(raw, policy.refusal_patterns):
        return Extracted(ExtractedKind.REFUSAL)
    value = _last_number(raw)
    if value is not None:
        return Extracted(ExtractedKind.NUMBER, value)
    return Extracted(ExtractedKind.UNPARSEABLE)


def numbers_match(extracted: Fraction, gold: Fraction,
                  policy: Optional[ScoringPolicy] = None) -> bool:
    """Exact for integer golds; small relative tolerance for decimal golds."""
    if extracted == gold:
        return True
    policy = policy or ScoringPolicy()
    if gold.denominator == 1:
        return False
    if gold == 0:
        return extracted == 0
    return abs(extracted - gold) <= policy.relative_tolerance * abs(gold)


def verdict_for(label: dict, extracted: Extracted,
                policy: Optional[ScoringPolicy] = None) -> Verdict:
    """Total mapping from (label, extracted) to a verdict."""
    if label["kind"] == "answer":
        if extracted.kind is ExtractedKind.REFUSAL:
            return Verdict.FALSE_REJECTION
        if extracted.kind is ExtractedKind.NUMBER and numbers_match(
                extracted.value, label["value"], policy):
            return Verdict.CORRECT
        return Verdict.WRONG
    # ill-defined: only an explicit refusal counts as catching the trap
    if extracted.kind is ExtractedKind.REFUSAL:
        return Verdict.CORRECT_REJECTION
    return Verdict.MISSED_TRAP


def score(instances: list[Instance], transcripts: list[dict],
          policy: Optional[ScoringPolicy] = None) -> list[EvalRecord]:
    """Score raw transcripts ({instance_id, raw_response[, variant]}) against labels."""
    policy = policy or ScoringPolicy()
    by_id = {i.instance_id: i for i in instances}
    records = []
    for transcript in transcripts:
        instance_id = transcript["instance_id"]
        instance = by_id.get(instance_id)
        if instance is None:
            raise UnknownInstance(instance_id)
        raw = transcript["raw_response"]
        extracted = extract_answer(raw, policy)
        records.append(EvalRecord(
            instance_id=instance_id,
            raw_response=raw,
            extracted=extracted,
            verdict=verdict_for(instance.label, extracted, policy),
            variant=transcript.get("variant", "plain"),
        ))
    return records


def score_probes(probes: list[RetrievalProbe], transcripts: list[dict],
                 policy: Optional[ScoringPolicy] = None) -> list[EvalRecord]:
    policy = policy or ScoringPolicy()
    by_id = {p.probe_id: p for p in probes}
    records = []
    for transcript in transcripts:
        probe_id = transcript["instance_id"]
        probe = by_id.get(probe_id)
        if probe is None:
            raise UnknownInstance(probe_id)
        extracted = extract_answer(transcript["raw_response"], policy)
        verdict = verdict_for({"kind": "answer", "value": probe.gold},
                              extracted, policy)
        records.append(EvalRecord(probe_id, transcript["raw_response"],
                                  extracted, verdict, "probe"))
    return records


# ----------------------------- aggregation -----------------------------

@dataclass
class Metrics:
    per_subset_accuracy: dict[str, Fraction]
    missing_rejection_rate: Optional[Fraction]
    contra_rejection_rate: Optional[Fraction]
    rejection_denominators: dict[str, int]
    well_defined_accuracy_plain: Optional[Fraction]
    well_defined_accuracy_warned: Optional[Fraction]
    warned_delta: Optional[Fraction]
    difficulty_grid: dict[str, list[Optional[Fraction]]]
    grid_bins: list[str]
    retrieval_accuracy: dict[str, Fraction] = field(default_factory=dict)
    reasoning_accuracy: dict[str, Fraction] = field(default_factory=dict)


def _ratio(hits: int, total: int) -> Optional[Fraction]:
    return Fraction(hits, total) if total else None


def aggregate(records: list[EvalRecord], instances: list[Instance],
              probe_records: Optional[list[EvalRecord]] = None,
              probes: Optional[list[RetrievalProbe]] = None) -> Metrics:
    """Compute every reported metric from scored records."""
    by_id = {i.instance_id: i for i in instances}
    for record in records:
        if record.instance_id not in by_id:
            raise UnknownInstance(record.instance_id)

    def is_correct(record):
        return record.verdict is Verdict.CORRECT

    # per-subset accuracy over well-defined instances, plain variant
    subset_hits: dict[str, list[int]] = {}
    grid_hits: dict[str, list[list[int]]] = {}
    plain_hits = [0, 0]
    warned_hits = [0, 0]
    rejections = {"missing": [0, 0], "contra": [0, 0],
                  "direct_missing": [0, 0], "direct_contra": [0, 0]}
    for record in records:
        instance = by_id[record.instance_id]
        if instance.is_ill_defined:
            bucket = rejections[instance.trap_type.value]
            bucket[1] += 1
            if record.verdict is Verdict.CORRECT_REJECTION:
                bucket[0] += 1
            continue
        if record.variant == "warned":
            warned_hits[1] += 1
            warned_hits[0] += int(is_correct(record))
            continue
        plain_hits[1] += 1
        plain_hits[0] += int(is_correct(record))
        subset = subset_hits.setdefault(instance.subset, [0, 0])
        subset[1] += 1
        subset[0] += int(is_correct(record))
        cell = grid_hits.setdefault(instance.subset, [[0, 0], [0, 0], [0, 0]])
        bin_index = variable_bin(instance.difficulty_meta["n_variables"])
        cell[bin_index][1] += 1
        cell[bin_index][0] += int(is_correct(record))

    per_subset = {
        subset: _ratio(hits, total) for subset, (hits, total) in subset_hits.items()
    }
    grid = {
        subset: [_ratio(h, t) for h, t in cells]
        for subset, cells in grid_hits.items()
    }
    plain_acc = _ratio(*plain_hits)
    warned_acc = _ratio(*warned_hits)
    delta = None
    if plain_acc is not None and warned_acc is not None:
        delta = plain_acc - warned_acc

    retrieval: dict[str, Fraction] = {}
    reasoning: dict[str, Fraction] = {}
    if probe_records and probes:
        probe_instance = {p.probe_id: p.instance_id for p in probes}
        probe_hits: dict[str, list[int]] = {}
        for record in probe_records:
            instance = by_id.get(probe_instance.get(record.instance_id, ""))
            if instance is None:
                continue
            bucket = probe_hits.setdefault(instance.subset, [0, 0])
            bucket[1] += 1
            bucket[0] += int(is_correct(record))
        retrieval = {s: _ratio(h, t) for s, (h, t) in probe_hits.items()}
        reasoning = {s: acc for s, acc in per_subset.items() if acc is not None}

    return Metrics(
        per_subset_accuracy=per_subset,
        missing_rejection_rate=_ratio(*rejections["missing"]),
        contra_rejection_rate=_ratio(*rejections["contra"]),
        rejection_denominators={k: v[1] for k, v in rejections.items() if v[1]},
        well_defined_accuracy_plain=plain_acc,
        well_defined_accuracy_warned=warned_acc,
        warned_delta=delta,
        difficulty_grid=grid,
        grid_bins=["<=3", "4-5", ">=6"],
        retrieval_accuracy=retrieval,
        reasoning_accuracy=reasoning,
    )


def metrics_to_dict(metrics: Metrics) -> dict:
    def show(value):
        if value is None:
            return None
        return {"exact": str(value), "float": float(value)}

    return {
        "per_subset_accuracy": {k: show(v) for k, v in
                                metrics.per_subset_accuracy.items()},
        "missing_rejection_rate": show(metrics.missing_rejection_rate),
        "contra_rejection_rate": show(metrics.contra_rejection_rate),
        "rejection_denominators": metrics.rejection_denominators,
        "well_defined_accuracy_plain": show(metrics.well_defined_accuracy_plain),
        "well_defined_accuracy_warned": show(metrics.well_defined_accuracy_warned),
        "warned_delta": show(metrics.warned_delta),
        "difficulty_grid": {
            subset: [show(v) for v in cells]
            for subset, cells in metrics.difficulty_grid.items()
        },
        "grid_bins": metrics.grid_bins,
        "retrieval_accuracy": {k: show(v) for k, v in
                               metrics.retrieval_accuracy.items()},
        "reasoning_accuracy": {k: show(v) for k, v in
                               metrics.reasoning_accuracy.items()},
    }


def render_report(metrics: Metrics) -> str:
    """Human-readable summary table."""
    def pct(value):
        return "  n/a" if value is None else f"{float(value) * 100:5.1f}%"

    lines = ["subset accuracy (plain, well-defined)"]
    for subset, acc in metrics.per_subset_accuracy.items():
        lines.append(f"  {subset:<12} {pct(acc)}")
    lines.append("robustness (rejection rates)")
    lines.append(f"  missing      {pct(metrics.missing_rejection_rate)}")
    lines.append(f"  contra       {pct(metrics.contra_rejection_rate)}")
    lines.append("well-defined accuracy by preamble")
    lines.append(f"  plain        {pct(metrics.well_defined_accuracy_plain)}")
    lines.append(f"  trap-warned  {pct(metrics.well_defined_accuracy_warned)}")
    lines.append(f"  delta        {pct(metrics.warned_delta)}")
    if metrics.retrieval_accuracy:
        lines.append("retrieval vs reasoning")
        for subset in metrics.retrieval_accuracy:
            lines.append(
                f"  {subset:<12} retrieval {pct(metrics.retrieval_accuracy[subset])}"
                f"  reasoning {pct(metrics.reasoning_accuracy.get(subset))}"
            )
    lines.append("difficulty grid (rows: subset, cols: variable-count bins "
                 + "/".join(metrics.grid_bins) + ")")
    for subset, cells in metrics.difficulty_grid.items():
        lines.append(f"  {subset:<12} " + " ".join(pct(c) for c in cells))
    return "\n".join(lines)


# ----------------------------- live runs -----------------------------

@dataclass
class RunResult:
    transcripts: list[dict]
    incomplete: bool = False
    reason: Optional[str] = None


def run_model(instances: list[Instance], provider: Provider,
              variant: str = "plain") -> RunResult:
    """One call per instance; transcripts are rescorable offline."""
    template = TEMPLATES["solve_trap_warned" if variant == "warned" else "solve_plain"]
    transcripts = []
    for instance in instances:
        question = instance.question_warned if variant == "warned" \
            else instance.question
        try:
            out = provider.complete_messages(
                render_template(template, {"question": question})
            )
        except BudgetExhausted as err:
            return RunResult(transcripts, incomplete=True, reason=str(err))
        transcripts.append({
            "instance_id": instance.instance_id,
            "raw_response": out["text"],
            "variant": variant,
        })
    return RunResult(transcripts)


def run_probes(probes: list[RetrievalProbe], provider: Provider) -> RunResult:
    template = TEMPLATES["retrieval_probe"]
    transcripts = []
    for probe in probes:
        try:
            out = provider.complete_messages(
                render_template(template, {"question": probe.question})
            )
        except BudgetExhausted as err:
            return RunResult(transcripts, incomplete=True, reason=str(err))
        transcripts.append({
            "instance_id": probe.probe_id,
            "raw_response": out["text"],
            "variant": "probe",
        })
    return RunResult(transcripts)


def load_transcripts(path: str | Path) -> list[dict]:
    transcripts = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                transcripts.append(json.loads(line))
    return transcripts


def write_transcripts(path: str | Path, transcripts):
    from .dataset import atomic_write

    lines = [json.dumps(t, ensure_ascii=False) for t in transcripts]
    atomic_write(path, "\n".join(lines) + ("\n" if lines else ""))
