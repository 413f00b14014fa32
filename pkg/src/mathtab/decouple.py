"""Extract a verified formal state from problem text via an LLM loop.

Each round the model proposes a formal program; the solver checks it and,
on failure, the next round's prompt carries the previous output plus a
structured diagnostic. Verification is stricter than plain satisfiability:
when the source corpus supplies a gold answer, the derived goal value must
match it exactly.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Optional

from .formal import (
    DivisionByZero,
    DomainViolation,
    FormalError,
    ModelingState,
    SolveStatus,
    emit_smtlib,
    parse_formal,
    solve,
)
from .llm import (
    BudgetExhausted,
    Provider,
    ProviderError,
    TEMPLATES,
    render_template,
)


@dataclass(frozen=True)
class SeedProblem:
    id: str
    text: str
    gold_answer: Optional[Fraction] = None

    def __post_init__(self):
        if not self.text:
            raise ValueError("problem text must be nonempty")


class DecoupleStatus(Enum):
    VERIFIED = "verified"
    ILL_DEFINED = "ill_defined"
    FAILED = "failed"


@dataclass
class Attempt:
    raw: str
    diagnostic: Optional[str]  # None means the attempt verified

    @property
    def ok(self) -> bool:
        return self.diagnostic is None


@dataclass
class DecoupleOutcome:
    status: DecoupleStatus
    state: Optional[ModelingState]
    attempts: list[Attempt] = field(default_factory=list)
    reason: Optional[str] = None


_FENCE = re.compile(r"```[a-zA-Z0-9_-]*\n(.*?)```", re.DOTALL)


def extract_program(raw: str) -> str:
    """Pull the formal program out of a model response.

    Accepts bare program text, fenced code blocks, or the JSON wrapper shape
    with a "formal-problem"/"formal_problem" field.
    """
    text = raw.strip()
    try:
        payload = json.loads(text)
    except (json.JSONDecodeError, ValueError):
        payload = None
    if isinstance(payload, dict):
        for key in ("formal-problem", "formal_problem", "program"):
            if key in payload:
                text = str(payload[key]).strip()
                break
    fenced = _FENCE.search(text)
    if fenced:
        text = fenced.group(1).strip()
    return text


def _diagnose(raw: str, gold_answer: Optional[Fraction]):
    """Check one attempt; returns (state, diagnostic, contradiction_flag)."""
    try:
        state = parse_formal(extract_program(raw))
    except FormalError as err:
        return None, f"the program did not parse: {err}", False
    if state.goal is None:
        return None, "the program has no (get-value ...) goal", False
    try:
        result = solve(state)
    except (DivisionByZero, DomainViolation) as err:
        return None, f"the program does not evaluate: {err}", False
    if result.status is SolveStatus.CONTRADICTION:
        first, second = result.conflict
        detail = (
            f"the facts contradict each other; the clashing pair is "
            f"'{_render_constraint(state, first)}' and "
            f"'{_render_constraint(state, second)}'"
        )
        return None, detail, True
    if result.status is SolveStatus.UNDERDETERMINED:
        missing = ", ".join(sorted(result.unresolved))
        return None, f"the goal cannot be determined; unconstrained: {missing}", False
    if result.status is SolveStatus.UNSUPPORTED:
        return None, "the program is outside the supported equation-chain fragment", False
    value = result.assignment.get(state.goal.target)
    if value is None:
        return None, f"the goal {state.goal.target} received no value", False
    if gold_answer is not None and value != gold_answer:
        return None, (
            f"the program is satisfiable but the goal value {value} does not "
            f"match the expected answer {gold_answer}"
        ), False
    return state, None, False


def _render_constraint(state: ModelingState, constraint) -> str:
    single = state.with_constraints((constraint,))
    for line in emit_smtlib(single).splitlines():
        if line.startswith("(assert"):
            return line
    return str(constraint)


def decouple(problem: SeedProblem, provider: Provider,
             max_rounds: int = 3) -> DecoupleOutcome:
    """Run the extract-verify-refine loop for one problem."""
    if max_rounds < 1:
        raise ValueError("max_rounds must be >= 1")
    template = TEMPLATES["semantic_decoupling"]
    attempts: list[Attempt] = []
    all_contradictions = True
    for round_index in range(max_rounds):
        messages = render_template(template, {"problem": problem.text})
        if attempts:
            previous = attempts[-1]
            messages[1]["content"] += (
                "\n\nYour previous attempt:\n" + previous.raw
                + "\n\nProblem with that attempt: " + previous.diagnostic
                + "\nOutput a corrected program."
            )
        try:
            raw = provider.complete_messages(messages)["text"]
        except BudgetExhausted as err:
            return DecoupleOutcome(
                DecoupleStatus.FAILED, None, attempts, reason=f"budget: {err}"
            )
        except ProviderError as err:
            raise ProviderError(f"round {round_index + 1}: {err}") from err
        state, diagnostic, contradiction = _diagnose(raw, problem.gold_answer)
        attempts.append(Attempt(raw, diagnostic))
        if state is not None:
            return DecoupleOutcome(DecoupleStatus.VERIFIED, state, attempts)
        all_contradictions = all_contradictions and contradiction
    if all_contradictions:
        return DecoupleOutcome(
            DecoupleStatus.ILL_DEFINED, None, attempts,
            reason="solver reported a contradiction on every round",
        )
    return DecoupleOutcome(
        DecoupleStatus.FAILED, None, attempts,
        reason=f"no verified formalization after {max_rounds} rounds",
    )


# ----------------------------- corpus io -----------------------------

def load_corpus(path: str | Path) -> list[SeedProblem]:
    problems = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                continue
            record = json.loads(line)
            gold = record.get("gold_answer")
            problems.append(SeedProblem(
                id=str(record["id"]),
                text=record["text"],
                gold_answer=None if gold is None else Fraction(str(gold)),
            ))
    ids = [p.id for p in problems]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate problem ids in corpus")
    return problems


def outcome_record(problem: SeedProblem, outcome: DecoupleOutcome) -> dict:
    return {
        "id": problem.id,
        "status": outcome.status.value,
        "formal": emit_smtlib(outcome.state) if outcome.state else None,
        "attempts": [
            {"raw": a.raw, "diagnostic": a.diagnostic} for a in outcome.attempts
        ],
        "reason": outcome.reason,
    }


def decouple_corpus(problems, provider: Provider, out_path: str | Path,
                    max_rounds: int = 3) -> list[DecoupleOutcome]:
    """Decouple a whole corpus, writing one outcome record per line."""
    outcomes = []
    with open(out_path, "w", encoding="utf-8") as handle:
        for problem in problems:
            outcome = decouple(problem, provider, max_rounds=max_rounds)
            outcomes.append(outcome)
            handle.write(json.dumps(outcome_record(problem, outcome),
                                    ensure_ascii=False) + "\n")
    return outcomes
