"""Provider abstraction for every model call in the pipeline.

Three backends share one interface: an HTTP chat-completions client with
retries, a replay backend that serves recorded transcripts (and nothing
else), and a scripted queue for tests. Every live call is appended to a
transcript log sufficient to re-run the pipeline bit-identically against
the replay backend.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import requests


class ProviderError(Exception):
    """Base class for provider failures."""


class BudgetExhausted(ProviderError):
    pass


class RateLimited(ProviderError):
    pass


class CacheMiss(ProviderError):
    def __init__(self, key: str):
        self.key = key
        super().__init__(f"no recorded response for request {key}")


class TemplateError(Exception):
    pass


# ----------------------------- templates -----------------------------

@dataclass(frozen=True)
class PromptTemplate:
    name: str
    system: str
    user: str


_SLOT = re.compile(r"\{([a-z_]+)\}")

_DECOUPLING_SYSTEM = """\
You are an experienced mathematician and you are familiar with formal languages. \
Translate the given math word problem into a formal program.

Express all logic in SMT-LIB syntax with prefix notation, so multiplication is \
written as (* a b), never a * b. Declare every quantity with \
(declare-fun name () Int) or (declare-fun name () Real), state one fact per \
(assert ...) line, then finish with (check-sat) followed by \
(get-value (target)) where target is the quantity the question asks for.

Numbers asserted for Real-sorted quantities must be written as decimals: \
'12.0' is correct, '12' is not.

EXAMPLE INPUT
problem: Weng earns $12 an hour for babysitting. Yesterday, she just did \
50 minutes of babysitting. How much did she earn?

EXAMPLE OUTPUT
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

Output only the program.\
"""

_TRANSFORM_SYSTEM = """\
The user provides a problem and its formal representation. Convert the \
explicitly assigned known data of the problem into a table.

The table must only include quantities that are directly assigned values in \
the formal representation, via assertions like (= quantity value). List every \
quantity that appears in the formal definition together with its value and how \
it was obtained, wrapping both in a list: [5, "Given"] for directly assigned \
values, [5, "Calculated"] for derived ones. Add a "name" entry holding the \
protagonist's name as the primary key.

Replace each tabled value in the original problem text with a distinct \
single-letter unknown (x, y, z, w, ...) to produce a generalized problem, so \
that table + generalization = original problem. Substitute literals one for \
one; do not reword anything else.

Set a value range for each tabled quantity with common-sense bounds and a \
unit; a fixed quantity may have min equal to max.

Respond with a single JSON object with exactly these keys: "problem", \
"table", "generalization", "value_ranges".

EXAMPLE INPUT
problem: Weng earns $12 an hour for babysitting. Yesterday, she just did \
50 minutes of babysitting. How much did she earn?
formal_problem:
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

EXAMPLE OUTPUT
{"problem": "Weng earns $12 an hour for babysitting. Yesterday, she just did \
50 minutes of babysitting. How much did she earn?", "table": \
{"name": "Weng", "hourly_rate": [12, "Given"], "minutes_worked": [50, "Given"], \
"minutes_per_hour": [60, "Given"], "hours_worked": [0.8333, "Calculated"], \
"earnings": [10, "Calculated"]}, "generalization": "Weng earns $x an hour for \
babysitting. Yesterday, she just did t minutes of babysitting. How much did \
she earn?", "value_ranges": {"name": null, "hourly_rate": {"min": 7.25, \
"max": 100, "unit": "dollars"}, "minutes_worked": {"min": 10, "max": 1440, \
"unit": "minutes"}, "minutes_per_hour": {"min": 60, "max": 60, "unit": \
"minutes"}}}\
"""

_SOLVER_SYSTEM = """\
You are a careful assistant answering math questions about tables. Reason step \
by step, then give the final numeric answer on its own line prefixed by '####'.\
"""

_PROBE_SYSTEM = """\
You answer lookup questions about tables. Reply with the single requested \
value on a line prefixed by '####'.\
"""

TEMPLATES: dict[str, PromptTemplate] = {
    "semantic_decoupling": PromptTemplate(
        "semantic_decoupling", _DECOUPLING_SYSTEM, "problem: {problem}"
    ),
    "table_transformation": PromptTemplate(
        "table_transformation",
        _TRANSFORM_SYSTEM,
        "problem: {problem}\nformal_problem:\n{formal_problem}",
    ),
    "solve_plain": PromptTemplate("solve_plain", _SOLVER_SYSTEM, "{question}"),
    "solve_trap_warned": PromptTemplate(
        "solve_trap_warned", _SOLVER_SYSTEM, "{question}"
    ),
    "retrieval_probe": PromptTemplate("retrieval_probe", _PROBE_SYSTEM, "{question}"),
}


def render_template(template: PromptTemplate, slots: dict[str, str]) -> list[dict]:
    """Render to a chat message list; rejects unfilled {slot} placeholders."""
    def fill(text: str) -> str:
        out = text
        for key, value in slots.items():
            out = out.replace("{" + key + "}", str(value))
        leftover = _SLOT.search(out)
        if leftover:
            raise TemplateError(
                f"template '{template.name}' has unbound slot {{{leftover.group(1)}}}"
            )
        return out

    return [
        {"role": "system", "content": fill(template.system)},
        {"role": "user", "content": fill(template.user)},
    ]


def request_key(messages: list[dict]) -> str:
    canon = json.dumps(messages, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


# ----------------------------- providers -----------------------------

@dataclass
class Limits:
    max_concurrent: int = 4
    requests_per_minute: Optional[int] = None
    total_token_budget: Optional[int] = None


class Provider:
    """Shared admission control, budget accounting, and transcript logging."""

    def __init__(self, limits: Optional[Limits] = None,
                 transcript_path: Optional[str | Path] = None):
        self.limits = limits or Limits()
        self.transcript_path = Path(transcript_path) if transcript_path else None
        self._semaphore = threading.Semaphore(self.limits.max_concurrent)
        self._lock = threading.Lock()
        self._spent_tokens = 0
        self._request_times: list[float] = []
        self.in_flight = 0
        self.max_in_flight_seen = 0

    def _respond(self, messages: list[dict]) -> tuple[str, dict]:
        raise NotImplementedError

    def complete_messages(self, messages: list[dict]) -> dict:
        with self._lock:
            budget = self.limits.total_token_budget
            if budget is not None and self._spent_tokens >= budget:
                raise BudgetExhausted(
                    f"token budget of {budget} exhausted ({self._spent_tokens} spent)"
                )
        self._await_rate_slot()
        with self._semaphore:
            with self._lock:
                self.in_flight += 1
                self.max_in_flight_seen = max(self.max_in_flight_seen, self.in_flight)
            try:
                text, usage = self._respond(messages)
            finally:
                with self._lock:
                    self.in_flight -= 1
        with self._lock:
            self._spent_tokens += usage.get("total_tokens", 0)
        self._log(messages, text, usage)
        return {"text": text, "usage": usage}

    def _await_rate_slot(self):
        rpm = self.limits.requests_per_minute
        if rpm is None:
            return
        while True:
            with self._lock:
                now = time.monotonic()
                self._request_times = [t for t in self._request_times if now - t < 60.0]
                if len(self._request_times) < rpm:
                    self._request_times.append(now)
                    return
                wait = 60.0 - (now - self._request_times[0])
            time.sleep(max(wait, 0.01))

    def _log(self, messages, text, usage):
        if self.transcript_path is None:
            return
        entry = {
            "key": request_key(messages),
            "messages": messages,
            "response": text,
            "usage": usage,
        }
        line = json.dumps(entry, ensure_ascii=False)
        with self._lock:
            with open(self.transcript_path, "a", encoding="utf-8") as handle:
                handle.write(line + "\n")


def _approx_usage(messages, text) -> dict:
    prompt = sum(len(m["content"]) for m in messages) // 4
    completion = len(text) // 4
    return {
        "prompt_tokens": prompt,
        "completion_tokens": completion,
        "total_tokens": prompt + completion,
    }


class ScriptedProvider(Provider):
    """Pops canned responses off a queue; records the prompts it saw."""

    def __init__(self, responses, **kwargs):
        super().__init__(**kwargs)
        self.queue = list(responses)
        self.calls: list[list[dict]] = []

    def _respond(self, messages):
        self.calls.append(messages)
        if not self.queue:
            raise ProviderError("scripted provider ran out of responses")
        text = self.queue.pop(0)
        return text, _approx_usage(messages, text)


class ReplayProvider(Provider):
    """Read-only playback of a recorded transcript; misses are errors."""

    def __init__(self, store: dict[str, str], **kwargs):
        super().__init__(**kwargs)
        self.store = dict(store)

    @classmethod
    def from_transcript(cls, path: str | Path, **kwargs) -> "ReplayProvider":
        store = {}
        with open(path, encoding="utf-8") as handle:
            for line in handle:
                if not line.strip():
                    continue
                entry = json.loads(line)
                store[entry["key"]] = entry["response"]
        return cls(store, **kwargs)

    def _respond(self, messages):
        key = request_key(messages)
        if key not in self.store:
            raise CacheMiss(key)
        text = self.store[key]
        return text, _approx_usage(messages, text)


class HttpProvider(Provider):
    """Chat-completions wire shape over any compatible endpoint."""

    def __init__(self, endpoint: str, model: str, *,
                 api_key_env: str = "MATHTAB_API_KEY",
                 temperature: float = 0.0,
                 max_tokens: int = 2048,
                 max_attempts: int = 5,
                 backoff_base: float = 1.0,
                 timeout: float = 120.0,
                 session: Optional[requests.Session] = None,
                 **kwargs):
        super().__init__(**kwargs)
        self.endpoint = endpoint
        self.model = model
        self.api_key_env = api_key_env
        self.temperature = temperature
        self.max_tokens = max_tokens
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self.timeout = timeout
        self.session = session or requests.Session()

    def _headers(self) -> dict:
        key = os.environ.get(self.api_key_env)
        if not key:
            raise ProviderError(f"API key env var {self.api_key_env} is not set")
        return {"Authorization": f"Bearer {key}", "Content-Type": "application/json"}

    def _respond(self, messages):
        payload = {
            "model": self.model,
            "messages": messages,
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        }
        last_status = None
        for attempt in range(self.max_attempts):
            if attempt:
                time.sleep(self.backoff_base * 2 ** (attempt - 1))
            try:
                response = self.session.post(
                    self.endpoint, json=payload, headers=self._headers(),
                    timeout=self.timeout,
                )
            except requests.RequestException:
                last_status = "network"
                continue
            last_status = response.status_code
            if response.status_code == 429 or response.status_code >= 500:
                continue
            if response.status_code != 200:
                raise ProviderError(
                    f"endpoint returned {response.status_code}: {response.text[:500]}"
                )
            body = response.json()
            text = body["choices"][0]["message"]["content"]
            usage = body.get("usage") or _approx_usage(messages, text)
            return text, usage
        if last_status == 429:
            raise RateLimited(f"still rate limited after {self.max_attempts} attempts")
        raise ProviderError(
            f"request failed after {self.max_attempts} attempts (last: {last_status})"
        )


def complete(provider: Provider, template: PromptTemplate | str,
             slots: dict[str, str]) -> dict:
    """Render a template and send it through the provider."""
    if isinstance(template, str):
        template = TEMPLATES[template]
    return provider.complete_messages(render_template(template, slots))


def load_provider(config: dict | str | Path) -> Provider:
    """Build a provider from a config mapping or JSON config file path."""
    if not isinstance(config, dict):
        with open(config, encoding="utf-8") as handle:
            config = json.load(handle)
    kind = config.get("backend", "http")
    limits = Limits(**config.get("limits", {}))
    transcript = config.get("transcript_path")
    if kind == "http":
        return HttpProvider(
            config["endpoint"], config["model"],
            api_key_env=config.get("api_key_env", "MATHTAB_API_KEY"),
            temperature=config.get("temperature", 0.0),
            max_tokens=config.get("max_tokens", 2048),
            max_attempts=config.get("max_attempts", 5),
            limits=limits, transcript_path=transcript,
        )
    if kind == "replay":
        return ReplayProvider.from_transcript(
            config["transcript"], limits=limits, transcript_path=transcript
        )
    if kind == "scripted":
        return ScriptedProvider(
            config.get("responses", []), limits=limits, transcript_path=transcript
        )
    raise ValueError(f"unknown provider backend '{kind}'")
