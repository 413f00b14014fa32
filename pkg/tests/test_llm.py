"""Provider backends: scripting, record/replay, limits, template rendering."""

import json
import threading
import time

import pytest

from mathtab.llm import (
    BudgetExhausted,
    CacheMiss,
    Limits,
    ProviderError,
    ReplayProvider,
    ScriptedProvider,
    TemplateError,
    TEMPLATES,
    complete,
    load_provider,
    render_template,
)


def test_scripted_queue_pops_in_order():
    provider = ScriptedProvider(["A"])
    out = complete(provider, "solve_plain", {"question": "Q?"})
    assert out["text"] == "A"
    assert provider.queue == []
    with pytest.raises(ProviderError):
        complete(provider, "solve_plain", {"question": "again"})


def test_decoupling_prompt_contains_problem_verbatim():
    problem = "Weng earns $12 an hour for babysitting."
    messages = render_template(TEMPLATES["semantic_decoupling"], {"problem": problem})
    assert messages[1]["role"] == "user"
    assert problem in messages[1]["content"]


def test_render_rejects_unbound_slots():
    with pytest.raises(TemplateError):
        render_template(TEMPLATES["semantic_decoupling"], {})


def test_rendered_templates_have_no_residual_placeholders():
    slots = {
        "problem": "p", "formal_problem": "f", "question": "q",
    }
    for template in TEMPLATES.values():
        for message in render_template(template, slots):
            assert "{" not in message["content"] or not any(
                f"{{{name}}}" in message["content"] for name in slots
            )


def test_record_then_replay_is_byte_identical(tmp_path):
    log = tmp_path / "transcript.jsonl"
    scripted = ScriptedProvider(["first", "second"], transcript_path=log)
    a1 = complete(scripted, "solve_plain", {"question": "one"})["text"]
    a2 = complete(scripted, "solve_plain", {"question": "two"})["text"]

    replay = ReplayProvider.from_transcript(log)
    assert complete(replay, "solve_plain", {"question": "one"})["text"] == a1
    assert complete(replay, "solve_plain", {"question": "two"})["text"] == a2
    with pytest.raises(CacheMiss):
        complete(replay, "solve_plain", {"question": "three"})


def test_budget_exhaustion():
    provider = ScriptedProvider(
        ["x" * 400, "y"], limits=Limits(total_token_budget=10)
    )
    complete(provider, "solve_plain", {"question": "q"})
    with pytest.raises(BudgetExhausted):
        complete(provider, "solve_plain", {"question": "q2"})


def test_concurrency_never_exceeds_max():
    class SlowScripted(ScriptedProvider):
        def _respond(self, messages):
            time.sleep(0.02)
            return super()._respond(messages)

    provider = SlowScripted(["r"] * 24, limits=Limits(max_concurrent=3))
    threads = [
        threading.Thread(
            target=lambda: complete(provider, "solve_plain", {"question": "q"})
        )
        for _ in range(24)
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert provider.max_in_flight_seen <= 3
    assert provider.queue == []


def test_load_provider_from_config_file(tmp_path):
    config = tmp_path / "provider.json"
    config.write_text(json.dumps({
        "backend": "scripted",
        "responses": ["hello"],
        "limits": {"max_concurrent": 2},
    }))
    provider = load_provider(config)
    assert complete(provider, "solve_plain", {"question": "q"})["text"] == "hello"
