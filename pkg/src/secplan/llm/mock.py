"""Deterministic scripted chat provider for tests and headless fixture runs.

A script is an ordered list of rules; the first matching rule answers the
prompt. Matchers are exact prompt hashes, substring patterns (one substring
or a list that must all appear), or call-sequence ordinals. Unmatched
prompts raise UnscriptedPrompt so a fixture gap fails loudly instead of the
mock hallucinating an answer.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from secplan.errors import ProviderError, UnscriptedPrompt


@dataclass
class ScriptRule:
    response: str
    contains: list[str] | None = None
    prompt_sha256: str | None = None
    seq: int | None = None
    fail: int = 0
    always_fail: bool = False
    _failures: int = field(default=0, repr=False)

    def matches(self, prompt: str, ordinal: int) -> bool:
        if self.seq is not None:
            return self.seq == ordinal
        if self.prompt_sha256 is not None:
            return hashlib.sha256(prompt.encode("utf-8")).hexdigest() == self.prompt_sha256
        if self.contains is not None:
            return all(fragment in prompt for fragment in self.contains)
        return False


class MockProvider:
    """Chat provider that answers from an ordered rule script."""

    def __init__(self, rules: list[ScriptRule], model_name: str = "mock"):
        self.rules = rules
        self.model_name = model_name
        self.calls = 0
        self.prompts: list[str] = []

    def complete(self, prompt: str) -> str:
        ordinal = self.calls
        self.calls += 1
        self.prompts.append(prompt)
        for rule in self.rules:
            if not rule.matches(prompt, ordinal):
                continue
            if rule.always_fail:
                raise ProviderError("scripted permanent failure", retryable=True)
            if rule._failures < rule.fail:
                rule._failures += 1
                raise ProviderError(
                    f"scripted transient failure {rule._failures}/{rule.fail}", retryable=True
                )
            return rule.response
        raise UnscriptedPrompt(
            "no script rule matches prompt (first 160 chars): " + prompt[:160].replace("\n", " ")
        )


def _rule_from_dict(raw: dict) -> ScriptRule:
    contains = raw.get("contains")
    if isinstance(contains, str):
        contains = [contains]
    response = raw.get("response", "")
    if not isinstance(response, str):
        response = json.dumps(response)
    return ScriptRule(
        response=response,
        contains=contains,
        prompt_sha256=raw.get("prompt_sha256"),
        seq=raw.get("seq"),
        fail=int(raw.get("fail", 0)),
        always_fail=bool(raw.get("always_fail", False)),
    )


def mock_provider(script: list[dict] | str | Path, model_name: str = "mock") -> MockProvider:
    """Build a MockProvider from rule dicts or a JSON script file.

    Script file layout: {"rules": [{"contains": [...], "response": ...}, ...]}.
    A non-string response value is serialized to JSON, which keeps fixture
    scripts readable.
    """
    if isinstance(script, (str, Path)):
        payload = json.loads(Path(script).read_text(encoding="utf-8"))
        raw_rules = payload["rules"]
    else:
        raw_rules = script
    return MockProvider([_rule_from_dict(r) for r in raw_rules], model_name=model_name)
