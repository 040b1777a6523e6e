"""Structured-output parsing with bounded repair.

Model replies are prose plus (hopefully) one JSON object. ``parse_structured``
extracts the first well-formed object, tolerating surrounding text and code
fences, validates it against a registered artifact schema, and on failure
issues exactly one repair round-trip before giving up. Free prose is never
propagated across an agent boundary as structure.

Lenient coercions are deliberate and closed (see docs/formats.md):

* bool fields accept "true"/"false"/"yes"/"no"/"y"/"n"/"0"/"1" and 0/1;
* list-of-string fields accept a bare string (wrapped) and null (empty);
* optional string fields default to "".
"""

from __future__ import annotations

import json
import logging
import re
from typing import Callable

from secplan.errors import NoStructuredContent, SchemaViolation
from secplan.llm.provider import ChatProvider, chat
from secplan.llm.templates import REPAIR_SUFFIX, PromptTemplate, render_prompt

log = logging.getLogger(__name__)

_FENCE_RE = re.compile(r"```(?:[a-zA-Z0-9_-]+)?\s*\n(.*?)```", re.DOTALL)

_TRUE_WORDS = {"true", "yes", "y", "1"}
_FALSE_WORDS = {"false", "no", "n", "0"}


def extract_json_object(text: str) -> dict | None:
    """Return the first well-formed JSON object found in the text, else None."""
    decoder = json.JSONDecoder()
    candidates: list[str] = [m.group(1) for m in _FENCE_RE.finditer(text)]
    candidates.append(text)
    for candidate in candidates:
        pos = candidate.find("{")
        while pos != -1:
            try:
                value, _end = decoder.raw_decode(candidate[pos:])
            except json.JSONDecodeError:
                value = None
            if isinstance(value, dict):
                return value
            pos = candidate.find("{", pos + 1)
    return None


# ------------------------------------------------------------------
# Field coercions
# ------------------------------------------------------------------


def _as_bool(value, path: str) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, int) and value in (0, 1):
        return bool(value)
    if isinstance(value, str):
        lowered = value.strip().lower()
        if lowered in _TRUE_WORDS:
            return True
        if lowered in _FALSE_WORDS:
            return False
    raise SchemaViolation(f"{path}: expected a boolean, got {value!r}")


def _as_str(value, path: str, required: bool = True) -> str:
    if value is None and not required:
        return ""
    if isinstance(value, str):
        if required and not value.strip():
            raise SchemaViolation(f"{path}: must be a non-empty string")
        return value
    raise SchemaViolation(f"{path}: expected a string, got {type(value).__name__}")


def _as_str_list(value, path: str) -> list[str]:
    if value is None:
        return []
    if isinstance(value, str):
        value = [value]
    if not isinstance(value, list):
        raise SchemaViolation(f"{path}: expected a list of strings, got {type(value).__name__}")
    out = []
    for i, item in enumerate(value):
        if not isinstance(item, str):
            raise SchemaViolation(f"{path}[{i}]: expected a string, got {type(item).__name__}")
        out.append(item)
    return out


def _as_str_map(value, path: str) -> dict[str, str]:
    if not isinstance(value, dict):
        raise SchemaViolation(f"{path}: expected an object, got {type(value).__name__}")
    out = {}
    for key, item in value.items():
        out[str(key)] = _as_str(item, f"{path}.{key}")
    return out


def _require(obj: dict, name: str):
    if name not in obj:
        raise SchemaViolation(f"missing required field {name!r}")
    return obj[name]


# ------------------------------------------------------------------
# Registered artifact schemas
# ------------------------------------------------------------------


def _threat_verdict(obj: dict) -> dict:
    return {
        "relevant": _as_bool(_require(obj, "relevant"), "relevant"),
        "rationale": _as_str(_require(obj, "rationale"), "rationale"),
    }


def _redundancy_verdict(obj: dict) -> dict:
    return {
        "remove_query_ids": _as_str_list(obj.get("remove_query_ids"), "remove_query_ids"),
        "reason": _as_str(obj.get("reason"), "reason", required=False),
    }


def _element_list(obj: dict) -> dict:
    return {"elements": _as_str_list(_require(obj, "elements"), "elements")}


def _policy_records(obj: dict) -> dict:
    raw = _require(obj, "policies")
    if not isinstance(raw, list):
        raise SchemaViolation("policies: expected a list")
    policies = []
    for i, rec in enumerate(raw):
        if not isinstance(rec, dict):
            raise SchemaViolation(f"policies[{i}]: expected an object")
        policies.append(
            {
                "statement": _as_str(_require(rec, "statement"), f"policies[{i}].statement"),
                "security_relevance": _as_str(
                    rec.get("security_relevance"), f"policies[{i}].security_relevance", required=False
                ),
                "risk_tags": _as_str_list(rec.get("risk_tags"), f"policies[{i}].risk_tags"),
            }
        )
    return {"policies": policies}


def _test_cases(obj: dict) -> dict:
    raw = _require(obj, "test_cases")
    if not isinstance(raw, list):
        raise SchemaViolation("test_cases: expected a list")
    cases = []
    for i, rec in enumerate(raw):
        if not isinstance(rec, dict):
            raise SchemaViolation(f"test_cases[{i}]: expected an object")
        tools_raw = _require(rec, "testing_tools")
        if not isinstance(tools_raw, dict):
            raise SchemaViolation(f"test_cases[{i}].testing_tools: expected an object")
        tools = {
            str(k): _as_str_list(v, f"test_cases[{i}].testing_tools.{k}")
            for k, v in tools_raw.items()
        }
        cases.append(
            {
                "threat_category": _as_str(
                    _require(rec, "threat_category"), f"test_cases[{i}].threat_category"
                ),
                "test_objective": _as_str(
                    _require(rec, "test_objective"), f"test_cases[{i}].test_objective"
                ),
                "methodology": _as_str_map(_require(rec, "methodology"), f"test_cases[{i}].methodology"),
                "expected_result": _as_str_map(
                    _require(rec, "expected_result"), f"test_cases[{i}].expected_result"
                ),
                "evaluation_criteria": _as_str_map(
                    _require(rec, "evaluation_criteria"), f"test_cases[{i}].evaluation_criteria"
                ),
                "testing_tools": tools,
            }
        )
    return {"test_cases": cases}


SCHEMAS: dict[str, Callable[[dict], dict]] = {
    "threat_verdict": _threat_verdict,
    "redundancy_verdict": _redundancy_verdict,
    "element_list": _element_list,
    "policy_records": _policy_records,
    "test_cases": _test_cases,
}


def parse_structured(
    response_text: str,
    schema: str,
    repair: Callable[[str], str] | None = None,
) -> dict:
    """Extract and validate one structured object from a model reply.

    On extraction or validation failure, calls ``repair`` (at most once) with
    the error text and retries against the repaired reply; the second failure
    is terminal.
    """
    if schema not in SCHEMAS:
        raise SchemaViolation(f"unknown schema {schema!r}; registered: {sorted(SCHEMAS)}")
    validator = SCHEMAS[schema]

    def attempt(text: str):
        obj = extract_json_object(text)
        if obj is None:
            raise NoStructuredContent("no JSON object found in response")
        return validator(obj)

    try:
        return attempt(response_text)
    except (NoStructuredContent, SchemaViolation) as first_error:
        if repair is None:
            raise
        log.info("structured parse failed (%s); issuing one repair round-trip", first_error.message)
        repaired = repair(first_error.message)
        return attempt(repaired)


def chat_structured(
    provider: ChatProvider,
    template: PromptTemplate,
    bindings: dict[str, str],
    schema: str,
    max_retries: int = 2,
    backoff_base: float = 0.5,
    on_exchange=None,
) -> dict:
    """Render, chat, and parse; wires the single repair round-trip to chat().

    At most one extra completion is issued per parse, re-prompting with the
    validation error appended to the original prompt.
    """
    prompt = render_prompt(template, bindings)
    exchange = chat(
        provider, prompt, max_retries=max_retries, backoff_base=backoff_base, on_exchange=on_exchange
    )

    def repair(error: str) -> str:
        repair_prompt = prompt + REPAIR_SUFFIX.replace("{error}", error)
        return chat(
            provider,
            repair_prompt,
            max_retries=max_retries,
            backoff_base=backoff_base,
            on_exchange=on_exchange,
        ).response

    return parse_structured(exchange.response, schema, repair=repair)
