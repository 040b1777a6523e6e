"""Gateway contracts: templates, retry, scripted mock, structured parsing."""

from __future__ import annotations

import pytest

from secplan.errors import (
    MissingBinding,
    NoStructuredContent,
    ProviderError,
    SchemaViolation,
    UnknownPlaceholder,
    UnscriptedPrompt,
)
from secplan.llm import (
    TEMPLATES,
    MockProvider,
    PromptTemplate,
    ScriptRule,
    chat,
    chat_structured,
    extract_json_object,
    mock_provider,
    parse_structured,
    render_prompt,
)


class TestRenderPrompt:
    def test_direct_substitution(self):
        template = PromptTemplate("t", "Assess {threat} given {context}")
        out = render_prompt(template, {"threat": "fault injection", "context": "smartcard"})
        assert out == "Assess fault injection given smartcard"

    def test_missing_binding(self):
        template = PromptTemplate("t", "Assess {threat} given {context}")
        with pytest.raises(MissingBinding) as err:
            render_prompt(template, {"threat": "fault injection"})
        assert "context" in str(err.value)

    def test_zero_placeholders_identity(self):
        template = PromptTemplate("t", "no placeholders here")
        assert render_prompt(template, {}) == "no placeholders here"

    def test_unknown_placeholder_strict(self):
        template = PromptTemplate("t", "only {a}")
        with pytest.raises(UnknownPlaceholder):
            render_prompt(template, {"a": "x", "b": "y"})
        assert render_prompt(template, {"a": "x", "b": "y"}, strict=False) == "only x"

    def test_no_placeholder_syntax_remains(self):
        for template in TEMPLATES.values():
            bindings = {name: f"<{name} value>" for name in template.required_bindings}
            rendered = render_prompt(template, bindings)
            for name in template.required_bindings:
                assert "{" + name + "}" in template.body
                assert "{" + name + "}" not in rendered

    def test_single_pass_substitution(self):
        template = PromptTemplate("t", "value: {a}")
        rendered = render_prompt(template, {"a": "{a}"})
        assert rendered == "value: {a}"  # injected braces are not re-expanded

    def test_undeclared_placeholder_rejected_at_construction(self):
        with pytest.raises(ValueError):
            PromptTemplate("t", "uses {a} and {b}", frozenset({"a"}))


class TestChatRetry:
    def test_scripted_determinism(self):
        provider = MockProvider(
            [ScriptRule(response="RELEVANT: yes", contains=["assess this"])]
        )
        exchange = chat(provider, "please assess this threat", backoff_base=0)
        assert exchange.response == "RELEVANT: yes"
        assert exchange.attempt == 1

    def test_fail_twice_then_succeed(self):
        provider = MockProvider([ScriptRule(response="ok", contains=["x"], fail=2)])
        exchange = chat(provider, "x", max_retries=3, backoff_base=0)
        assert exchange.response == "ok"
        assert exchange.attempt == 3

    def test_always_fail_exhausts_retries(self):
        provider = MockProvider([ScriptRule(response="", contains=["x"], always_fail=True)])
        with pytest.raises(ProviderError):
            chat(provider, "x", max_retries=2, backoff_base=0)
        assert provider.calls == 3  # initial attempt + 2 retries

    def test_non_retryable_not_retried(self):
        class Terminal:
            model_name = "t"

            def __init__(self):
                self.calls = 0

            def complete(self, prompt):
                self.calls += 1
                raise ProviderError("bad auth", retryable=False)

        provider = Terminal()
        with pytest.raises(ProviderError):
            chat(provider, "x", max_retries=3, backoff_base=0)
        assert provider.calls == 1


class TestMockProvider:
    def test_substring_rule(self):
        provider = mock_provider([{"contains": "fault injection", "response": "no"}])
        assert provider.complete("assess fault injection here") == "no"

    def test_sequence_rules_in_order(self):
        provider = mock_provider([
            {"seq": 0, "response": "first"},
            {"seq": 1, "response": "second"},
        ])
        assert provider.complete("anything") == "first"
        assert provider.complete("anything") == "second"

    def test_unscripted_prompt(self):
        provider = mock_provider([{"contains": "never matches", "response": "x"}])
        with pytest.raises(UnscriptedPrompt):
            provider.complete("unrelated prompt")

    def test_hash_rule(self):
        import hashlib

        digest = hashlib.sha256(b"exact prompt").hexdigest()
        provider = mock_provider([{"prompt_sha256": digest, "response": "hit"}])
        assert provider.complete("exact prompt") == "hit"
        with pytest.raises(UnscriptedPrompt):
            provider.complete("exact prompt ")

    def test_multi_substring_all_required(self):
        provider = mock_provider([
            {"contains": ["alpha", "beta"], "response": "both"},
            {"contains": ["alpha"], "response": "one"},
        ])
        assert provider.complete("has alpha and beta") == "both"
        assert provider.complete("has alpha only") == "one"

    def test_object_response_serialized(self):
        provider = mock_provider([{"contains": "q", "response": {"relevant": True, "rationale": "r"}}])
        out = provider.complete("q")
        assert '"relevant": true' in out


class TestExtractJson:
    def test_fenced_block(self):
        text = 'Sure!\n```json\n{"relevant": true, "rationale": "matches"}\n```\nHope that helps.'
        assert extract_json_object(text) == {"relevant": True, "rationale": "matches"}

    def test_bare_object_with_prose(self):
        text = 'The verdict is {"relevant": false, "rationale": "remote only"} overall.'
        assert extract_json_object(text)["relevant"] is False

    def test_no_object(self):
        assert extract_json_object("yes it is relevant") is None

    def test_first_object_wins(self):
        text = '{"a": 1} then {"b": 2}'
        assert extract_json_object(text) == {"a": 1}


class TestParseStructured:
    def test_well_formed_verdict(self):
        parsed = parse_structured(
            '```json\n{"relevant": true, "rationale": "applies to this design"}\n```',
            "threat_verdict",
        )
        assert parsed == {"relevant": True, "rationale": "applies to this design"}

    def test_no_structured_content_after_failed_repair(self):
        with pytest.raises(NoStructuredContent):
            parse_structured(
                "yes it is relevant",
                "threat_verdict",
                repair=lambda err: "still just prose",
            )

    def test_lenient_bool_coercion(self):
        parsed = parse_structured(
            '{"relevant": "true", "rationale": "string bool accepted"}', "threat_verdict"
        )
        assert parsed["relevant"] is True
        parsed = parse_structured('{"relevant": "no", "rationale": "r"}', "threat_verdict")
        assert parsed["relevant"] is False

    def test_string_to_list_coercion(self):
        parsed = parse_structured('{"remove_query_ids": "q5"}', "redundancy_verdict")
        assert parsed == {"remove_query_ids": ["q5"], "reason": ""}
        parsed = parse_structured('{"elements": "mstatus"}', "element_list")
        assert parsed["elements"] == ["mstatus"]

    def test_schema_violation_details(self):
        with pytest.raises(SchemaViolation) as err:
            parse_structured('{"relevant": "maybe", "rationale": "r"}', "threat_verdict")
        assert "relevant" in str(err.value)

    def test_repair_round_trip_succeeds(self):
        def repair(error):
            assert "JSON" in error
            return '{"relevant": true, "rationale": "fixed"}'

        parsed = parse_structured("no json at all", "threat_verdict", repair=repair)
        assert parsed["rationale"] == "fixed"

    def test_unknown_schema(self):
        with pytest.raises(SchemaViolation):
            parse_structured("{}", "not_a_schema")


class TestChatStructured:
    def test_repair_boundedness(self):
        """At most one extra completion per parse, even on repeated garbage."""

        class Counting:
            model_name = "count"

            def __init__(self, responses):
                self.responses = list(responses)
                self.calls = 0

            def complete(self, prompt):
                self.calls += 1
                return self.responses.pop(0)

        template = PromptTemplate("t", "assess {x}")
        provider = Counting(["garbage", "more garbage"])
        with pytest.raises(NoStructuredContent):
            chat_structured(provider, template, {"x": "y"}, "threat_verdict", backoff_base=0)
        assert provider.calls == 2

        provider = Counting(["garbage", '{"relevant": false, "rationale": "after repair"}'])
        parsed = chat_structured(provider, template, {"x": "y"}, "threat_verdict", backoff_base=0)
        assert provider.calls == 2
        assert parsed["rationale"] == "after repair"

    def test_exchanges_recorded(self):
        template = PromptTemplate("t", "assess {x}")
        provider = MockProvider(
            [ScriptRule(response='{"relevant": true, "rationale": "r"}', contains=["assess"])]
        )
        seen = []
        chat_structured(
            provider, template, {"x": "y"}, "threat_verdict", backoff_base=0,
            on_exchange=seen.append,
        )
        assert len(seen) == 1
        assert seen[0].prompt == "assess y"


class TestTestCaseSchema:
    def test_tools_map_coercion(self):
        raw = {
            "test_cases": [
                {
                    "threat_category": "c",
                    "test_objective": "o",
                    "methodology": {"simulation": "m"},
                    "expected_result": {"simulation": "e"},
                    "evaluation_criteria": {"simulation": "v"},
                    "testing_tools": {"simulation": "OneTool"},
                }
            ]
        }
        import json

        parsed = parse_structured(json.dumps(raw), "test_cases")
        assert parsed["test_cases"][0]["testing_tools"] == {"simulation": ["OneTool"]}

    def test_missing_field_rejected(self):
        import json

        raw = {"test_cases": [{"threat_category": "c", "test_objective": "o"}]}
        with pytest.raises(SchemaViolation):
            parse_structured(json.dumps(raw), "test_cases")
