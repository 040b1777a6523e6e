"""Test plan generation shared by both flows.

A structured conversation first captures what the team can actually run
(modalities, tools, budget, schedule, infrastructure); generation then
prompts per upstream item — retained threat or mined policy — and validates
every emitted case against the capability snapshot. Items whose cases fail
validation get an explicit skip record: the provenance map from plan back
to upstream artifacts is total, never silent.

Each test case carries the six structured fields (threat category, test
objective, methodology, expected result, evaluation criteria, testing
tools); the objective is modality-agnostic while the other four maps are
keyed per modality, and those key sets must be identical and within the
available modalities.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from secplan import session_store as store
from secplan.errors import NoStructuredContent, SchemaViolation, UsageError
from secplan.llm import TEST_CASE_GENERATION, ChatProvider, chat_structured
from secplan.session_store import Session
from secplan.threat_agent import fold_bank, present_next_query, record_answer

log = logging.getLogger(__name__)

FORMAL = "formal_verification"
EMULATION = "emulation"
SIMULATION = "simulation"
PHYSICAL = "physical_testing"
MODALITIES = (FORMAL, EMULATION, SIMULATION, PHYSICAL)

MODALITY_LABELS = {
    FORMAL: "Formal Verification",
    EMULATION: "Emulation",
    SIMULATION: "Simulation",
    PHYSICAL: "Physical Testing",
}

_MODALITY_KEYWORDS = {
    FORMAL: ("formal",),
    EMULATION: ("emulation", "emulator", "emulate"),
    SIMULATION: ("simulation", "simulator", "simulate"),
    PHYSICAL: ("physical", "bench", "lab"),
}

CAPABILITY_BANK = "capability"

# The capability interview; c1 is mandatory, the rest may be skipped
# (blank optional answers are recorded empty and flagged).
CAPABILITY_QUESTIONS: list[dict] = [
    {
        "query_id": "c1",
        "text": "Which verification modalities are available to the team: formal verification, "
        "emulation, simulation, physical testing? List all that apply.",
        "optional": False,
    },
    {
        "query_id": "c2",
        "text": "Which tools are available, per modality? Answer like: "
        "formal verification: ToolA; simulation: ToolB, ToolC.",
        "optional": True,
    },
    {
        "query_id": "c3",
        "text": "What budget constraints apply to security verification work?",
        "optional": True,
    },
    {
        "query_id": "c4",
        "text": "How much schedule time is allocated for security verification?",
        "optional": True,
    },
    {
        "query_id": "c5",
        "text": "Describe the lab and compute infrastructure available for testing.",
        "optional": True,
    },
]

_GUIDANCE_PATH = Path(__file__).parent / "assets" / "methodology_guidance.txt"


def default_guidance() -> str:
    return _GUIDANCE_PATH.read_text(encoding="utf-8")


@dataclass(frozen=True)
class VerificationCapabilities:
    modalities_available: tuple[str, ...]
    tools: dict[str, list[str]]
    budget_note: str = ""
    time_allocation: str = ""
    infrastructure_notes: str = ""
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "modalities_available": list(self.modalities_available),
            "tools": {m: list(ts) for m, ts in sorted(self.tools.items())},
            "budget_note": self.budget_note,
            "time_allocation": self.time_allocation,
            "infrastructure_notes": self.infrastructure_notes,
            "flags": list(self.flags),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "VerificationCapabilities":
        return cls(
            modalities_available=tuple(raw["modalities_available"]),
            tools={m: list(ts) for m, ts in raw.get("tools", {}).items()},
            budget_note=raw.get("budget_note", ""),
            time_allocation=raw.get("time_allocation", ""),
            infrastructure_notes=raw.get("infrastructure_notes", ""),
            flags=tuple(raw.get("flags", [])),
        )


@dataclass(frozen=True, eq=True)
class TestCase:
    __test__ = False  # domain type, not a pytest class

    case_id: str
    threat_category: str
    test_objective: str
    methodology: dict[str, str]
    expected_result: dict[str, str]
    evaluation_criteria: dict[str, str]
    testing_tools: dict[str, list[str]]
    provenance: str

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "threat_category": self.threat_category,
            "test_objective": self.test_objective,
            "methodology": dict(sorted(self.methodology.items())),
            "expected_result": dict(sorted(self.expected_result.items())),
            "evaluation_criteria": dict(sorted(self.evaluation_criteria.items())),
            "testing_tools": {m: list(ts) for m, ts in sorted(self.testing_tools.items())},
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "TestCase":
        return cls(
            case_id=raw["case_id"],
            threat_category=raw["threat_category"],
            test_objective=raw["test_objective"],
            methodology=dict(raw["methodology"]),
            expected_result=dict(raw["expected_result"]),
            evaluation_criteria=dict(raw["evaluation_criteria"]),
            testing_tools={m: list(ts) for m, ts in raw["testing_tools"].items()},
            provenance=raw["provenance"],
        )


@dataclass(frozen=True, eq=True)
class TestPlan:
    __test__ = False  # domain type, not a pytest class

    plan_id: str
    flow: str
    cases: tuple[TestCase, ...]
    capability_snapshot: VerificationCapabilities
    skipped: tuple[tuple[str, str], ...]  # (provenance, reason)
    model: str
    template_version: str

    def to_dict(self) -> dict:
        return {
            "format": "test-plan/1",
            "plan_id": self.plan_id,
            "flow": self.flow,
            "metadata": {"model": self.model, "template_version": self.template_version},
            "capabilities": self.capability_snapshot.to_dict(),
            "cases": [c.to_dict() for c in self.cases],
            "skipped": [{"provenance": p, "reason": r} for p, r in self.skipped],
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "TestPlan":
        return cls(
            plan_id=raw["plan_id"],
            flow=raw["flow"],
            cases=tuple(TestCase.from_dict(c) for c in raw["cases"]),
            capability_snapshot=VerificationCapabilities.from_dict(raw["capabilities"]),
            skipped=tuple((s["provenance"], s["reason"]) for s in raw["skipped"]),
            model=raw["metadata"]["model"],
            template_version=raw["metadata"]["template_version"],
        )


@dataclass(frozen=True)
class PlanItem:
    """One in-scope upstream artifact item to cover."""

    provenance: str
    kind: str  # "security threat" | "security policy"
    summary: str


# ------------------------------------------------------------------
# Capability gathering
# ------------------------------------------------------------------


def modalities_in(text: str) -> list[str]:
    lowered = text.lower()
    return [m for m in MODALITIES if any(kw in lowered for kw in _MODALITY_KEYWORDS[m])]


def parse_capabilities(answers: dict[str, str]) -> VerificationCapabilities:
    """Turn the capability interview answers into the structured record.

    Tools named for an unavailable modality are dropped with a warning;
    unanswered optional questions leave their field empty and flagged.
    """
    flags: list[str] = []
    modalities = tuple(m for m in MODALITIES if m in modalities_in(answers.get("c1", "")))
    if not modalities:
        flags.append("no recognizable modality in capability answers")

    tools: dict[str, list[str]] = {}
    tools_answer = answers.get("c2", "").strip()
    if tools_answer:
        for segment in tools_answer.split(";"):
            prefix, sep, tool_text = segment.partition(":")
            if not sep:
                continue
            matched = modalities_in(prefix)
            if not matched:
                flags.append(f"unrecognized modality in tool segment {segment.strip()!r}")
                continue
            modality = matched[0]
            names = [t.strip() for t in tool_text.split(",") if t.strip()]
            if modality not in modalities:
                log.warning("tools %s dropped: modality %s not available", names, modality)
                flags.append(f"dropped tools for unavailable modality {modality}")
                continue
            bucket = tools.setdefault(modality, [])
            for name in names:
                if name not in bucket:
                    bucket.append(name)
    else:
        flags.append("no tool inventory provided")

    for qid, label in (("c3", "budget"), ("c4", "time allocation"), ("c5", "infrastructure")):
        if not answers.get(qid, "").strip():
            flags.append(f"{label} not provided")

    return VerificationCapabilities(
        modalities_available=modalities,
        tools=tools,
        budget_note=answers.get("c3", "").strip(),
        time_allocation=answers.get("c4", "").strip(),
        infrastructure_notes=answers.get("c5", "").strip(),
        flags=tuple(flags),
    )


def ensure_capability_bank(session: Session) -> None:
    if not fold_bank(session, CAPABILITY_BANK).initialized:
        session.append(
            store.BANK_UPDATED,
            {"bank": CAPABILITY_BANK, "action": "initialized", "queries": CAPABILITY_QUESTIONS},
        )


def gather_capabilities(session: Session, answer_source) -> VerificationCapabilities:
    """Walk the capability question set through the shared ask/answer machinery."""
    if session.phase != store.CAPABILITY_GATHERING:
        raise UsageError(
            f"session is in phase {session.phase}; capabilities are gathered after the flow artifact is final"
        )
    ensure_capability_bank(session)
    while True:
        state = fold_bank(session, CAPABILITY_BANK)
        if state.presented_id is not None:
            item = state.find(state.presented_id)
            answer = answer_source.answer_for(len(state.transcript), item)
            record_answer(session, CAPABILITY_BANK, item.query_id, answer, optional=item.optional)
            continue
        if state.active:
            present_next_query(session, CAPABILITY_BANK)
            continue
        break
    answers = {e.query_id: e.answer_text for e in fold_bank(session, CAPABILITY_BANK).transcript}
    return parse_capabilities(answers)


# ------------------------------------------------------------------
# Validation
# ------------------------------------------------------------------


def validate_test_case(case: TestCase, capabilities: VerificationCapabilities) -> list[str]:
    """Check every test-case invariant; pure, returns a violation list."""
    violations: list[str] = []
    if not case.threat_category.strip():
        violations.append("threat_category is empty")
    if not case.test_objective.strip():
        violations.append("test_objective is empty")

    maps = {
        "methodology": case.methodology,
        "expected_result": case.expected_result,
        "evaluation_criteria": case.evaluation_criteria,
        "testing_tools": case.testing_tools,
    }
    for name, mapping in maps.items():
        if not mapping:
            violations.append(f"{name} is empty")
    key_sets = {name: frozenset(mapping.keys()) for name, mapping in maps.items()}
    reference = key_sets["methodology"]
    for name, keys in key_sets.items():
        if keys != reference:
            violations.append(
                f"{name} modality keys {sorted(keys)} differ from methodology keys {sorted(reference)}"
            )
    available = set(capabilities.modalities_available)
    for key in sorted(reference):
        if key not in MODALITIES:
            violations.append(f"unknown modality {key!r}")
        elif key not in available:
            violations.append(f"modality {key!r} not in available capabilities")
    for name in ("methodology", "expected_result", "evaluation_criteria"):
        for modality, text in maps[name].items():
            if not str(text).strip():
                violations.append(f"{name}[{modality}] is empty")
    for modality, tool_names in case.testing_tools.items():
        inventory = capabilities.tools.get(modality, [])
        for tool in tool_names:
            if tool not in inventory:
                violations.append(
                    f"tool {tool!r} for {modality} is not in the capability inventory"
                )
    if not case.provenance.strip():
        violations.append("provenance is empty")
    return violations


# ------------------------------------------------------------------
# Generation
# ------------------------------------------------------------------


def _render_capabilities(capabilities: VerificationCapabilities) -> str:
    lines = ["Modalities: " + (", ".join(capabilities.modalities_available) or "(none)")]
    if capabilities.tools:
        tool_bits = [
            f"{m}: {', '.join(ts)}" for m, ts in sorted(capabilities.tools.items())
        ]
        lines.append("Tools: " + "; ".join(tool_bits))
    else:
        lines.append("Tools: (none listed)")
    if capabilities.budget_note:
        lines.append("Budget: " + capabilities.budget_note)
    if capabilities.time_allocation:
        lines.append("Time allocation: " + capabilities.time_allocation)
    if capabilities.infrastructure_notes:
        lines.append("Infrastructure: " + capabilities.infrastructure_notes)
    return "\n".join(lines)


def _plan_id(flow: str, cases: list[TestCase], capabilities: VerificationCapabilities) -> str:
    canon = json.dumps(
        {"flow": flow, "cases": [c.to_dict() for c in cases], "caps": capabilities.to_dict()},
        sort_keys=True,
    )
    return "plan-" + hashlib.sha256(canon.encode("utf-8")).hexdigest()[:12]


def generate_test_plan(
    items: list[PlanItem],
    capabilities: VerificationCapabilities,
    provider: ChatProvider,
    flow: str,
    model_name: str,
    template_version: str,
    guidance: str | None = None,
    max_retries: int = 2,
    backoff_base: float = 0.5,
    on_exchange=None,
) -> TestPlan:
    """Generate one-or-more validated cases per in-scope item.

    Items are processed sorted by provenance id so plan assembly is
    deterministic. An item whose every case fails validation (or whose
    verdict cannot be parsed after repair) becomes a skip record.
    """
    guidance = guidance if guidance is not None else default_guidance()
    caps_text = _render_capabilities(capabilities)
    cases: list[TestCase] = []
    skipped: list[tuple[str, str]] = []

    for item in sorted(items, key=lambda i: i.provenance):
        bindings = {
            "item_kind": item.kind,
            "item_summary": item.summary,
            "capabilities": caps_text,
            "guidance": guidance,
        }
        try:
            verdict = chat_structured(
                provider,
                TEST_CASE_GENERATION,
                bindings,
                "test_cases",
                max_retries=max_retries,
                backoff_base=backoff_base,
                on_exchange=on_exchange,
            )
        except (SchemaViolation, NoStructuredContent) as err:
            log.warning("test case generation for %s failed: %s", item.provenance, err.message)
            skipped.append((item.provenance, f"generation unparseable: {err.message}"))
            continue
        item_cases: list[TestCase] = []
        item_violations: list[str] = []
        for i, raw in enumerate(verdict["test_cases"], start=1):
            case = TestCase(
                case_id=f"case-{item.provenance}-{i:02d}",
                threat_category=raw["threat_category"],
                test_objective=raw["test_objective"],
                methodology=raw["methodology"],
                expected_result=raw["expected_result"],
                evaluation_criteria=raw["evaluation_criteria"],
                testing_tools=raw["testing_tools"],
                provenance=item.provenance,
            )
            violations = validate_test_case(case, capabilities)
            if violations:
                log.warning("case %s rejected: %s", case.case_id, "; ".join(violations))
                item_violations.extend(f"{case.case_id}: {v}" for v in violations)
            else:
                item_cases.append(case)
        if item_cases:
            cases.extend(item_cases)
        else:
            reason = "; ".join(item_violations) or "provider emitted zero test cases"
            skipped.append((item.provenance, reason))

    return TestPlan(
        plan_id=_plan_id(flow, cases, capabilities),
        flow=flow,
        cases=tuple(cases),
        capability_snapshot=capabilities,
        skipped=tuple(skipped),
        model=model_name,
        template_version=template_version,
    )


# ------------------------------------------------------------------
# Export
# ------------------------------------------------------------------


def export_plan(plan: TestPlan, fmt: str) -> bytes:
    """Render a plan as canonical JSON or as a markdown report.

    The structured export round-trips losslessly through ``parse_plan``;
    the markdown mirrors the per-case section layout with one heading per
    structured field and per-modality subsections.
    """
    if fmt in ("structured_json", "json"):
        return (
            json.dumps(plan.to_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"
        ).encode("utf-8")
    if fmt in ("markdown_report", "markdown", "md"):
        return _render_markdown(plan).encode("utf-8")
    raise UsageError(f"unknown export format {fmt!r}")


def parse_plan(data: bytes) -> TestPlan:
    return TestPlan.from_dict(json.loads(data.decode("utf-8")))


def _modality_lines(mapping: dict, render) -> list[str]:
    lines = []
    for modality in MODALITIES:
        if modality in mapping:
            lines.append(f"- *{MODALITY_LABELS[modality]}:* {render(mapping[modality])}")
    for modality in sorted(set(mapping) - set(MODALITIES)):
        lines.append(f"- *{modality}:* {render(mapping[modality])}")
    return lines


def _render_markdown(plan: TestPlan) -> str:
    out: list[str] = []
    out.append("# Security Test Plan")
    out.append("")
    out.append(f"Plan: `{plan.plan_id}` | Flow: {plan.flow} | Cases: {len(plan.cases)}")
    out.append("")
    out.append("## Verification Capabilities")
    out.append("")
    caps = plan.capability_snapshot
    out.append(
        "Available modalities: "
        + (", ".join(MODALITY_LABELS[m] for m in caps.modalities_available) or "(none)")
    )
    if caps.tools:
        out.append("")
        out.extend(_modality_lines(caps.tools, lambda ts: ", ".join(ts)))
    out.append("")
    if not plan.cases:
        out.append("*This plan contains no test cases.*")
        out.append("")
    for case in plan.cases:
        out.append(f"## Test Case `{case.case_id}`")
        out.append("")
        out.append(f"**Threat Category:** {case.threat_category}")
        out.append("")
        out.append(f"**Test Objective:** {case.test_objective}")
        out.append("")
        out.append("**Test Methodology:**")
        out.extend(_modality_lines(case.methodology, str))
        out.append("")
        out.append("**Expected Result:**")
        out.extend(_modality_lines(case.expected_result, str))
        out.append("")
        out.append("**Evaluation Criteria:**")
        out.extend(_modality_lines(case.evaluation_criteria, str))
        out.append("")
        out.append("**Testing Tool:**")
        out.extend(_modality_lines(case.testing_tools, lambda ts: ", ".join(ts) or "(none)"))
        out.append("")
        out.append(f"*Derived from: `{case.provenance}`*")
        out.append("")
    if plan.skipped:
        out.append("## Skipped Items")
        out.append("")
        for provenance, reason in plan.skipped:
            out.append(f"- `{provenance}`: {reason}")
        out.append("")
    return "\n".join(out)
