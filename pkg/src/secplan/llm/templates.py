"""Prompt templates and rendering.

Templates are engine configuration, not claims about any particular model:
they are versioned so golden tests pin to a template version, and artifact
exports record which version produced them. Placeholders use ``{name}``
syntax and are substituted in a single pass, so placeholder-like text inside
binding values is never re-expanded.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from secplan.errors import MissingBinding, UnknownPlaceholder

TEMPLATE_VERSION = "1"

_PLACEHOLDER_RE = re.compile(r"\{([a-z_][a-z0-9_]*)\}")


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    body: str
    required_bindings: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        found = frozenset(_PLACEHOLDER_RE.findall(self.body))
        declared = self.required_bindings or found
        if not found <= declared:
            missing = sorted(found - declared)
            raise ValueError(
                f"template {self.template_id!r} uses undeclared placeholders: {missing}"
            )
        object.__setattr__(self, "required_bindings", declared)


def render_prompt(template: PromptTemplate, bindings: dict[str, str], strict: bool = True) -> str:
    """Substitute all placeholders; the output contains no placeholder syntax.

    Raises MissingBinding when a required name is absent and, in strict mode,
    UnknownPlaceholder when bindings carry names the template never uses.
    """
    for name in sorted(template.required_bindings):
        if name not in bindings:
            raise MissingBinding(f"binding {name!r} required by template {template.template_id!r}")
    if strict:
        extras = sorted(set(bindings) - set(template.required_bindings))
        if extras:
            raise UnknownPlaceholder(
                f"bindings {extras} not used by template {template.template_id!r}"
            )
    return _PLACEHOLDER_RE.sub(lambda m: str(bindings[m.group(1)]), template.body)


THREAT_ASSESSMENT = PromptTemplate(
    "threat_assessment",
    """You are assessing whether one specific hardware security threat applies to a design under evaluation.

Threat: {category_label}
What this threat covers: {category_description}

Background attack knowledge retrieved for this threat:
{evidence}

Interview with the verification engineer so far:
{transcript}

Given the engineer's answers, decide whether this threat is relevant to this design and deployment. Be decisive: if the stated context rules the threat out, say so.

Respond with exactly one JSON object, for example:
{"relevant": true, "rationale": "one or two sentences explaining the decision"}
""",
)

QUERY_REDUNDANCY = PromptTemplate(
    "query_redundancy",
    """You maintain the question bank for a hardware security interview. Questions that the engineer's answers have already covered, or that the design context has made irrelevant, should be removed so the engineer is not asked twice.

Questions not yet asked:
{active_queries}

Interview so far:
{transcript}

List the ids of questions that are now redundant or irrelevant. Remove a question only when an existing answer genuinely covers it.

Respond with exactly one JSON object, for example:
{"remove_query_ids": ["q7"], "reason": "why these are no longer needed"}
""",
)

ELEMENT_EXTRACTION = PromptTemplate(
    "element_extraction",
    """You extract hardware design elements from specification text.

Excerpts from the hardware design documentation below:
{excerpts}

List every {element_kind} name that actually appears in the excerpts above. Report names exactly as written. Do not invent names that are not present.

Respond with exactly one JSON object, for example:
{"elements": ["name1", "name2"]}
""",
)

POLICY_CLASSIFICATION = PromptTemplate(
    "policy_classification",
    """Extract the security policies stated or implied by the architecture passages below. A policy is a single testable statement of required hardware behavior under a security-relevant condition.

Design element under analysis: {element_name} ({element_kind})

Architecture manual passages:
{passages}

For each policy: state it as one testable sentence, explain its security relevance, and tag the security risks its violation would enable (for example privilege escalation, access control, memory corruption, unauthorized access, microarchitectural side channel, integrity, availability, confidentiality).

Respond with exactly one JSON object, for example:
{"policies": [{"statement": "one testable sentence", "security_relevance": "why this matters", "risk_tags": ["unauthorized_access"]}]}
""",
)

TEST_CASE_GENERATION = PromptTemplate(
    "test_case_generation",
    """Write the security test cases for one verification target.

Target ({item_kind}):
{item_summary}

Verification capabilities available to the team:
{capabilities}

Methodology guidance:
{guidance}

Produce one or more test cases. Each test case must provide: the threat category, a single test objective, and per-modality test methodology, expected result, evaluation criteria, and testing tools. Use only the modalities listed in the capabilities above, and only tools from the capability inventory.

Respond with exactly one JSON object, for example:
{"test_cases": [{"threat_category": "...", "test_objective": "...", "methodology": {"simulation": "..."}, "expected_result": {"simulation": "..."}, "evaluation_criteria": {"simulation": "..."}, "testing_tools": {"simulation": ["tool"]}}]}
""",
)

REPAIR_SUFFIX = (
    "\n\nYour previous reply could not be used: {error}\n"
    "Reply again with only one valid JSON object and nothing else."
)

TEMPLATES: dict[str, PromptTemplate] = {
    t.template_id: t
    for t in (
        THREAT_ASSESSMENT,
        QUERY_REDUNDANCY,
        ELEMENT_EXTRACTION,
        POLICY_CLASSIFICATION,
        TEST_CASE_GENERATION,
    )
}
