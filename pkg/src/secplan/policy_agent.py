"""Software-exploitable vulnerability policy mining (Flow 2).

Three steps over two corpora: extract the registers and instructions the
design actually uses from the spec corpus (deduplicated by a normalized
name key), retrieve the architecture-manual passages that govern each
element, and classify those passages into security policies with risk tags
drawn from a closed vocabulary.

A policy is "unique" by the hash of its normalized statement; duplicates
emitted from different passages merge their provenance instead of
inflating the count.
"""

from __future__ import annotations

import hashlib
import logging
import re
from dataclasses import dataclass, field

from secplan import session_store as store
from secplan.corpus import Corpus, DocumentKind
from secplan.errors import (
    EmptyIsaIndex,
    EmptySpecIndex,
    NoStructuredContent,
    SchemaViolation,
    UsageError,
)
from secplan.llm import ELEMENT_EXTRACTION, POLICY_CLASSIFICATION, ChatProvider, chat_structured
from secplan.retrieval import RetrievalHit, VectorIndex, embed_text
from secplan.session_store import Session

log = logging.getLogger(__name__)

REGISTER = "register"
INSTRUCTION = "instruction"
ELEMENT_KINDS = (REGISTER, INSTRUCTION)

# Retrieval-mode queries for Step 1 (exhaustive mode sweeps every chunk).
EXTRACTION_QUERIES = {
    REGISTER: "registers control and status registers CSR fields defined used by the design",
    INSTRUCTION: "instructions opcodes operations executed implemented by the design",
}

RISK_TAGS = {
    "privilege_escalation",
    "access_control",
    "memory_corruption",
    "unauthorized_access",
    "microarchitectural_side_channel",
    "integrity",
    "availability",
    "confidentiality",
}

# Free-text risks are mapped onto the closed vocabulary; unmappable tags are
# dropped with a warning rather than widening the set.
_RISK_SYNONYMS = {
    "access_control_weakness": "access_control",
    "access_control_weaknesses": "access_control",
    "access_control_violation": "access_control",
    "access_control_violations": "access_control",
    "side_channel": "microarchitectural_side_channel",
    "side_channels": "microarchitectural_side_channel",
    "side_channel_attack": "microarchitectural_side_channel",
    "microarchitectural_side_channels": "microarchitectural_side_channel",
    "information_disclosure": "confidentiality",
    "information_leakage": "confidentiality",
    "data_leakage": "confidentiality",
    "integrity_violation": "integrity",
    "integrity_violations": "integrity",
    "availability_violation": "availability",
    "denial_of_service": "availability",
    "unauthorised_access": "unauthorized_access",
    "privilege_escalations": "privilege_escalation",
}


def canonical_risk_tag(raw: str) -> str | None:
    key = re.sub(r"[\s\-/]+", "_", raw.strip().lower())
    if key in RISK_TAGS:
        return key
    return _RISK_SYNONYMS.get(key)


def normalize_statement(statement: str) -> str:
    """Collapse whitespace and guarantee a terminal period."""
    normalized = " ".join(statement.split())
    if normalized and not normalized.endswith("."):
        normalized += "."
    return normalized


def policy_id_for(statement: str) -> str:
    return "pol-" + hashlib.sha256(normalize_statement(statement).encode("utf-8")).hexdigest()[:16]


def norm_key_for(name: str) -> str:
    return " ".join(name.split()).lower()


@dataclass(frozen=True)
class DesignElement:
    kind: str
    name: str
    norm_key: str
    source_refs: tuple[str, ...]

    @property
    def ref(self) -> str:
        return f"{self.kind}:{self.norm_key}"


@dataclass(frozen=True)
class RawPolicySnippet:
    element: DesignElement
    text: str
    hits: tuple[RetrievalHit, ...]


@dataclass(frozen=True)
class SecurityPolicy:
    policy_id: str
    statement: str
    security_relevance: str
    risk_tags: tuple[str, ...]
    related_elements: tuple[str, ...]
    source_refs: tuple[str, ...]


@dataclass
class MiningReport:
    elements: list[DesignElement] = field(default_factory=list)
    policies: list[SecurityPolicy] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    batches_attempted: int = 0
    batches_failed: int = 0

    @property
    def degraded(self) -> bool:
        return self.batches_attempted > 0 and self.batches_failed == self.batches_attempted


def dedup_elements(elements: list[DesignElement]) -> list[DesignElement]:
    """Merge duplicate mentions by (kind, norm_key); idempotent fixpoint."""
    merged: dict[tuple[str, str], DesignElement] = {}
    for element in elements:
        key = (element.kind, element.norm_key)
        existing = merged.get(key)
        if existing is None:
            merged[key] = element
        else:
            refs = tuple(sorted(set(existing.source_refs) | set(element.source_refs)))
            merged[key] = DesignElement(existing.kind, existing.name, existing.norm_key, refs)
    return sorted(merged.values(), key=lambda e: (e.kind, e.norm_key))


# ------------------------------------------------------------------
# Step 1: design element extraction
# ------------------------------------------------------------------


def extract_design_elements(
    corpus: Corpus,
    index: VectorIndex,
    embedder,
    provider: ChatProvider,
    k: int = 8,
    mode: str = "auto",
    batch_chunks: int = 16,
    exhaustive_threshold: int = 64,
    max_retries: int = 2,
    backoff_base: float = 0.5,
    on_exchange=None,
    warnings: list[str] | None = None,
) -> list[DesignElement]:
    """Extract register and instruction names grounded in the spec corpus.

    ``mode`` selects how candidate chunks are gathered: "exhaustive" sweeps
    every design-spec chunk (default for small specs), "retrieval" takes the
    top-k chunks for a per-kind query, "auto" picks by corpus size. Names
    the model reports that do not literally occur in the prompted chunks
    are dropped: extraction is grounded, not generative.
    """
    spec_chunks = corpus.chunks_of_kind(DocumentKind.DESIGN_SPEC)
    if not spec_chunks:
        raise EmptySpecIndex("no design-spec chunks available for element extraction")
    if mode == "auto":
        mode = "exhaustive" if len(spec_chunks) <= exhaustive_threshold else "retrieval"

    collected: list[DesignElement] = []
    for kind in ELEMENT_KINDS:
        if mode == "retrieval":
            hits = index.search(
                embed_text(EXTRACTION_QUERIES[kind], embedder),
                k,
                kind_filter=DocumentKind.DESIGN_SPEC,
            )
            candidates = [corpus.chunks[h.chunk_id] for h in hits]
        else:
            candidates = spec_chunks
        for start in range(0, len(candidates), batch_chunks):
            batch = candidates[start : start + batch_chunks]
            excerpts = "\n\n".join(f"[{c.chunk_id}]\n{c.text}" for c in batch)
            try:
                verdict = chat_structured(
                    provider,
                    ELEMENT_EXTRACTION,
                    {"element_kind": kind, "excerpts": excerpts},
                    "element_list",
                    max_retries=max_retries,
                    backoff_base=backoff_base,
                    on_exchange=on_exchange,
                )
            except (SchemaViolation, NoStructuredContent) as err:
                message = f"element extraction batch skipped ({kind}, chunks {start}..): {err.message}"
                log.warning(message)
                if warnings is not None:
                    warnings.append(message)
                continue
            for name in verdict["elements"]:
                norm = norm_key_for(name)
                if not norm:
                    continue
                grounded = tuple(
                    sorted(c.chunk_id for c in batch if norm in c.text.lower())
                )
                if not grounded:
                    message = f"dropped ungrounded {kind} name {name.strip()!r}"
                    log.warning(message)
                    if warnings is not None:
                        warnings.append(message)
                    continue
                collected.append(DesignElement(kind, name.strip(), norm, grounded))
    return dedup_elements(collected)


# ------------------------------------------------------------------
# Step 2: per-element ISA policy retrieval
# ------------------------------------------------------------------


def extract_isa_policies(
    corpus: Corpus,
    index: VectorIndex,
    embedder,
    elements: list[DesignElement],
    k: int = 8,
    warnings: list[str] | None = None,
) -> list[RawPolicySnippet]:
    """Retrieve the manual passages governing each extracted element.

    Top-k alone always returns something, so hits are kept only when the
    passage actually names the element: a passage that never mentions it is
    not "related" no matter its cosine score. An element with no grounded
    passages (a custom CSR, say) yields zero snippets and a coverage warning.
    """
    if not elements:
        raise UsageError("element list is empty; run element extraction first")
    if not corpus.chunks_of_kind(DocumentKind.ISA_MANUAL):
        raise EmptyIsaIndex("no ISA-manual chunks available for policy retrieval")
    snippets: list[RawPolicySnippet] = []
    for element in sorted(elements, key=lambda e: (e.kind, e.norm_key)):
        query = f"policies, exceptions, access rules concerning {element.norm_key}"
        ranked = index.search(embed_text(query, embedder), k, kind_filter=DocumentKind.ISA_MANUAL)
        hits = [h for h in ranked if element.norm_key in corpus.chunks[h.chunk_id].text.lower()]
        if not hits:
            message = f"no ISA passages mention {element.ref}; element uncovered"
            log.warning(message)
            if warnings is not None:
                warnings.append(message)
            continue
        text = "\n\n".join(corpus.chunks[h.chunk_id].text for h in hits)
        snippets.append(RawPolicySnippet(element=element, text=text, hits=tuple(hits)))
    return snippets


# ------------------------------------------------------------------
# Step 3: risk classification
# ------------------------------------------------------------------


def classify_policies(
    snippets: list[RawPolicySnippet],
    provider: ChatProvider,
    max_retries: int = 2,
    backoff_base: float = 0.5,
    on_exchange=None,
    warnings: list[str] | None = None,
    report: MiningReport | None = None,
) -> list[SecurityPolicy]:
    """Classify retrieved passages into deduplicated security policies.

    One prompt per snippet; a batch whose verdict cannot be parsed is
    skipped and flagged. Emitted records are normalized, risk-tagged from
    the closed vocabulary (a record with no mappable tag is dropped), and
    merged by policy id with provenance unioned.
    """
    if not snippets:
        raise UsageError("no snippets to classify")
    merged: dict[str, SecurityPolicy] = {}
    for snippet in snippets:
        if report is not None:
            report.batches_attempted += 1
        bindings = {
            "element_name": snippet.element.name,
            "element_kind": snippet.element.kind,
            "passages": snippet.text,
        }
        try:
            verdict = chat_structured(
                provider,
                POLICY_CLASSIFICATION,
                bindings,
                "policy_records",
                max_retries=max_retries,
                backoff_base=backoff_base,
                on_exchange=on_exchange,
            )
        except (SchemaViolation, NoStructuredContent) as err:
            message = f"classification batch for {snippet.element.ref} skipped: {err.message}"
            log.warning(message)
            if warnings is not None:
                warnings.append(message)
            if report is not None:
                report.batches_failed += 1
            continue
        for record in verdict["policies"]:
            statement = normalize_statement(record["statement"])
            tags = []
            for raw_tag in record["risk_tags"]:
                tag = canonical_risk_tag(raw_tag)
                if tag is None:
                    message = f"dropped unknown risk tag {raw_tag!r} on {statement[:60]!r}"
                    log.warning(message)
                    if warnings is not None:
                        warnings.append(message)
                elif tag not in tags:
                    tags.append(tag)
            if not tags:
                message = f"dropped policy with no mappable risk tags: {statement[:80]!r}"
                log.warning(message)
                if warnings is not None:
                    warnings.append(message)
                continue
            pid = policy_id_for(statement)
            source_refs = set(h.chunk_id for h in snippet.hits)
            existing = merged.get(pid)
            if existing is None:
                merged[pid] = SecurityPolicy(
                    policy_id=pid,
                    statement=statement,
                    security_relevance=record["security_relevance"],
                    risk_tags=tuple(sorted(tags)),
                    related_elements=(snippet.element.ref,),
                    source_refs=tuple(sorted(source_refs)),
                )
            else:
                merged[pid] = SecurityPolicy(
                    policy_id=pid,
                    statement=existing.statement,
                    security_relevance=existing.security_relevance,
                    risk_tags=tuple(sorted(set(existing.risk_tags) | set(tags))),
                    related_elements=tuple(
                        sorted(set(existing.related_elements) | {snippet.element.ref})
                    ),
                    source_refs=tuple(sorted(set(existing.source_refs) | source_refs)),
                )
    return sorted(merged.values(), key=lambda p: p.policy_id)


# ------------------------------------------------------------------
# The Flow 2 agent
# ------------------------------------------------------------------


class PolicyFlow:
    """Runs Steps 1-3 inside a software-exploitable session."""

    def __init__(
        self,
        session: Session,
        corpus: Corpus,
        index: VectorIndex,
        embedder,
        provider: ChatProvider,
        k: int = 8,
        extraction_mode: str = "auto",
        batch_chunks: int = 16,
        max_retries: int = 2,
        backoff_base: float = 0.5,
    ):
        if session.flow != store.FLOW_SOFTWARE:
            raise UsageError(f"session {session.session_id} is not a {store.FLOW_SOFTWARE} session")
        self.session = session
        self.corpus = corpus
        self.index = index
        self.embedder = embedder
        self.provider = provider
        self.k = k
        self.extraction_mode = extraction_mode
        self.batch_chunks = batch_chunks
        self.max_retries = max_retries
        self.backoff_base = backoff_base

    def _record_exchange(self, template_id: str):
        def on_exchange(exchange):
            self.session.append(
                store.LLM_EXCHANGE,
                {
                    "template_id": template_id,
                    "prompt": exchange.prompt,
                    "response": exchange.response,
                    "provider": exchange.provider,
                    "attempt": exchange.attempt,
                    "latency": exchange.latency,
                },
            )

        return on_exchange

    def run(self, template_version: str) -> dict:
        """Execute Steps 1-3 and persist the policy list artifact.

        Re-running after a crash repeats the mining step from the top;
        all steps are deterministic given the same corpus and provider
        script, so the resulting artifact is identical.
        """
        report = MiningReport()
        self.session.set_phase(store.POLICY_MINING)
        report.elements = extract_design_elements(
            self.corpus,
            self.index,
            self.embedder,
            self.provider,
            k=self.k,
            mode=self.extraction_mode,
            batch_chunks=self.batch_chunks,
            max_retries=self.max_retries,
            backoff_base=self.backoff_base,
            on_exchange=self._record_exchange("element_extraction"),
            warnings=report.warnings,
        )
        if report.elements:
            snippets = extract_isa_policies(
                self.corpus,
                self.index,
                self.embedder,
                report.elements,
                k=self.k,
                warnings=report.warnings,
            )
        else:
            snippets = []
            report.warnings.append("no design elements extracted; nothing to classify")
        if snippets:
            report.policies = classify_policies(
                snippets,
                self.provider,
                max_retries=self.max_retries,
                backoff_base=self.backoff_base,
                on_exchange=self._record_exchange("policy_classification"),
                warnings=report.warnings,
                report=report,
            )
        for policy in report.policies:
            self.session.append(
                store.POLICY_EMITTED,
                {
                    "policy_id": policy.policy_id,
                    "statement": policy.statement,
                    "security_relevance": policy.security_relevance,
                    "risk_tags": list(policy.risk_tags),
                    "related_elements": list(policy.related_elements),
                    "source_refs": list(policy.source_refs),
                },
            )
        artifact = build_policy_list(
            self.corpus, report, self.provider.model_name, template_version
        )
        self.session.write_artifact("policy_list.json", store.canonical_json_bytes(artifact))
        if report.degraded:
            log.warning("policy mining degraded: every classification batch failed")
            self.session.set_phase(store.DEGRADED, reason="all classification batches failed")
        else:
            self.session.set_phase(store.CAPABILITY_GATHERING)
        return artifact


# ------------------------------------------------------------------
# Artifact export
# ------------------------------------------------------------------


def build_policy_list(
    corpus: Corpus, report: MiningReport, model_name: str, template_version: str
) -> dict:
    """Assemble the exportable policy list; deterministic bytes, full provenance."""
    by_tag: dict[str, int] = {}
    for policy in report.policies:
        for tag in policy.risk_tags:
            by_tag[tag] = by_tag.get(tag, 0) + 1
    by_kind: dict[str, int] = {}
    for element in report.elements:
        by_kind[element.kind] = by_kind.get(element.kind, 0) + 1
    return {
        "format": "security-policy-list/1",
        "flow": store.FLOW_SOFTWARE,
        "metadata": {
            "corpus_docs": sorted(
                (
                    {"doc_id": d.doc_id, "kind": d.kind.value, "title": d.title}
                    for d in corpus.documents.values()
                ),
                key=lambda d: d["doc_id"],
            ),
            "model": model_name,
            "template_version": template_version,
        },
        "summary": {
            "total_policies": len(report.policies),
            "by_risk_tag": by_tag,
            "elements_total": len(report.elements),
            "elements_by_kind": by_kind,
        },
        "elements": [
            {
                "kind": e.kind,
                "name": e.name,
                "norm_key": e.norm_key,
                "source_refs": list(e.source_refs),
            }
            for e in report.elements
        ],
        "policies": [
            {
                "policy_id": p.policy_id,
                "statement": p.statement,
                "security_relevance": p.security_relevance,
                "risk_tags": list(p.risk_tags),
                "related_elements": list(p.related_elements),
                "source_refs": list(p.source_refs),
            }
            for p in report.policies
        ],
        "degraded": report.degraded,
        "warnings": report.warnings,
    }
