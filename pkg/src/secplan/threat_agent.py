"""Physical / supply-chain threat identification (Flow 1).

The agent runs a four-step iterative loop: extract attack knowledge for a
predefined threat catalog, interview the verification engineer one question
at a time, assess every live threat against the evidence plus the interview
so far, and prune interview questions that answers have made redundant. The
loop ends when the question bank is exhausted.

Two rules keep refinement monotone and terminating:

* pruning a threat is absorbing — a pruned threat is never prompted again
  and never returns to candidate or retained (retained threats stay
  revisable each iteration);
* each iteration consumes exactly one active question and refinement only
  shrinks the bank, so iterations never exceed the initial bank size.

All state lives in the session event log; every public operation folds the
log, appends events, and can therefore resume mid-loop after a crash.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

from secplan import session_store as store
from secplan.corpus import Corpus, DocumentKind
from secplan.errors import (
    EmptyAnswer,
    EmptyKnowledgeBase,
    NoStructuredContent,
    NotPresented,
    PendingAnswer,
    SchemaViolation,
    UsageError,
)
from secplan.llm import THREAT_ASSESSMENT, QUERY_REDUNDANCY, ChatProvider, chat_structured
from secplan.retrieval import VectorIndex, embed_text
from secplan.session_store import Session

log = logging.getLogger(__name__)

# Threat statuses
CANDIDATE = "candidate"
RETAINED = "retained"
PRUNED = "pruned"

# Query statuses
ACTIVE = "active"
ASKED = "asked"
REMOVED = "removed"

THREAT_BANK = "threat"


@dataclass(frozen=True)
class ThreatCategory:
    category_id: str
    label: str
    description: str


# The predefined catalog of physical attack methodologies. Editable via
# engine config; the five below are the floor, not the ceiling.
DEFAULT_CATALOG: list[ThreatCategory] = [
    ThreatCategory(
        "fault_injection",
        "fault injection",
        "Inducing computational faults through voltage or clock glitching, "
        "electromagnetic pulses, or laser injection to corrupt state, skip "
        "checks, or extract secrets from faulty outputs.",
    ),
    ThreatCategory(
        "ic_cloning",
        "IC cloning",
        "Unauthorized duplication of the integrated circuit: overproduction "
        "at the foundry, counterfeit parts, or wholesale cloning of the "
        "design for resale or substitution.",
    ),
    ThreatCategory(
        "invasive_hardware",
        "invasive hardware attacks",
        "Physically opening the package to reach the die: depackaging, "
        "microprobing of internal buses, and focused-ion-beam circuit edits "
        "that read or rewire internal signals.",
    ),
    ThreatCategory(
        "reverse_engineering",
        "reverse engineering",
        "Recovering design internals from the physical device: delayering "
        "and imaging the die, extracting the netlist, and reconstructing "
        "proprietary logic or embedded firmware.",
    ),
    ThreatCategory(
        "side_channel",
        "side-channel attacks",
        "Extracting secrets from physical emissions of normal operation: "
        "power consumption, electromagnetic radiation, or timing variation "
        "correlated with secret-dependent computation.",
    ),
]

# One retrieval query per catalog entry, used to pull evidence from the
# attack-knowledge corpus.
CATEGORY_QUERIES: dict[str, str] = {
    "fault_injection": "fault injection voltage glitching clock glitch laser electromagnetic pulse attack",
    "ic_cloning": "IC cloning counterfeit chips overproduction piracy cloned integrated circuits",
    "invasive_hardware": "invasive hardware attack microprobing focused ion beam depackaging circuit edit",
    "reverse_engineering": "reverse engineering netlist extraction delayering die imaging layout recovery",
    "side_channel": "side-channel attack power analysis electromagnetic timing leakage key extraction",
}

# Default interview bank; ships as editable configuration.
DEFAULT_QUERY_BANK: list[tuple[str, str]] = [
    ("q01", "Describe the design implementation: process node, packaging, and any third-party IP cores."),
    ("q02", "What is the application context, and what assets does the device protect?"),
    ("q03", "Describe the deployment environment: where do fielded devices physically live?"),
    ("q04", "Who can get physical access to the device once deployed, and for how long?"),
    ("q05", "Describe the supply chain: foundry, OSAT, board assembly, and distribution partners."),
    ("q06", "Are debug and test interfaces (JTAG, scan chains, UART consoles) reachable in production units?"),
    ("q07", "What are the security assumptions about operators, users, and maintainers?"),
    ("q08", "Which certifications or regulatory requirements apply to the product?"),
    ("q09", "Have related products or earlier revisions suffered known hardware attacks?"),
    ("q10", "How are firmware updates delivered and authenticated in the field?"),
]


@dataclass(frozen=True)
class QueryItem:
    query_id: str
    text: str
    status: str = ACTIVE
    removal_reason: str = ""
    optional: bool = False


@dataclass(frozen=True)
class TranscriptEntry:
    query_id: str
    query_text: str
    answer_text: str


@dataclass(frozen=True)
class EvidenceHit:
    chunk_id: str
    score: float
    text: str


@dataclass(frozen=True)
class EvidenceBundle:
    category_id: str
    query_used: str
    hits: list[EvidenceHit]

    @property
    def flagged(self) -> bool:
        return not self.hits


@dataclass(frozen=True)
class ThreatAssessment:
    category_id: str
    status: str = CANDIDATE
    rationale: str = ""
    evidence_refs: list[str] = field(default_factory=list)
    decided_at: int = 0
    parse_failed: bool = False


@dataclass
class BankState:
    """Folded view of one question bank (threat interview or capabilities)."""

    queries: list[QueryItem] = field(default_factory=list)
    presented_id: str | None = None
    transcript: list[TranscriptEntry] = field(default_factory=list)
    initialized: bool = False

    @property
    def active(self) -> list[QueryItem]:
        return [q for q in self.queries if q.status == ACTIVE]

    def find(self, query_id: str) -> QueryItem | None:
        for q in self.queries:
            if q.query_id == query_id:
                return q
        return None


def fold_bank(session: Session, bank: str) -> BankState:
    """Rebuild a question bank's state from the event log."""
    state = BankState()
    for event in session.events:
        payload = event.payload
        if payload.get("bank") != bank:
            continue
        if event.kind == store.BANK_UPDATED and payload.get("action") == "initialized":
            state.queries = [
                QueryItem(q["query_id"], q["text"], optional=q.get("optional", False))
                for q in payload["queries"]
            ]
            state.initialized = True
        elif event.kind == store.QUERY_PRESENTED:
            state.presented_id = payload["query_id"]
        elif event.kind == store.ANSWER_RECORDED:
            qid = payload["query_id"]
            item = state.find(qid)
            if item is not None:
                state.queries[state.queries.index(item)] = replace(item, status=ASKED)
                state.transcript.append(TranscriptEntry(qid, item.text, payload["answer"]))
            state.presented_id = None
        elif event.kind == store.BANK_UPDATED and payload.get("action") == "refined":
            for qid in payload.get("removed", []):
                item = state.find(qid)
                if item is not None and item.status == ACTIVE:
                    state.queries[state.queries.index(item)] = replace(
                        item, status=REMOVED, removal_reason=payload.get("reason", "")
                    )
    return state


@dataclass
class Flow1State:
    bank: BankState
    threats: dict[str, ThreatAssessment]
    catalog: list[ThreatCategory]
    refine_rounds: int

    @property
    def transcript(self) -> list[TranscriptEntry]:
        return self.bank.transcript


def fold_flow1(session: Session) -> Flow1State:
    bank = fold_bank(session, THREAT_BANK)
    catalog: list[ThreatCategory] = []
    for event in session.events_of_kind(store.BANK_UPDATED):
        if event.payload.get("bank") == THREAT_BANK and event.payload.get("action") == "initialized":
            catalog = [
                ThreatCategory(c["category_id"], c["label"], c["description"])
                for c in event.payload.get("catalog", [])
            ]
    threats = {c.category_id: ThreatAssessment(c.category_id) for c in catalog}
    refine_rounds = 0
    for event in session.events:
        if event.kind == store.THREAT_UPDATED:
            p = event.payload
            prior = threats.get(p["category_id"])
            if prior is not None and prior.status == PRUNED:
                continue  # pruned is absorbing
            threats[p["category_id"]] = ThreatAssessment(
                category_id=p["category_id"],
                status=p["status"],
                rationale=p.get("rationale", ""),
                evidence_refs=p.get("evidence_refs", []),
                decided_at=p.get("decided_at", 0),
                parse_failed=p.get("parse_failed", False),
            )
        elif (
            event.kind == store.BANK_UPDATED
            and event.payload.get("bank") == THREAT_BANK
            and event.payload.get("action") == "refined"
        ):
            refine_rounds += 1
    return Flow1State(bank=bank, threats=threats, catalog=catalog, refine_rounds=refine_rounds)


# ------------------------------------------------------------------
# Knowledge extraction (Step 1)
# ------------------------------------------------------------------


def extract_security_knowledge(
    corpus: Corpus,
    index: VectorIndex,
    embedder,
    catalog: list[ThreatCategory],
    k: int,
    category_queries: dict[str, str] | None = None,
) -> dict[str, EvidenceBundle]:
    """Retrieve per-category evidence from the attack-knowledge corpus."""
    if not catalog:
        return {}
    if not corpus.docs_of_kind(DocumentKind.ATTACK_KNOWLEDGE):
        raise EmptyKnowledgeBase("no attack-knowledge documents ingested")
    queries = dict(CATEGORY_QUERIES)
    if category_queries:
        queries.update(category_queries)
    bundles: dict[str, EvidenceBundle] = {}
    for category in catalog:
        query = queries.get(category.category_id, category.label)
        hits = index.search(
            embed_text(query, embedder), k, kind_filter=DocumentKind.ATTACK_KNOWLEDGE
        )
        bundle = EvidenceBundle(
            category_id=category.category_id,
            query_used=query,
            hits=[EvidenceHit(h.chunk_id, h.score, corpus.chunks[h.chunk_id].text) for h in hits],
        )
        if bundle.flagged:
            log.warning("no evidence retrieved for threat category %s", category.category_id)
        bundles[category.category_id] = bundle
    return bundles


# ------------------------------------------------------------------
# Interview mechanics (shared with capability gathering)
# ------------------------------------------------------------------


def present_next_query(session: Session, bank_name: str) -> QueryItem | None:
    """Present the first active query, or None when the bank is exhausted."""
    state = fold_bank(session, bank_name)
    if state.presented_id is not None:
        raise PendingAnswer(
            f"query {state.presented_id!r} is awaiting an answer; answer it before asking again"
        )
    active = state.active
    if not active:
        return None
    item = active[0]
    session.append(
        store.QUERY_PRESENTED,
        {"bank": bank_name, "query_id": item.query_id, "text": item.text},
    )
    return item


def record_answer(
    session: Session, bank_name: str, query_id: str, answer_text: str, optional: bool = False
) -> None:
    """Record an answer for the currently presented query.

    Blank answers are rejected with guidance unless the question is
    optional, in which case an empty answer is recorded (and flagged by the
    consumer).
    """
    state = fold_bank(session, bank_name)
    if state.presented_id != query_id:
        raise NotPresented(
            f"query {query_id!r} is not the currently presented query"
            + (f" (pending: {state.presented_id!r})" if state.presented_id else " (none pending)")
        )
    blank = not answer_text or not answer_text.strip()
    if blank and not optional:
        raise EmptyAnswer(
            "blank answer rejected; describe the design context in a sentence or two, "
            "or answer 'not applicable' explicitly"
        )
    session.append(
        store.ANSWER_RECORDED,
        {"bank": bank_name, "query_id": query_id, "answer": answer_text.strip()},
    )


# ------------------------------------------------------------------
# Answer sources
# ------------------------------------------------------------------


class ScriptedAnswerSource:
    """Ordered answer records for headless runs.

    File format (answers/1): JSON lines, each {"query": "<query_id>" or
    "*next", "answer": "..."}. Records are consumed in ask order; a record
    naming a query id must match the query actually presented.
    """

    def __init__(self, records: list[dict]):
        self.records = records

    @classmethod
    def from_file(cls, path) -> "ScriptedAnswerSource":
        import json
        from pathlib import Path

        records = []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            records.append(json.loads(line))
        return cls(records)

    def answer_for(self, index: int, query: QueryItem) -> str:
        if index >= len(self.records):
            raise UsageError(
                f"scripted answers exhausted: {len(self.records)} provided, "
                f"question {query.query_id!r} unanswered"
            )
        record = self.records[index]
        expected = record.get("query", "*next")
        if expected not in ("*next", query.query_id):
            raise UsageError(
                f"answer record {index} targets {expected!r} but {query.query_id!r} was presented"
            )
        return record.get("answer", "")


class InteractiveAnswerSource:
    """Prompts on stdin; used by the interactive CLI runner."""

    def answer_for(self, index: int, query: QueryItem) -> str:
        print(f"\n[{query.query_id}] {query.text}")
        return input("> ")


# ------------------------------------------------------------------
# The Flow 1 agent
# ------------------------------------------------------------------


class ThreatFlow:
    """Drives one physical/supply-chain session end to end.

    Built on a folded session plus derived retrieval state (corpus, index,
    evidence bundles are recomputed deterministically from the log, never
    persisted separately).
    """

    def __init__(
        self,
        session: Session,
        corpus: Corpus,
        index: VectorIndex,
        embedder,
        provider: ChatProvider,
        catalog: list[ThreatCategory] | None = None,
        query_bank: list[tuple[str, str]] | None = None,
        category_queries: dict[str, str] | None = None,
        k: int = 8,
        max_retries: int = 2,
        backoff_base: float = 0.5,
        reassess_retained: bool = True,
        assess_workers: int = 1,
        template_version: str = "1",
    ):
        if session.flow != store.FLOW_PHYSICAL:
            raise UsageError(f"session {session.session_id} is not a {store.FLOW_PHYSICAL} session")
        self.session = session
        self.corpus = corpus
        self.index = index
        self.embedder = embedder
        self.provider = provider
        self.catalog = sorted(catalog or DEFAULT_CATALOG, key=lambda c: c.category_id)
        self.query_bank = query_bank or DEFAULT_QUERY_BANK
        self.category_queries = category_queries
        self.k = k
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self.reassess_retained = reassess_retained
        self.assess_workers = assess_workers
        self.template_version = template_version
        self._bundles: dict[str, EvidenceBundle] | None = None

    # -- derived state -------------------------------------------------

    def state(self) -> Flow1State:
        return fold_flow1(self.session)

    def bundles(self) -> dict[str, EvidenceBundle]:
        if self._bundles is None:
            catalog = self.state().catalog or self.catalog
            self._bundles = extract_security_knowledge(
                self.corpus, self.index, self.embedder, catalog, self.k, self.category_queries
            )
        return self._bundles

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

    # -- steps ----------------------------------------------------------

    def ensure_started(self) -> None:
        """Bring a setup-phase session to the interrogation phase."""
        if self.session.phase not in (store.SETUP, store.KNOWLEDGE_EXTRACTION):
            return
        if self.session.phase == store.SETUP:
            self.session.set_phase(store.KNOWLEDGE_EXTRACTION)
        self.bundles()  # validates the knowledge base before interviewing
        if not fold_bank(self.session, THREAT_BANK).initialized:
            self.session.append(
                store.BANK_UPDATED,
                {
                    "bank": THREAT_BANK,
                    "action": "initialized",
                    "queries": [{"query_id": qid, "text": text} for qid, text in self.query_bank],
                    "catalog": [
                        {
                            "category_id": c.category_id,
                            "label": c.label,
                            "description": c.description,
                        }
                        for c in self.catalog
                    ],
                },
            )
        self.session.set_phase(store.INTERROGATION)

    def next_query(self) -> QueryItem | None:
        if self.session.phase in store.TERMINAL_PHASES or self.session.phase in (
            store.CAPABILITY_GATHERING,
            store.PLAN_GENERATION,
        ):
            raise UsageError("interrogation is already finished for this session")
        self.ensure_started()
        self.session.set_phase(store.INTERROGATION)
        return present_next_query(self.session, THREAT_BANK)

    def submit_answer(self, query_id: str, answer_text: str) -> None:
        record_answer(self.session, THREAT_BANK, query_id, answer_text)

    def _render_transcript(self, transcript: list[TranscriptEntry]) -> str:
        if not transcript:
            return "(no answers recorded yet)"
        lines = []
        for entry in transcript:
            lines.append(f"[{entry.query_id}] Q: {entry.query_text}")
            lines.append(f"    A: {entry.answer_text}")
        return "\n".join(lines)

    def _render_evidence(self, bundle: EvidenceBundle) -> str:
        if not bundle.hits:
            return "(no background passages retrieved for this threat)"
        return "\n".join(f"- [{h.chunk_id}] {h.text}" for h in bundle.hits)

    def assess_threats(self, order: list[str] | None = None) -> dict[str, ThreatAssessment]:
        """Assess every live threat against evidence plus the interview.

        Prompts are issued per threat (possibly concurrently) but results
        are merged sorted by category_id, so issue order never affects the
        event log or the final list. A threat whose verdict cannot be parsed
        stays candidate and is flagged; the run continues.
        """
        state = self.state()
        if not state.transcript:
            raise UsageError("at least one recorded answer is required before assessment")
        iteration = len(state.transcript)
        catalog = {c.category_id: c for c in (state.catalog or self.catalog)}
        targets = [
            cid
            for cid, threat in state.threats.items()
            if threat.status != PRUNED and (self.reassess_retained or threat.status == CANDIDATE)
        ]
        if order is not None:
            known = set(targets)
            targets = [cid for cid in order if cid in known]
        bundles = self.bundles()
        transcript_text = self._render_transcript(state.transcript)

        def assess_one(cid: str):
            category = catalog[cid]
            bundle = bundles.get(cid) or EvidenceBundle(cid, "", [])
            exchanges: list = []
            bindings = {
                "category_label": category.label,
                "category_description": category.description,
                "evidence": self._render_evidence(bundle),
                "transcript": transcript_text,
            }
            try:
                verdict = chat_structured(
                    self.provider,
                    THREAT_ASSESSMENT,
                    bindings,
                    "threat_verdict",
                    max_retries=self.max_retries,
                    backoff_base=self.backoff_base,
                    on_exchange=exchanges.append,
                )
                return cid, exchanges, verdict, None
            except (SchemaViolation, NoStructuredContent) as err:
                return cid, exchanges, None, err

        if self.assess_workers > 1 and len(targets) > 1:
            with ThreadPoolExecutor(max_workers=self.assess_workers) as pool:
                results = list(pool.map(assess_one, targets))
        else:
            results = [assess_one(cid) for cid in targets]

        updated: dict[str, ThreatAssessment] = {}
        for cid, exchanges, verdict, err in sorted(results, key=lambda r: r[0]):
            bundle = bundles.get(cid)
            evidence_refs = [h.chunk_id for h in bundle.hits] if bundle else []
            record_exchange = self._record_exchange("threat_assessment")
            for exchange in exchanges:
                record_exchange(exchange)
            if err is not None:
                log.warning("threat %s verdict unparseable: %s", cid, err.message)
                assessment = ThreatAssessment(
                    cid, CANDIDATE, "", evidence_refs, iteration, parse_failed=True
                )
            else:
                status = RETAINED if verdict["relevant"] else PRUNED
                assessment = ThreatAssessment(
                    cid, status, verdict["rationale"], evidence_refs, iteration
                )
            self.session.append(
                store.THREAT_UPDATED,
                {
                    "category_id": assessment.category_id,
                    "status": assessment.status,
                    "rationale": assessment.rationale,
                    "evidence_refs": assessment.evidence_refs,
                    "decided_at": assessment.decided_at,
                    "parse_failed": assessment.parse_failed,
                },
            )
            updated[cid] = assessment
        return updated

    def refine_query_bank(self) -> list[str]:
        """Remove questions that recorded answers have made redundant.

        An unparseable verdict removes nothing (safe default); unknown query
        ids in the verdict are ignored with a warning. The final active
        query is never removed while zero answers are recorded.
        """
        state = self.state()
        active = state.bank.active
        bindings = {
            "active_queries": "\n".join(f"{q.query_id}: {q.text}" for q in active) or "(none)",
            "transcript": self._render_transcript(state.transcript),
        }
        reason = ""
        try:
            verdict = chat_structured(
                self.provider,
                QUERY_REDUNDANCY,
                bindings,
                "redundancy_verdict",
                max_retries=self.max_retries,
                backoff_base=self.backoff_base,
                on_exchange=self._record_exchange("query_redundancy"),
            )
            requested = verdict["remove_query_ids"]
            reason = verdict["reason"]
        except (SchemaViolation, NoStructuredContent) as err:
            log.warning("redundancy verdict unparseable, removing nothing: %s", err.message)
            requested = []
            reason = "verdict unparseable; no removals this round"

        active_ids = {q.query_id for q in active}
        removed = []
        for qid in requested:
            if qid in active_ids and qid not in removed:
                removed.append(qid)
            else:
                log.warning("redundancy verdict names unknown or inactive query %r; ignored", qid)
        if not state.transcript and removed and len(removed) >= len(active_ids):
            kept = removed.pop()
            log.warning(
                "refusing to remove final active query %r before any answer is recorded", kept
            )
        self.session.append(
            store.BANK_UPDATED,
            {"bank": THREAT_BANK, "action": "refined", "removed": removed, "reason": reason},
        )
        return removed

    # -- loop -------------------------------------------------------------

    def run(self, answer_source) -> dict[str, ThreatAssessment]:
        """Run (or resume) the interview loop until the bank is exhausted.

        The dispatch is purely a function of folded state — pending question,
        answers recorded, refinement rounds completed — so a run killed after
        any event continues exactly where the log ends.
        """
        if self.session.phase in (
            store.CAPABILITY_GATHERING,
            store.PLAN_GENERATION,
            store.FINALIZED,
        ):
            return self.state().threats
        self.ensure_started()
        while True:
            state = self.state()
            if state.bank.presented_id is not None:
                item = state.bank.find(state.bank.presented_id)
                answer = answer_source.answer_for(len(state.transcript), item)
                self.submit_answer(item.query_id, answer)
                continue
            if state.refine_rounds < len(state.transcript):
                self.session.set_phase(store.ASSESSMENT)
                self.assess_threats()
                self.refine_query_bank()
                continue
            if state.bank.active:
                self.session.set_phase(store.INTERROGATION)
                present_next_query(self.session, THREAT_BANK)
                continue
            return self.finalize()

    def finalize(self) -> dict[str, ThreatAssessment]:
        """Persist the threat list artifact and leave the interrogation stage."""
        state = self.state()
        artifact = build_threat_list(
            self.session, self.corpus, self.provider.model_name, self.template_version
        )
        self.session.write_artifact("threat_list.json", store.canonical_json_bytes(artifact))
        if self.session.phase in (store.INTERROGATION, store.ASSESSMENT):
            self.session.set_phase(store.CAPABILITY_GATHERING)
        return state.threats


# ------------------------------------------------------------------
# Artifact export
# ------------------------------------------------------------------


def build_threat_list(session: Session, corpus: Corpus, model_name: str, template_version: str) -> dict:
    """Assemble the exportable threat list from folded session state.

    Deterministic by construction: no timestamps, no session ids, threats
    sorted by category_id. Repeating a scripted run reproduces these bytes.
    """
    state = fold_flow1(session)
    labels = {c.category_id: c.label for c in state.catalog}
    threats = [
        {
            "category_id": t.category_id,
            "label": labels.get(t.category_id, t.category_id),
            "status": t.status,
            "rationale": t.rationale,
            "evidence_refs": t.evidence_refs,
            "decided_at": t.decided_at,
            "parse_failed": t.parse_failed,
        }
        for t in sorted(state.threats.values(), key=lambda t: t.category_id)
    ]
    by_status: dict[str, int] = {}
    for t in state.threats.values():
        by_status[t.status] = by_status.get(t.status, 0) + 1
    return {
        "format": "threat-assessment-list/1",
        "flow": store.FLOW_PHYSICAL,
        "metadata": {
            # attack notes only; interview answers carry the design context
            "corpus_docs": sorted(
                (
                    {"doc_id": d.doc_id, "kind": d.kind.value, "title": d.title}
                    for d in corpus.documents.values()
                    if d.kind == DocumentKind.ATTACK_KNOWLEDGE
                ),
                key=lambda d: d["doc_id"],
            ),
            "model": model_name,
            "template_version": template_version,
        },
        "summary": {
            "iterations": len(state.transcript),
            "queries_asked": len(state.transcript),
            "queries_removed": sum(1 for q in state.bank.queries if q.status == REMOVED),
            "by_status": by_status,
        },
        "threats": threats,
        "transcript": [
            {"query_id": e.query_id, "query": e.query_text, "answer": e.answer_text}
            for e in state.transcript
        ],
    }
