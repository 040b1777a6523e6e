"""Engine facade: configuration, providers, and flow orchestration.

Everything the CLI and HTTP service do goes through this module, which is
what keeps the two surfaces artifact-identical: both build the same Engine
from the same config file and call the same methods.

Configuration is one JSON file (see docs/formats.md). Documents live in the
session event log; corpus, chunks, index, and evidence are derived state,
recomputed deterministically from the log on load.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from secplan import session_store as store
from secplan.corpus import Corpus, DocumentKind, SourceDocument, ingest_document
from secplan.errors import MissingArtifact, NotPresented, UsageError
from secplan.llm import (
    TEMPLATE_VERSION,
    HttpChatProvider,
    HttpEmbeddingProvider,
    MockProvider,
    ProviderConfig,
    mock_provider,
)
from secplan.policy_agent import (
    MiningReport,
    PolicyFlow,
    build_policy_list,
    classify_policies,
    extract_design_elements,
    extract_isa_policies,
)
from secplan.retrieval import HashEmbeddingProvider, VectorIndex, build_index
from secplan.session_store import Session, SessionStore, canonical_json_bytes
from secplan.testplan_agent import (
    CAPABILITY_BANK,
    PlanItem,
    TestPlan,
    default_guidance,
    export_plan,
    gather_capabilities,
    generate_test_plan,
    parse_capabilities,
    parse_plan,
)
from secplan.threat_agent import (
    ThreatCategory,
    ThreatFlow,
    build_threat_list,
    fold_bank,
    fold_flow1,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EngineConfig:
    provider_mode: str = "mock"  # mock | http
    provider_script: str | None = None
    endpoint: str = ""
    model_name: str = "mock"
    api_key_ref: str = "SECPLAN_API_KEY"
    timeout: float = 30.0
    max_retries: int = 2
    temperature: float = 0.0
    backoff_base: float = 0.5
    embedding_mode: str = "hash"  # hash | http
    embedding_dim: int = 256
    embedding_model: str = ""
    chunk_size: int = 1600
    overlap: int = 200
    k: int = 8
    reassess_retained: bool = True
    assess_workers: int = 1
    extraction_mode: str = "auto"
    batch_chunks: int = 16
    query_bank: tuple[tuple[str, str], ...] | None = None
    catalog: tuple[ThreatCategory, ...] | None = None
    category_queries: dict[str, str] = field(default_factory=dict)
    guidance_path: str | None = None

    def provider_config(self) -> ProviderConfig:
        return ProviderConfig(
            endpoint=self.endpoint,
            model_name=self.model_name,
            api_key_ref=self.api_key_ref,
            timeout=self.timeout,
            max_retries=self.max_retries,
            temperature=self.temperature,
            backoff_base=self.backoff_base,
        )


def load_config(path: str | Path | None) -> EngineConfig:
    """Load engine config from a JSON file; absent file means all defaults.

    Relative provider-script and guidance paths resolve against the config
    file's directory.
    """
    if path is None:
        return EngineConfig()
    path = Path(path)
    raw = json.loads(path.read_text(encoding="utf-8"))
    base = path.parent

    def resolve(p):
        return str((base / p).resolve()) if p and not Path(p).is_absolute() else p

    provider = raw.get("provider", {})
    embedding = raw.get("embedding", {})
    chunking = raw.get("chunking", {})
    retrieval = raw.get("retrieval", {})
    threat = raw.get("threat", {})
    policy = raw.get("policy", {})
    plan = raw.get("plan", {})

    query_bank = None
    if "query_bank" in threat:
        query_bank = tuple((q["query_id"], q["text"]) for q in threat["query_bank"])
    catalog = None
    if "catalog" in threat:
        catalog = tuple(
            ThreatCategory(c["category_id"], c["label"], c["description"])
            for c in threat["catalog"]
        )

    return EngineConfig(
        provider_mode=provider.get("mode", "mock"),
        provider_script=resolve(provider.get("script")),
        endpoint=provider.get("endpoint", ""),
        model_name=provider.get("model", "mock"),
        api_key_ref=provider.get("api_key_env", "SECPLAN_API_KEY"),
        timeout=float(provider.get("timeout", 30.0)),
        max_retries=int(provider.get("max_retries", 2)),
        temperature=float(provider.get("temperature", 0.0)),
        backoff_base=float(provider.get("backoff_base", 0.5)),
        embedding_mode=embedding.get("mode", "hash"),
        embedding_dim=int(embedding.get("dim", 256)),
        embedding_model=embedding.get("model", ""),
        chunk_size=int(chunking.get("chunk_size", 1600)),
        overlap=int(chunking.get("overlap", 200)),
        k=int(retrieval.get("k", 8)),
        reassess_retained=bool(threat.get("reassess_retained", True)),
        assess_workers=int(threat.get("assess_workers", 1)),
        extraction_mode=policy.get("extraction_mode", "auto"),
        batch_chunks=int(policy.get("batch_chunks", 16)),
        query_bank=query_bank,
        catalog=catalog,
        category_queries=dict(threat.get("category_queries", {})),
        guidance_path=resolve(plan.get("guidance_path")),
    )


class Engine:
    """One configured engine over one session store root."""

    def __init__(self, root: str | Path, config: EngineConfig | None = None):
        self.store = SessionStore(root)
        self.config = config or EngineConfig()
        self._provider = None
        self._embedder = None

    # -- providers -------------------------------------------------------

    def provider(self):
        if self._provider is None:
            if self.config.provider_mode == "mock":
                if self.config.provider_script:
                    self._provider = mock_provider(
                        self.config.provider_script, model_name=self.config.model_name
                    )
                else:
                    self._provider = MockProvider([], model_name=self.config.model_name)
            elif self.config.provider_mode == "http":
                self._provider = HttpChatProvider(self.config.provider_config())
            else:
                raise UsageError(f"unknown provider mode {self.config.provider_mode!r}")
        return self._provider

    def embedder(self):
        if self._embedder is None:
            if self.config.embedding_mode == "hash":
                self._embedder = HashEmbeddingProvider(dim=self.config.embedding_dim)
            elif self.config.embedding_mode == "http":
                self._embedder = HttpEmbeddingProvider(
                    self.config.provider_config(), dim=self.config.embedding_dim
                )
            else:
                raise UsageError(f"unknown embedding mode {self.config.embedding_mode!r}")
        return self._embedder

    def guidance(self) -> str:
        if self.config.guidance_path:
            return Path(self.config.guidance_path).read_text(encoding="utf-8")
        return default_guidance()

    # -- sessions ----------------------------------------------------------

    def create_session(self, flow: str) -> Session:
        return self.store.create_session(flow)

    def load_session(self, session_id: str) -> Session:
        return self.store.load_session(session_id)

    # -- documents ---------------------------------------------------------

    def ingest(self, session: Session, data: bytes | str, kind: str, title: str) -> SourceDocument:
        """Normalize and record one document; identical content is a no-op."""
        doc = ingest_document(data, DocumentKind(kind), title)
        already = {
            e.payload["doc_id"] for e in session.events_of_kind(store.DOCUMENT_INGESTED)
        }
        if doc.doc_id not in already:
            session.append(
                store.DOCUMENT_INGESTED,
                {
                    "doc_id": doc.doc_id,
                    "kind": doc.kind.value,
                    "title": doc.title,
                    "body": doc.body,
                    "byte_length": doc.byte_length,
                },
            )
        return doc

    def corpus_for(self, session: Session) -> Corpus:
        """Rebuild the corpus from ingestion events (derived state)."""
        corpus = Corpus(chunk_size=self.config.chunk_size, overlap=self.config.overlap)
        for event in session.events_of_kind(store.DOCUMENT_INGESTED):
            p = event.payload
            corpus.add(
                SourceDocument(
                    doc_id=p["doc_id"],
                    kind=DocumentKind(p["kind"]),
                    title=p["title"],
                    body=p["body"],
                    byte_length=p["byte_length"],
                )
            )
        return corpus

    def index_for(self, session: Session, corpus: Corpus | None = None) -> VectorIndex:
        corpus = corpus or self.corpus_for(session)
        return build_index(corpus, self.embedder())

    def build_index_artifact(self, session: Session) -> tuple[Path, int]:
        """Materialize the session's index file (artifacts/index.json)."""
        corpus = self.corpus_for(session)
        index = self.index_for(session, corpus)
        session.artifacts_dir.mkdir(parents=True, exist_ok=True)
        path = session.artifacts_dir / "index.json"
        index.save(path)
        return path, len(index)

    # -- flows ---------------------------------------------------------------

    def threat_flow(self, session: Session, corpus: Corpus | None = None) -> ThreatFlow:
        corpus = corpus or self.corpus_for(session)
        return ThreatFlow(
            session=session,
            corpus=corpus,
            index=self.index_for(session, corpus),
            embedder=self.embedder(),
            provider=self.provider(),
            catalog=list(self.config.catalog) if self.config.catalog else None,
            query_bank=list(self.config.query_bank) if self.config.query_bank else None,
            category_queries=self.config.category_queries or None,
            k=self.config.k,
            max_retries=self.config.max_retries,
            backoff_base=self.config.backoff_base,
            reassess_retained=self.config.reassess_retained,
            assess_workers=self.config.assess_workers,
            template_version=TEMPLATE_VERSION,
        )

    def run_flow1(self, session: Session, answer_source) -> dict:
        flow = self.threat_flow(session)
        flow.run(answer_source)
        return json.loads(self.export(session, "threats", "json"))

    def policy_flow(self, session: Session, corpus: Corpus | None = None) -> PolicyFlow:
        corpus = corpus or self.corpus_for(session)
        return PolicyFlow(
            session=session,
            corpus=corpus,
            index=self.index_for(session, corpus),
            embedder=self.embedder(),
            provider=self.provider(),
            k=self.config.k,
            extraction_mode=self.config.extraction_mode,
            batch_chunks=self.config.batch_chunks,
            max_retries=self.config.max_retries,
            backoff_base=self.config.backoff_base,
        )

    def run_flow2(self, session: Session) -> dict:
        existing = session.read_artifact("policy_list.json")
        if session.phase not in (store.SETUP, store.POLICY_MINING) and existing is not None:
            return json.loads(existing)
        if session.phase in store.TERMINAL_PHASES:
            if existing is not None:
                return json.loads(existing)
            raise MissingArtifact(f"session is {session.phase} and has no policy list")
        return self.policy_flow(session).run(TEMPLATE_VERSION)

    # -- stepwise interview (CLI `session ask/answer`, HTTP query endpoints) ----

    def ask(self, session: Session) -> dict:
        """Present the next question from whichever bank is live.

        Returns {"bank": ..., "query": QueryItem | None}; a None query means
        the live bank is exhausted (for the threat bank this also finalizes
        the threat list and enters capability gathering).
        """
        from secplan.testplan_agent import ensure_capability_bank
        from secplan.threat_agent import THREAT_BANK, present_next_query

        if session.flow == store.FLOW_PHYSICAL and session.phase in (
            store.SETUP,
            store.KNOWLEDGE_EXTRACTION,
            store.INTERROGATION,
            store.ASSESSMENT,
        ):
            flow = self.threat_flow(session)
            state = fold_flow1(session)
            if state.bank.presented_id is not None:
                return {"bank": THREAT_BANK, "query": state.bank.find(state.bank.presented_id)}
            if state.refine_rounds < len(state.transcript):
                raise UsageError(
                    "the last answer has not been assessed yet; submit it via the answer "
                    "machinery or resume the headless run"
                )
            query = flow.next_query()
            if query is not None:
                return {"bank": THREAT_BANK, "query": query}
            flow.finalize()
        if session.flow == store.FLOW_SOFTWARE and session.phase in (
            store.SETUP,
            store.POLICY_MINING,
        ):
            raise UsageError("run the policy mining flow before capability gathering")
        if session.phase == store.CAPABILITY_GATHERING:
            bank_state = fold_bank(session, CAPABILITY_BANK)
            if bank_state.presented_id is not None:
                return {"bank": CAPABILITY_BANK, "query": bank_state.find(bank_state.presented_id)}
            ensure_capability_bank(session)
            return {"bank": CAPABILITY_BANK, "query": present_next_query(session, CAPABILITY_BANK)}
        return {"bank": None, "query": None}

    def pending(self, session: Session) -> dict | None:
        """Non-mutating view of the currently presented question, if any."""
        from secplan.threat_agent import THREAT_BANK

        for bank in (THREAT_BANK, CAPABILITY_BANK):
            state = fold_bank(session, bank)
            if state.presented_id is not None:
                return {"bank": bank, "query": state.find(state.presented_id)}
        return None

    def answer(self, session: Session, query_id: str, answer_text: str) -> dict:
        """Record an answer to the pending question and run its follow-up.

        For the threat interview the follow-up is one assessment round plus
        one bank refinement; capability answers are recorded as-is.
        """
        from secplan.threat_agent import THREAT_BANK, record_answer

        threat_state = fold_bank(session, THREAT_BANK)
        if threat_state.presented_id is not None:
            flow = self.threat_flow(session)
            flow.submit_answer(query_id, answer_text)
            session.set_phase(store.ASSESSMENT)
            flow.assess_threats()
            removed = flow.refine_query_bank()
            return {"bank": THREAT_BANK, "recorded": query_id, "queries_removed": removed}
        capability_state = fold_bank(session, CAPABILITY_BANK)
        if capability_state.presented_id is not None:
            item = capability_state.find(capability_state.presented_id)
            record_answer(
                session, CAPABILITY_BANK, query_id, answer_text,
                optional=item.optional if item else False,
            )
            return {"bank": CAPABILITY_BANK, "recorded": query_id, "queries_removed": []}
        raise NotPresented("no query is currently presented in this session")

    # -- test plan -------------------------------------------------------------

    def plan_items(self, session: Session) -> list[PlanItem]:
        """In-scope upstream items: retained threats or every mined policy."""
        if session.flow == store.FLOW_PHYSICAL:
            state = fold_flow1(session)
            labels = {c.category_id: c for c in state.catalog}
            items = []
            for threat in sorted(state.threats.values(), key=lambda t: t.category_id):
                if threat.status != "retained":
                    continue
                category = labels.get(threat.category_id)
                summary_bits = [
                    f"Threat category: {category.label if category else threat.category_id}"
                ]
                if category:
                    summary_bits.append(f"Covers: {category.description}")
                if threat.rationale:
                    summary_bits.append(f"Why it applies here: {threat.rationale}")
                items.append(
                    PlanItem(
                        provenance=threat.category_id,
                        kind="security threat",
                        summary="\n".join(summary_bits),
                    )
                )
            return items
        artifact = self._policy_artifact(session)
        return [
            PlanItem(
                provenance=p["policy_id"],
                kind="security policy",
                summary=(
                    f"Policy: {p['statement']}\n"
                    f"Security relevance: {p['security_relevance']}\n"
                    f"Risk tags: {', '.join(p['risk_tags'])}"
                ),
            )
            for p in artifact["policies"]
        ]

    def generate_plan(self, session: Session, answer_source) -> TestPlan:
        """Gather capabilities (resumable Q&A) and generate the plan."""
        if session.phase == store.FINALIZED:
            return self._stored_plan(session)
        if session.phase == store.CAPABILITY_GATHERING:
            capabilities = gather_capabilities(session, answer_source)
            session.set_phase(store.PLAN_GENERATION)
        elif session.phase == store.PLAN_GENERATION:
            answers = {
                e.query_id: e.answer_text
                for e in fold_bank(session, CAPABILITY_BANK).transcript
            }
            capabilities = parse_capabilities(answers)
        else:
            raise UsageError(
                f"session is in phase {session.phase}; finish the flow before plan generation"
            )

        items = self.plan_items(session)

        def on_exchange(exchange):
            session.append(
                store.LLM_EXCHANGE,
                {
                    "template_id": "test_case_generation",
                    "prompt": exchange.prompt,
                    "response": exchange.response,
                    "provider": exchange.provider,
                    "attempt": exchange.attempt,
                    "latency": exchange.latency,
                },
            )

        plan = generate_test_plan(
            items,
            capabilities,
            self.provider(),
            flow=session.flow,
            model_name=self.provider().model_name,
            template_version=TEMPLATE_VERSION,
            guidance=self.guidance(),
            max_retries=self.config.max_retries,
            backoff_base=self.config.backoff_base,
            on_exchange=on_exchange,
        )
        session.append(store.PLAN_EMITTED, plan.to_dict())
        session.write_artifact("test_plan.json", export_plan(plan, "structured_json"))
        session.set_phase(store.FINALIZED)
        return plan

    def _stored_plan(self, session: Session) -> TestPlan:
        data = session.read_artifact("test_plan.json")
        if data is not None:
            return parse_plan(data)
        emitted = session.events_of_kind(store.PLAN_EMITTED)
        if emitted:
            return TestPlan.from_dict(emitted[-1].payload)
        raise MissingArtifact("no test plan has been generated for this session")

    # -- artifact export ---------------------------------------------------------

    def _policy_artifact(self, session: Session) -> dict:
        data = session.read_artifact("policy_list.json")
        if data is not None:
            return json.loads(data)
        if not session.events_of_kind(store.POLICY_EMITTED) and session.phase in (
            store.SETUP,
            store.POLICY_MINING,
        ):
            raise MissingArtifact("no policy list yet; run the policy mining flow first")
        # Crash window: artifact file lost but mining completed. The mining
        # steps are deterministic, so re-derive without touching the log.
        corpus = self.corpus_for(session)
        index = self.index_for(session, corpus)
        report = MiningReport()
        report.elements = extract_design_elements(
            corpus,
            index,
            self.embedder(),
            self.provider(),
            k=self.config.k,
            mode=self.config.extraction_mode,
            batch_chunks=self.config.batch_chunks,
            max_retries=self.config.max_retries,
            backoff_base=self.config.backoff_base,
            warnings=report.warnings,
        )
        snippets = (
            extract_isa_policies(
                corpus, index, self.embedder(), report.elements,
                k=self.config.k, warnings=report.warnings,
            )
            if report.elements
            else []
        )
        if snippets:
            report.policies = classify_policies(
                snippets,
                self.provider(),
                max_retries=self.config.max_retries,
                backoff_base=self.config.backoff_base,
                warnings=report.warnings,
                report=report,
            )
        return build_policy_list(corpus, report, self.provider().model_name, TEMPLATE_VERSION)

    def export(self, session: Session, artifact: str, fmt: str = "json") -> bytes:
        """Serialize an artifact; exports re-derive from state, so they are
        available even when the sibling file was never written."""
        if artifact == "threats":
            if session.flow != store.FLOW_PHYSICAL:
                raise UsageError("threat list exists only for physical/supply-chain sessions")
            if fmt not in ("json", "structured_json"):
                raise UsageError("threat list exports support only the structured format")
            doc = build_threat_list(
                session, self.corpus_for(session), self.provider().model_name, TEMPLATE_VERSION
            )
            return canonical_json_bytes(doc)
        if artifact == "policies":
            if session.flow != store.FLOW_SOFTWARE:
                raise UsageError("policy list exists only for software-exploitable sessions")
            if fmt not in ("json", "structured_json"):
                raise UsageError("policy list exports support only the structured format")
            return canonical_json_bytes(self._policy_artifact(session))
        if artifact == "plan":
            return export_plan(self._stored_plan(session), fmt)
        raise UsageError(f"unknown artifact {artifact!r}; expected threats, policies, or plan")
