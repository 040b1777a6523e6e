// API payload types mirroring docs/http_api.md. The UI holds no
// authoritative state: everything below is what the service returns.

export type Flow = "physical_supply_chain" | "software_exploitable";

export type Phase =
  | "setup"
  | "knowledge_extraction"
  | "interrogation"
  | "assessment"
  | "policy_mining"
  | "capability_gathering"
  | "plan_generation"
  | "finalized"
  | "degraded";

export interface ApiErrorBody {
  code: string;
  message: string;
  details?: Record<string, unknown>;
}

export interface QueryItem {
  query_id: string;
  text: string;
  optional: boolean;
}

export interface QueryStep {
  bank: "threat" | "capability" | null;
  done: boolean;
  query: QueryItem | null;
}

export interface SessionStatus {
  session_id: string;
  flow: Flow;
  phase: Phase;
  busy: boolean;
  step: string;
  error: ApiErrorBody | null;
  events: number;
  pending: QueryStep | null;
  threats_by_status: Record<string, number>;
  transcript_length: number;
  capability_answers: number;
  has_plan: boolean;
}

export interface TranscriptEntry {
  query_id: string;
  query: string;
  answer: string;
}

export interface ThreatRecord {
  category_id: string;
  label: string;
  status: "candidate" | "retained" | "pruned";
  rationale: string;
  evidence_refs: string[];
  decided_at: number;
  parse_failed: boolean;
}

export interface ThreatList {
  format: string;
  flow: Flow;
  summary: {
    iterations: number;
    queries_asked: number;
    queries_removed: number;
    by_status: Record<string, number>;
  };
  threats: ThreatRecord[];
  transcript: TranscriptEntry[];
}

export interface PolicyRecord {
  policy_id: string;
  statement: string;
  security_relevance: string;
  risk_tags: string[];
  related_elements: string[];
  source_refs: string[];
}

export interface PolicyList {
  format: string;
  flow: Flow;
  summary: {
    total_policies: number;
    by_risk_tag: Record<string, number>;
    elements_total: number;
    elements_by_kind: Record<string, number>;
  };
  policies: PolicyRecord[];
  degraded: boolean;
  warnings: string[];
}

export interface PlanCase {
  case_id: string;
  threat_category: string;
  test_objective: string;
  methodology: Record<string, string>;
  expected_result: Record<string, string>;
  evaluation_criteria: Record<string, string>;
  testing_tools: Record<string, string[]>;
  provenance: string;
}

export interface TestPlan {
  format: string;
  plan_id: string;
  flow: Flow;
  metadata: { model: string; template_version: string };
  capabilities: {
    modalities_available: string[];
    tools: Record<string, string[]>;
    flags: string[];
  };
  cases: PlanCase[];
  skipped: { provenance: string; reason: string }[];
}

export interface AnswerResult {
  bank: "threat" | "capability";
  recorded: string;
  queries_removed: string[];
}

export interface TranscriptView {
  threat: TranscriptEntry[];
  capability: TranscriptEntry[];
}
