// Shared payload fixtures shaped like real service responses.

import type {
  PolicyList,
  SessionStatus,
  TestPlan,
  ThreatList,
} from "../src/types.js";

export function statusFixture(overrides: Partial<SessionStatus> = {}): SessionStatus {
  return {
    session_id: "s0123abcd4567",
    flow: "physical_supply_chain",
    phase: "interrogation",
    busy: false,
    step: "",
    error: null,
    events: 12,
    pending: null,
    threats_by_status: { candidate: 5 },
    transcript_length: 0,
    capability_answers: 0,
    has_plan: false,
    ...overrides,
  };
}

export function threatListFixture(): ThreatList {
  const threat = (category_id: string, label: string, status: "retained" | "pruned") => ({
    category_id,
    label,
    status,
    rationale: status === "pruned" ? "locked racks, remote access only" : "applies here",
    evidence_refs: [`doc-x:0000`],
    decided_at: status === "pruned" ? 2 : 4,
    parse_failed: false,
  });
  return {
    format: "threat-assessment-list/1",
    flow: "physical_supply_chain",
    summary: {
      iterations: 4,
      queries_asked: 4,
      queries_removed: 2,
      by_status: { retained: 4, pruned: 1 },
    },
    threats: [
      threat("fault_injection", "fault injection", "retained"),
      threat("ic_cloning", "IC cloning", "retained"),
      threat("invasive_hardware", "invasive hardware attacks", "pruned"),
      threat("reverse_engineering", "reverse engineering", "retained"),
      threat("side_channel", "side-channel attacks", "retained"),
    ],
    transcript: [
      { query_id: "q1", query: "Describe the design implementation.", answer: "a RISC-V MCU" },
    ],
  };
}

export function policyListFixture(): PolicyList {
  return {
    format: "security-policy-list/1",
    flow: "software_exploitable",
    summary: {
      total_policies: 2,
      by_risk_tag: { unauthorized_access: 2, access_control: 1 },
      elements_total: 2,
      elements_by_kind: { register: 1, instruction: 1 },
    },
    policies: [
      {
        policy_id: "pol-aaaa",
        statement: "illegal reads raise a load access-fault exception.",
        security_relevance: "memory protection",
        risk_tags: ["unauthorized_access", "access_control"],
        related_elements: ["register:pmpcfg0"],
        source_refs: ["doc-i:0001"],
      },
      {
        policy_id: "pol-bbbb",
        statement: "non-existent CSR accesses raise an illegal instruction exception.",
        security_relevance: "processor state protection",
        risk_tags: ["unauthorized_access"],
        related_elements: ["instruction:csrrw"],
        source_refs: ["doc-i:0000"],
      },
    ],
    degraded: false,
    warnings: [],
  };
}

export function planFixture(): TestPlan {
  return {
    format: "test-plan/1",
    plan_id: "plan-fixture01",
    flow: "software_exploitable",
    metadata: { model: "mock", template_version: "1" },
    capabilities: {
      modalities_available: ["formal_verification", "simulation"],
      tools: { formal_verification: ["JasperGold"], simulation: ["Modelsim"] },
      flags: [],
    },
    cases: [
      {
        case_id: "case-pol-aaaa-01",
        threat_category: "Unauthorized Access, Memory Access",
        test_objective: "Verify the access-fault exception fires.",
        methodology: {
          formal_verification: "Prove the property.",
          simulation: "Drive violations.",
        },
        expected_result: {
          formal_verification: "Property proves.",
          simulation: "Exception observed.",
        },
        evaluation_criteria: {
          formal_verification: "Fails on counterexample.",
          simulation: "Fails on missing trap.",
        },
        testing_tools: { formal_verification: ["JasperGold"], simulation: ["Modelsim"] },
        provenance: "pol-aaaa",
      },
    ],
    skipped: [{ provenance: "pol-bbbb", reason: "generation unparseable" }],
  };
}
