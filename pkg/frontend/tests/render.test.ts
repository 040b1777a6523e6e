import { describe, expect, it } from "vitest";

import {
  escapeHtml,
  renderApp,
  renderInterview,
  renderPlan,
  renderPolicyTable,
  renderThreatBoard,
} from "../src/render.js";
import {
  applyPending,
  applyPlan,
  applyPolicies,
  applyStatus,
  applyThreats,
  initialState,
  setRiskTagFilter,
} from "../src/state.js";
import { planFixture, policyListFixture, statusFixture, threatListFixture } from "./fixtures.js";

describe("renderers", () => {
  it("escapes HTML in engineer-provided text", () => {
    expect(escapeHtml(`<script>alert("x")</script>`)).not.toContain("<script>");
  });

  it("renders the pending query with an answer box", () => {
    let state = applyStatus(initialState(), statusFixture());
    state = applyPending(state, {
      bank: "threat",
      done: false,
      query: { query_id: "q2", text: "Who has physical access?", optional: false },
    });
    const html = renderInterview(state);
    expect(html).toContain("[q2]");
    expect(html).toContain("Who has physical access?");
    expect(html).toContain('data-action="submit-answer"');
  });

  it("marks a finalized session read-only", () => {
    const state = applyStatus(initialState(), statusFixture({ phase: "finalized" }));
    expect(renderInterview(state)).toContain("answers are closed");
  });

  it("renders the golden 4/1 board split with rationales", () => {
    const state = applyThreats(initialState(), threatListFixture());
    const html = renderThreatBoard(state);
    expect(html).toContain("Retained (4)");
    expect(html).toContain("Pruned (1)");
    expect(html).toContain("invasive hardware attacks");
    expect(html).toContain("locked racks, remote access only");
  });

  it("renders the policy table respecting the risk-tag filter", () => {
    let state = applyPolicies(initialState(), policyListFixture());
    let html = renderPolicyTable(state);
    expect(html).toContain("pol-aaaa");
    expect(html).toContain("pol-bbbb");
    state = setRiskTagFilter(state, "access_control");
    html = renderPolicyTable(state);
    expect(html).toContain("pol-aaaa");
    expect(html).not.toContain("pol-bbbb");
  });

  it("renders plan cases in the structured per-modality layout", () => {
    const state = applyPlan(initialState(), planFixture());
    const html = renderPlan(state);
    for (const heading of [
      "Threat Category",
      "Test Objective",
      "Test Methodology",
      "Expected Result",
      "Evaluation Criteria",
      "Testing Tool",
    ]) {
      expect(html).toContain(heading);
    }
    expect(html).toContain("Formal Verification");
    expect(html).toContain("JasperGold");
    expect(html).toContain("Skipped items");
    expect(html).toContain('data-action="export-plan-markdown"');
  });

  it("renderApp composes every section without throwing on empty state", () => {
    expect(renderApp(initialState())).toContain("Start physical/supply-chain flow");
  });
});
