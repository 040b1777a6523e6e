import { describe, expect, it } from "vitest";

import {
  applyPlan,
  applyPolicies,
  applyStatus,
  applyThreats,
  filteredPolicies,
  initialState,
  interviewDone,
  isReadOnly,
  setElementFilter,
  setRiskTagFilter,
  threatBoard,
  withSession,
} from "../src/state.js";
import { policyListFixture, statusFixture, threatListFixture } from "./fixtures.js";

describe("view state", () => {
  it("starts empty and adopts a session", () => {
    const fresh = initialState();
    expect(fresh.sessionId).toBeNull();
    const adopted = withSession(fresh, "s42");
    expect(adopted.sessionId).toBe("s42");
    expect(adopted.status).toBeNull();
  });

  it("splits the threat board into retained and pruned columns", () => {
    const state = applyThreats(initialState(), threatListFixture());
    const board = threatBoard(state.threats);
    expect(board.retained.map((t) => t.category_id)).toEqual([
      "fault_injection",
      "ic_cloning",
      "reverse_engineering",
      "side_channel",
    ]);
    expect(board.pruned.map((t) => t.label)).toEqual(["invasive hardware attacks"]);
    expect(board.candidates).toEqual([]);
  });

  it("filters policies by risk tag and element", () => {
    let state = applyPolicies(initialState(), policyListFixture());
    expect(filteredPolicies(state)).toHaveLength(2);
    state = setRiskTagFilter(state, "access_control");
    expect(filteredPolicies(state).map((p) => p.policy_id)).toEqual(["pol-aaaa"]);
    state = setRiskTagFilter(state, null);
    state = setElementFilter(state, "instruction:csrrw");
    expect(filteredPolicies(state).map((p) => p.policy_id)).toEqual(["pol-bbbb"]);
  });

  it("derives read-only and interview-done from the phase alone", () => {
    let state = applyStatus(initialState(), statusFixture({ phase: "interrogation" }));
    expect(isReadOnly(state)).toBe(false);
    expect(interviewDone(state)).toBe(false);
    state = applyStatus(state, statusFixture({ phase: "capability_gathering" }));
    expect(interviewDone(state)).toBe(true);
    state = applyStatus(state, statusFixture({ phase: "finalized" }));
    expect(isReadOnly(state)).toBe(true);
  });

  it("reducers never mutate the previous snapshot", () => {
    const before = applyThreats(initialState(), threatListFixture());
    const frozen = JSON.stringify(before);
    applyPlan(applyStatus(before, statusFixture()), null);
    setRiskTagFilter(before, "integrity");
    expect(JSON.stringify(before)).toBe(frozen);
  });
});
