// View state and reducers. All data derives from service responses; the
// reducers fold poll results into one immutable snapshot for rendering.

import type {
  PolicyList,
  PolicyRecord,
  QueryStep,
  SessionStatus,
  TestPlan,
  ThreatList,
  ThreatRecord,
  TranscriptView,
} from "./types.js";

export interface ViewState {
  sessionId: string | null;
  status: SessionStatus | null;
  pending: QueryStep | null;
  threats: ThreatList | null;
  policies: PolicyList | null;
  plan: TestPlan | null;
  transcript: TranscriptView | null;
  riskTagFilter: string | null;
  elementFilter: string | null;
  notice: string | null;
  error: string | null;
}

export function initialState(): ViewState {
  return {
    sessionId: null,
    status: null,
    pending: null,
    threats: null,
    policies: null,
    plan: null,
    transcript: null,
    riskTagFilter: null,
    elementFilter: null,
    notice: null,
    error: null,
  };
}

export function withSession(state: ViewState, sessionId: string): ViewState {
  return { ...initialState(), sessionId };
}

export function applyStatus(state: ViewState, status: SessionStatus): ViewState {
  return { ...state, status, error: null };
}

export function applyPending(state: ViewState, pending: QueryStep | null): ViewState {
  return { ...state, pending };
}

export function applyThreats(state: ViewState, threats: ThreatList): ViewState {
  return { ...state, threats };
}

export function applyPolicies(state: ViewState, policies: PolicyList): ViewState {
  return { ...state, policies };
}

export function applyPlan(state: ViewState, plan: TestPlan | null): ViewState {
  return { ...state, plan };
}

export function applyTranscript(state: ViewState, transcript: TranscriptView): ViewState {
  return { ...state, transcript };
}

export function applyError(state: ViewState, message: string): ViewState {
  return { ...state, error: message };
}

export function applyNotice(state: ViewState, notice: string | null): ViewState {
  return { ...state, notice };
}

export function setRiskTagFilter(state: ViewState, tag: string | null): ViewState {
  return { ...state, riskTagFilter: tag };
}

export function setElementFilter(state: ViewState, element: string | null): ViewState {
  return { ...state, elementFilter: element };
}

export interface ThreatBoard {
  retained: ThreatRecord[];
  pruned: ThreatRecord[];
  candidates: ThreatRecord[];
}

export function threatBoard(threats: ThreatList | null): ThreatBoard {
  const board: ThreatBoard = { retained: [], pruned: [], candidates: [] };
  if (!threats) return board;
  for (const threat of threats.threats) {
    if (threat.status === "retained") board.retained.push(threat);
    else if (threat.status === "pruned") board.pruned.push(threat);
    else board.candidates.push(threat);
  }
  return board;
}

export function filteredPolicies(state: ViewState): PolicyRecord[] {
  if (!state.policies) return [];
  return state.policies.policies.filter((policy) => {
    if (state.riskTagFilter && !policy.risk_tags.includes(state.riskTagFilter)) return false;
    if (state.elementFilter && !policy.related_elements.includes(state.elementFilter)) return false;
    return true;
  });
}

/** True once the session is finalized or degraded: the view goes read-only. */
export function isReadOnly(state: ViewState): boolean {
  const phase = state.status?.phase;
  return phase === "finalized" || phase === "degraded";
}

export function interviewDone(state: ViewState): boolean {
  const phase = state.status?.phase;
  return (
    phase === "capability_gathering" || phase === "plan_generation" || phase === "finalized"
  );
}
