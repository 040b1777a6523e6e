// Browser bootstrap: polling loop plus event wiring. Authoritative state
// lives server-side; reloading at any point reconstructs the identical view.

import { ApiClient, ApiError } from "./api.js";
import { renderApp } from "./render.js";
import {
  applyError,
  applyNotice,
  applyPending,
  applyPlan,
  applyPolicies,
  applyStatus,
  applyThreats,
  applyTranscript,
  initialState,
  setRiskTagFilter,
  withSession,
  type ViewState,
} from "./state.js";

const POLL_MS = Number(new URLSearchParams(location.search).get("poll") ?? "1500");

const api = new ApiClient("");
let state: ViewState = initialState();
const root = document.getElementById("app")!;

function mount(): void {
  root.innerHTML = renderApp(state);
}

function update(next: ViewState): void {
  state = next;
  mount();
}

async function sync(): Promise<void> {
  if (!state.sessionId) return;
  const id = state.sessionId;
  try {
    let next = applyStatus(state, await api.status(id));
    next = applyPending(next, await api.pendingQuery(id));
    if (next.status!.flow === "physical_supply_chain") {
      try {
        next = applyThreats(next, await api.threats(id));
      } catch (err) {
        if (!(err instanceof ApiError)) throw err;
      }
    } else {
      try {
        next = applyPolicies(next, await api.policies(id));
      } catch (err) {
        if (!(err instanceof ApiError) || err.status !== 404) throw err;
      }
    }
    if (next.status!.has_plan) {
      next = applyPlan(next, await api.plan(id));
    }
    next = applyTranscript(next, await api.transcript(id));
    update(next);
  } catch (err) {
    update(applyError(state, err instanceof Error ? err.message : String(err)));
  }
}

function download(bytes: Uint8Array, filename: string, mime: string): void {
  const blob = new Blob([bytes as BlobPart], { type: mime });
  const url = URL.createObjectURL(blob);
  const anchor = document.createElement("a");
  anchor.href = url;
  anchor.download = filename;
  anchor.click();
  URL.revokeObjectURL(url);
}

async function handleAction(action: string, target: HTMLElement): Promise<void> {
  const id = state.sessionId;
  try {
    switch (action) {
      case "new-flow1": {
        const created = await api.createSession("physical_supply_chain");
        update(withSession(state, created.session_id));
        break;
      }
      case "new-flow2": {
        const created = await api.createSession("software_exploitable");
        update(withSession(state, created.session_id));
        break;
      }
      case "resume": {
        const input = document.getElementById("resume-id") as HTMLInputElement | null;
        if (input?.value) update(withSession(state, input.value.trim()));
        break;
      }
      case "ask": {
        if (!id) return;
        const step =
          state.status?.phase === "setup" ? await api.startFlow1(id) : await api.nextQuery(id);
        update(applyPending(state, step));
        break;
      }
      case "submit-answer": {
        if (!id) return;
        const box = document.getElementById("answer-box") as HTMLTextAreaElement | null;
        const queryId = target.dataset.query!;
        await api.submitAnswer(id, queryId, box?.value ?? "");
        update(applyNotice(applyPending(state, null), "answer recorded"));
        break;
      }
      case "generate-plan": {
        if (!id) return;
        await api.runPlan(id);
        update(applyNotice(state, "plan generation started"));
        break;
      }
      case "export-plan-json": {
        if (!id) return;
        download(await api.exportArtifact(id, "plan", "json"), "test_plan.json", "application/json");
        break;
      }
      case "export-plan-markdown": {
        if (!id) return;
        download(await api.exportArtifact(id, "plan", "markdown"), "test_plan.md", "text/markdown");
        break;
      }
      case "filter-risk": {
        const select = target as unknown as HTMLSelectElement;
        update(setRiskTagFilter(state, select.value || null));
        return; // pure view change; no resync needed
      }
    }
  } catch (err) {
    // Conflicts (double submit, busy session) are non-destructive: surface
    // the code and fall through to the next poll, which re-syncs the view.
    update(applyError(state, err instanceof ApiError ? `${err.code}: ${err.message}` : String(err)));
  }
  void sync();
}

root.addEventListener("click", (event) => {
  const target = (event.target as HTMLElement).closest<HTMLElement>("[data-action]");
  if (target) void handleAction(target.dataset.action!, target);
});
root.addEventListener("change", (event) => {
  const target = event.target as HTMLElement;
  if (target.dataset.action) void handleAction(target.dataset.action, target);
});

mount();
setInterval(() => void sync(), POLL_MS);
