// Pure HTML-string renderers. Keeping these DOM-free makes the whole view
// layer testable in node; app.ts only mounts the strings.

import {
  filteredPolicies,
  interviewDone,
  isReadOnly,
  threatBoard,
  type ViewState,
} from "./state.js";
import type { PlanCase, ThreatRecord } from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

const MODALITY_LABELS: Record<string, string> = {
  formal_verification: "Formal Verification",
  emulation: "Emulation",
  simulation: "Simulation",
  physical_testing: "Physical Testing",
};

function modalityLabel(key: string): string {
  return MODALITY_LABELS[key] ?? key;
}

export function renderBanner(state: ViewState): string {
  const bits: string[] = [];
  if (state.error) bits.push(`<div class="toast error">${escapeHtml(state.error)}</div>`);
  if (state.notice) bits.push(`<div class="toast notice">${escapeHtml(state.notice)}</div>`);
  return bits.join("");
}

export function renderSessionBar(state: ViewState): string {
  if (!state.status) {
    return `<div class="session-bar">
      <button data-action="new-flow1">Start physical/supply-chain flow</button>
      <button data-action="new-flow2">Start software-exploitable flow</button>
      <input id="resume-id" placeholder="session id" />
      <button data-action="resume">Resume</button>
    </div>`;
  }
  const s = state.status;
  const readOnly = isReadOnly(state) ? ' <span class="pill">read-only</span>' : "";
  const busy = s.busy ? ` <span class="pill busy">running: ${escapeHtml(s.step)}</span>` : "";
  return `<div class="session-bar">
    <code>${escapeHtml(s.session_id)}</code>
    <span class="pill">${escapeHtml(s.flow)}</span>
    <span class="pill phase">${escapeHtml(s.phase)}</span>${readOnly}${busy}
  </div>`;
}

export function renderInterview(state: ViewState): string {
  if (!state.status) return "";
  if (isReadOnly(state)) {
    return `<section class="interview"><h2>Interview</h2>
      <p class="muted">Session is ${escapeHtml(state.status.phase)}; answers are closed.</p>
    </section>`;
  }
  const pending = state.pending?.query ?? null;
  if (pending) {
    return `<section class="interview"><h2>Interview</h2>
      <p class="query"><strong>[${escapeHtml(pending.query_id)}]</strong> ${escapeHtml(pending.text)}</p>
      <textarea id="answer-box" rows="3" placeholder="Answer as the verification engineer${
        pending.optional ? " (optional: may be left blank)" : ""
      }"></textarea>
      <button data-action="submit-answer" data-query="${escapeHtml(pending.query_id)}">Submit answer</button>
    </section>`;
  }
  if (state.status.flow === "physical_supply_chain" && !interviewDone(state)) {
    const label = state.status.phase === "setup" ? "Start interview" : "Next question";
    return `<section class="interview"><h2>Interview</h2>
      <button data-action="ask">${label}</button>
    </section>`;
  }
  if (state.status.phase === "capability_gathering") {
    return `<section class="interview"><h2>Capabilities</h2>
      <button data-action="ask">Next capability question</button>
      <button data-action="generate-plan">Generate test plan</button>
    </section>`;
  }
  return "";
}

function threatCard(threat: ThreatRecord): string {
  const flag = threat.parse_failed ? ' <span class="pill busy">verdict unparsed</span>' : "";
  const rationale = threat.rationale
    ? `<details><summary>rationale</summary><p>${escapeHtml(threat.rationale)}</p></details>`
    : "";
  return `<div class="card threat-${threat.status}" title="${escapeHtml(threat.rationale)}">
    <strong>${escapeHtml(threat.label)}</strong>${flag}
    ${rationale}
  </div>`;
}

export function renderThreatBoard(state: ViewState): string {
  if (!state.threats) return "";
  const board = threatBoard(state.threats);
  const column = (title: string, items: ThreatRecord[]) =>
    `<div class="column"><h3>${title} (${items.length})</h3>${items.map(threatCard).join("")}</div>`;
  const candidates = board.candidates.length
    ? column("Unresolved", board.candidates)
    : "";
  return `<section class="board"><h2>Threat board</h2>
    <div class="columns">
      ${column("Retained", board.retained)}
      ${column("Pruned", board.pruned)}
      ${candidates}
    </div>
  </section>`;
}

export function renderTranscript(state: ViewState): string {
  const entries = state.transcript?.threat ?? [];
  if (!entries.length) return "";
  const rows = entries
    .map(
      (entry) => `<tr>
        <td><code>${escapeHtml(entry.query_id)}</code></td>
        <td>${escapeHtml(entry.query)}</td>
        <td>${escapeHtml(entry.answer)}</td>
      </tr>`,
    )
    .join("");
  return `<section class="transcript"><h2>Transcript</h2>
    <table><thead><tr><th></th><th>Question</th><th>Answer</th></tr></thead>
    <tbody>${rows}</tbody></table>
  </section>`;
}

export function renderPolicyTable(state: ViewState): string {
  if (!state.policies) return "";
  const tags = Object.keys(state.policies.summary.by_risk_tag).sort();
  const options = ['<option value="">all risk tags</option>']
    .concat(
      tags.map(
        (tag) =>
          `<option value="${escapeHtml(tag)}"${
            state.riskTagFilter === tag ? " selected" : ""
          }>${escapeHtml(tag)}</option>`,
      ),
    )
    .join("");
  const rows = filteredPolicies(state)
    .map(
      (policy) => `<tr>
        <td><code>${escapeHtml(policy.policy_id)}</code></td>
        <td>${escapeHtml(policy.statement)}</td>
        <td>${policy.risk_tags.map((t) => `<span class="pill">${escapeHtml(t)}</span>`).join(" ")}</td>
        <td>${policy.related_elements.map(escapeHtml).join(", ")}</td>
      </tr>`,
    )
    .join("");
  const degraded = state.policies.degraded
    ? '<p class="toast error">Mining degraded: no classification batch succeeded.</p>'
    : "";
  return `<section class="policies"><h2>Security policies (${state.policies.summary.total_policies})</h2>
    ${degraded}
    <select id="risk-filter" data-action="filter-risk">${options}</select>
    <table><thead><tr><th>id</th><th>Statement</th><th>Risk tags</th><th>Elements</th></tr></thead>
    <tbody>${rows}</tbody></table>
  </section>`;
}

function modalityList(map: Record<string, string>): string {
  return Object.keys(map)
    .sort()
    .map((m) => `<li><em>${modalityLabel(m)}:</em> ${escapeHtml(map[m])}</li>`)
    .join("");
}

function planCase(testCase: PlanCase): string {
  const tools = Object.keys(testCase.testing_tools)
    .sort()
    .map(
      (m) =>
        `<li><em>${modalityLabel(m)}:</em> ${testCase.testing_tools[m].map(escapeHtml).join(", ")}</li>`,
    )
    .join("");
  return `<article class="case">
    <h3><code>${escapeHtml(testCase.case_id)}</code></h3>
    <p><strong>Threat Category:</strong> ${escapeHtml(testCase.threat_category)}</p>
    <p><strong>Test Objective:</strong> ${escapeHtml(testCase.test_objective)}</p>
    <p><strong>Test Methodology:</strong></p><ul>${modalityList(testCase.methodology)}</ul>
    <p><strong>Expected Result:</strong></p><ul>${modalityList(testCase.expected_result)}</ul>
    <p><strong>Evaluation Criteria:</strong></p><ul>${modalityList(testCase.evaluation_criteria)}</ul>
    <p><strong>Testing Tool:</strong></p><ul>${tools}</ul>
    <p class="muted">Derived from <code>${escapeHtml(testCase.provenance)}</code></p>
  </article>`;
}

export function renderPlan(state: ViewState): string {
  if (!state.plan) {
    if (state.status?.has_plan) return "";
    return "";
  }
  const plan = state.plan;
  const cases = plan.cases.length
    ? plan.cases.map(planCase).join("")
    : '<p class="muted">This plan contains no test cases.</p>';
  const skipped = plan.skipped.length
    ? `<h3>Skipped items</h3><ul>${plan.skipped
        .map((s) => `<li><code>${escapeHtml(s.provenance)}</code>: ${escapeHtml(s.reason)}</li>`)
        .join("")}</ul>`
    : "";
  return `<section class="plan"><h2>Test plan <code>${escapeHtml(plan.plan_id)}</code></h2>
    <div class="export-bar">
      <button data-action="export-plan-json">Download JSON</button>
      <button data-action="export-plan-markdown">Download Markdown</button>
    </div>
    ${cases}
    ${skipped}
  </section>`;
}

export function renderApp(state: ViewState): string {
  return [
    renderBanner(state),
    renderSessionBar(state),
    renderInterview(state),
    renderThreatBoard(state),
    renderTranscript(state),
    renderPolicyTable(state),
    renderPlan(state),
  ].join("\n");
}
