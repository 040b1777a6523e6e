// End-to-end against the real engine: spawn the HTTP service, drive the
// golden physical/supply-chain interview through the UI's api client and
// state reducer, watch the threat board reach the 4 retained / 1 pruned
// split, generate the plan, and byte-compare the UI's export against a
// fully separate CLI run over the same fixtures.

import { execFileSync, spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { fileURLToPath } from "node:url";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { applyThreats, initialState, threatBoard } from "../src/state.js";

const REPO_ROOT = fileURLToPath(new URL("../..", import.meta.url));
const FIXTURES = join(REPO_ROOT, "tests", "fixtures");
const PORT = 8900 + (process.pid % 500);
const BASE = `http://127.0.0.1:${PORT}`;

const ATTACK_NOTES: [string, string][] = [
  ["attack_side_channel.txt", "side-channel notes"],
  ["attack_fault_injection.txt", "fault injection notes"],
  ["attack_reverse_engineering.txt", "reverse engineering notes"],
  ["attack_ic_cloning.txt", "IC cloning notes"],
  ["attack_invasive.txt", "invasive attack notes"],
];

function fixtureAnswers(file: string): Map<string, string> {
  const map = new Map<string, string>();
  for (const line of readFileSync(join(FIXTURES, file), "utf-8").split("\n")) {
    const trimmed = line.trim();
    if (!trimmed || trimmed.startsWith("#")) continue;
    const record = JSON.parse(trimmed) as { query: string; answer: string };
    map.set(record.query, record.answer);
  }
  return map;
}

let server: ChildProcess | null = null;

async function waitForHealth(client: ApiClient, tries = 200): Promise<void> {
  for (let i = 0; i < tries; i++) {
    try {
      await client.health();
      return;
    } catch {
      await new Promise((resolve) => setTimeout(resolve, 100));
    }
  }
  throw new Error("service did not become healthy");
}

beforeAll(async () => {
  const root = mkdtempSync(join(tmpdir(), "secplan-http-"));
  server = spawn(
    "python3",
    [
      "-m", "secplan.cli",
      "--root", root,
      "--config", join(FIXTURES, "config_flow1.json"),
      "serve", "--host", "127.0.0.1", "--port", String(PORT),
    ],
    { cwd: REPO_ROOT, stdio: ["ignore", "pipe", "pipe"] },
  );
  server.stderr?.on("data", (chunk) => process.stderr.write(chunk));
  await waitForHealth(new ApiClient(BASE));
});

afterAll(() => {
  server?.kill();
});

function runCli(root: string, args: string[]): string {
  return execFileSync(
    "python3",
    ["-m", "secplan.cli", "--root", root, "--config", join(FIXTURES, "config_flow1.json"), ...args],
    { cwd: REPO_ROOT, encoding: "utf-8" },
  );
}

describe("console against the live service", () => {
  it("runs the golden interview to the 4/1 board and exports the CLI-identical plan", async () => {
    const client = new ApiClient(BASE);
    const { session_id } = await client.createSession("physical_supply_chain");

    for (const [filename, title] of ATTACK_NOTES) {
      await client.ingestDocument(session_id, {
        kind: "attack_knowledge",
        title,
        text: readFileSync(join(FIXTURES, filename), "utf-8"),
      });
    }

    const interview = fixtureAnswers("flow1_answers.jsonl");
    const capabilities = fixtureAnswers("capability_answers.jsonl");

    let step = await client.startFlow1(session_id);
    let answered = 0;
    while (step.query !== null) {
      const answers = step.bank === "capability" ? capabilities : interview;
      const answer = answers.get(step.query.query_id);
      expect(answer, `no fixture answer for ${step.query.query_id}`).toBeDefined();
      await client.submitAnswer(session_id, step.query.query_id, answer!);
      if (step.bank === "threat") answered += 1;
      step = await client.nextQuery(session_id);
    }
    expect(answered).toBe(4);

    // the threat board reaches the golden split
    const state = applyThreats(initialState(), await client.threats(session_id));
    const board = threatBoard(state.threats);
    expect(board.retained).toHaveLength(4);
    expect(board.pruned).toHaveLength(1);
    expect(board.pruned[0].label).toBe("invasive hardware attacks");
    expect(board.pruned[0].rationale.length).toBeGreaterThan(0);

    // plan generation (capability answers were given through the interview)
    await client.runPlan(session_id);
    let status = await client.status(session_id);
    const deadline = Date.now() + 30_000;
    while (status.busy && Date.now() < deadline) {
      await new Promise((resolve) => setTimeout(resolve, 100));
      status = await client.status(session_id);
    }
    expect(status.error).toBeNull();
    expect(status.phase).toBe("finalized");

    const uiJson = await client.exportArtifact(session_id, "plan", "json");
    const uiMarkdown = await client.exportArtifact(session_id, "plan", "markdown");

    // a completely separate CLI run over the same fixtures
    const cliRoot = mkdtempSync(join(tmpdir(), "secplan-cli-"));
    runCli(cliRoot, ["session", "new", "--flow", "physical_supply_chain"]);
    for (const [filename, title] of ATTACK_NOTES) {
      runCli(cliRoot, ["ingest", join(FIXTURES, filename), "--kind", "attack_knowledge", "--title", title]);
    }
    runCli(cliRoot, ["run", "flow1", "--answers", join(FIXTURES, "flow1_answers.jsonl")]);
    runCli(cliRoot, ["plan", "generate", "--answers", join(FIXTURES, "capability_answers.jsonl")]);
    const planPath = join(cliRoot, "plan.json");
    const markdownPath = join(cliRoot, "plan.md");
    runCli(cliRoot, ["export", "plan", "--format", "json", "--out", planPath]);
    runCli(cliRoot, ["export", "plan", "--format", "markdown", "--out", markdownPath]);

    expect(Buffer.from(uiJson).equals(readFileSync(planPath))).toBe(true);
    expect(Buffer.from(uiMarkdown).equals(readFileSync(markdownPath))).toBe(true);
  });

  it("reload reconstructs the identical view from service state alone", async () => {
    const client = new ApiClient(BASE);
    const { sessions } = await client.listSessions();
    expect(sessions.length).toBeGreaterThan(0);
    const sessionId = sessions[0];
    const once = applyThreats(initialState(), await client.threats(sessionId));
    const twice = applyThreats(initialState(), await client.threats(sessionId));
    expect(JSON.stringify(once)).toBe(JSON.stringify(twice));
  });
});
