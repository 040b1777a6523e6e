import { afterEach, describe, expect, it, vi } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";

interface Recorded {
  url: string;
  method: string;
  body?: string;
}

function stubFetch(status: number, payload: unknown): Recorded[] {
  const calls: Recorded[] = [];
  vi.stubGlobal(
    "fetch",
    vi.fn(async (url: string, init?: RequestInit) => {
      calls.push({ url, method: init?.method ?? "GET", body: init?.body as string | undefined });
      const bytes =
        payload instanceof Uint8Array
          ? payload
          : new TextEncoder().encode(JSON.stringify(payload));
      return {
        ok: status >= 200 && status < 300,
        status,
        json: async () => JSON.parse(new TextDecoder().decode(bytes)),
        arrayBuffer: async () =>
          bytes.buffer.slice(bytes.byteOffset, bytes.byteOffset + bytes.byteLength),
        text: async () => new TextDecoder().decode(bytes),
      } as Response;
    }),
  );
  return calls;
}

afterEach(() => vi.unstubAllGlobals());

describe("api client", () => {
  it("posts answers to the documented route", async () => {
    const calls = stubFetch(200, { bank: "threat", recorded: "q1", queries_removed: [] });
    const client = new ApiClient("http://svc");
    const result = await client.submitAnswer("s1", "q1", "remote racks only");
    expect(result.recorded).toBe("q1");
    expect(calls[0].url).toBe("http://svc/sessions/s1/answers");
    expect(calls[0].method).toBe("POST");
    expect(JSON.parse(calls[0].body!)).toEqual({ query_id: "q1", answer: "remote racks only" });
  });

  it("maps error bodies onto ApiError with the machine code", async () => {
    stubFetch(409, { code: "not_presented", message: "no query presented" });
    const client = new ApiClient("http://svc");
    const err = await client.submitAnswer("s1", "q1", "x").catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.code).toBe("not_presented");
    expect(err.status).toBe(409);
  });

  it("returns export bytes untouched", async () => {
    const body = new TextEncoder().encode('{"format": "test-plan/1"}\n');
    stubFetch(200, body);
    const client = new ApiClient("http://svc");
    const bytes = await client.exportArtifact("s1", "plan", "json");
    expect(Array.from(bytes)).toEqual(Array.from(body));
  });

  it("builds query-string for artifact format", async () => {
    const calls = stubFetch(200, new Uint8Array([123, 125]));
    const client = new ApiClient("");
    await client.exportArtifact("s9", "plan", "markdown");
    expect(calls[0].url).toBe("/sessions/s9/artifacts/plan?format=markdown");
  });
});
