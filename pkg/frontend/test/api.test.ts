import { describe, expect, it } from "vitest";

import { ApiError, ReviewApi, type ScoreSubmission } from "../src/api.js";

interface Call {
  url: string;
  init?: RequestInit;
}

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

/** fetch stub that records calls and replays canned responses in order. */
function stubFetch(responses: Response[]) {
  const calls: Call[] = [];
  const fn = async (url: string, init?: RequestInit): Promise<Response> => {
    calls.push({ url, init });
    const next = responses.shift();
    if (!next) throw new Error("stub ran out of responses");
    return next;
  };
  return { calls, fn };
}

const SUBMISSION: ScoreSubmission = {
  submission_id: "abc123",
  pair: 2,
  left: { no_stain: 50, weak: 30, strong_moderate: 20 },
  right: { no_stain: 40, weak: 40, strong_moderate: 20 },
};

describe("ReviewApi", () => {
  it("hits /healthz and returns the payload", async () => {
    const health = { status: "ok", n_pairs: 3, n_sessions: 0, n_open_sessions: 0 };
    const { calls, fn } = stubFetch([jsonResponse(health)]);
    const api = new ReviewApi("", fn);
    expect(await api.health()).toEqual(health);
    expect(calls[0].url).toBe("/healthz");
  });

  it("prefixes every path with the configured base", async () => {
    const { calls, fn } = stubFetch([jsonResponse({})]);
    const api = new ReviewApi("http://127.0.0.1:8000", fn);
    await api.session("s1");
    expect(calls[0].url).toBe("http://127.0.0.1:8000/sessions/s1");
  });

  it("posts session requests as JSON", async () => {
    const { calls, fn } = stubFetch([jsonResponse({ session_id: "s1" })]);
    const api = new ReviewApi("", fn);
    await api.createSession({ reader: "amy", assay: "a", stain: "Tamra" });
    const call = calls[0];
    expect(call.url).toBe("/sessions");
    expect(call.init?.method).toBe("POST");
    expect(JSON.parse(call.init?.body as string)).toEqual({
      reader: "amy",
      assay: "a",
      stain: "Tamra",
    });
  });

  it("posts score submissions to the session scores endpoint", async () => {
    const { calls, fn } = stubFetch([jsonResponse({ accepted: true })]);
    const api = new ReviewApi("", fn);
    await api.submitScores("s1", SUBMISSION);
    expect(calls[0].url).toBe("/sessions/s1/scores");
    expect(JSON.parse(calls[0].init?.body as string)).toEqual(SUBMISSION);
  });

  it("encodes the consensus category as a query parameter", async () => {
    const { calls, fn } = stubFetch([jsonResponse({ rows: [] })]);
    const api = new ReviewApi("", fn);
    await api.consensus("weak");
    expect(calls[0].url).toBe("/reports/consensus?category=weak");
  });

  it("defaults the consensus category to strong_moderate", async () => {
    const { calls, fn } = stubFetch([jsonResponse({ rows: [] })]);
    await new ReviewApi("", fn).consensus();
    expect(calls[0].url).toBe("/reports/consensus?category=strong_moderate");
  });

  it("maps non-2xx responses to ApiError with the server detail", async () => {
    const { fn } = stubFetch([
      jsonResponse({ detail: "categories must sum to 100" }, 422),
    ]);
    const api = new ReviewApi("", fn);
    const err = await api.submitScores("s1", SUBMISSION).catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(422);
    expect(err.detail).toBe("categories must sum to 100");
  });

  it("keeps structured validation detail readable", async () => {
    const { fn } = stubFetch([
      jsonResponse({ detail: [{ loc: ["body", "reader"], msg: "blank" }] }, 422),
    ]);
    const err = await new ReviewApi("", fn).session("s1").catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.detail).toContain("reader");
  });

  it("lets network failures propagate untouched", async () => {
    const boom = new TypeError("fetch failed");
    const api = new ReviewApi("", async () => {
      throw boom;
    });
    await expect(api.health()).rejects.toBe(boom);
  });

  it("returns the export log as raw text", async () => {
    const body = '{"session": "s1"}\n{"session": "s2"}\n';
    const { calls, fn } = stubFetch([new Response(body, { status: 200 })]);
    const api = new ReviewApi("", fn);
    expect(await api.exportLog()).toBe(body);
    expect(calls[0].url).toBe("/export");
  });
});
