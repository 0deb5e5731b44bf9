import { describe, expect, it } from "vitest";

import {
  ApiError,
  type CategoryScores,
  type ConsensusReport,
  type ReviewApi,
  type ScoreAck,
  type ScoreSubmission,
  type SessionView,
} from "../src/api.js";
import { SessionMachine } from "../src/state.js";

const SCORES: CategoryScores = { no_stain: 50, weak: 30, strong_moderate: 20 };

function sessionView(nPairs: number): SessionView {
  return {
    session_id: "s1",
    reader: "amy",
    assay: "a",
    stain: "Tamra",
    n_pairs: nPairs,
    cursor: 0,
    status: "open",
    pairs: Array.from({ length: nPairs }, (_, i) => ({
      pair: i,
      fov: i,
      left_url: `/images/l${i}.png`,
      right_url: `/images/r${i}.png`,
    })),
  };
}

/**
 * Scriptable stand-in for the HTTP client. `failNext` simulates the
 * network dropping (fetch rejecting); `rejectNext` simulates the server
 * refusing the content.
 */
class FakeApi {
  submitted: ScoreSubmission[] = [];
  failNext = 0;
  rejectNext: ApiError | null = null;
  report: ConsensusReport = {
    category: "strong_moderate",
    n_sessions: 1,
    n_records: 2,
    rows: [],
  };

  constructor(private readonly view: SessionView) {}

  async createSession(): Promise<SessionView> {
    return this.view;
  }

  async submitScores(_id: string, sub: ScoreSubmission): Promise<ScoreAck> {
    if (this.failNext > 0) {
      this.failNext -= 1;
      throw new TypeError("fetch failed");
    }
    if (this.rejectNext) {
      const err = this.rejectNext;
      this.rejectNext = null;
      throw err;
    }
    const duplicate = this.submitted.some(
      (s) => s.submission_id === sub.submission_id,
    );
    if (!duplicate) this.submitted.push(sub);
    return {
      session_id: "s1",
      pair: sub.pair,
      accepted: !duplicate,
      duplicate,
      revision: false,
      cursor: this.submitted.length,
      n_pairs: this.view.n_pairs,
      status: "open",
    };
  }

  async consensus(): Promise<ConsensusReport> {
    return this.report;
  }

  asApi(): ReviewApi {
    return this as unknown as ReviewApi;
  }
}

async function startedMachine(nPairs = 3) {
  const fake = new FakeApi(sessionView(nPairs));
  let counter = 0;
  const machine = new SessionMachine(fake.asApi(), () => `id-${counter++}`);
  await machine.start("amy", "a", "Tamra");
  return { fake, machine };
}

describe("SessionMachine", () => {
  it("moves start -> scoring and exposes the first pair", async () => {
    const { machine } = await startedMachine();
    expect(machine.phase).toBe("scoring");
    expect(machine.currentPair()?.pair).toBe(0);
  });

  it("goes straight to complete when the study filter matches nothing", async () => {
    const { machine } = await startedMachine(0);
    expect(machine.phase).toBe("complete");
    expect(machine.currentPair()).toBeNull();
  });

  it("refuses to start twice", async () => {
    const { machine } = await startedMachine();
    await expect(machine.start("amy", "a", "Tamra")).rejects.toThrow(
      /cannot start/,
    );
  });

  it("walks every pair in order with no skips", async () => {
    const { fake, machine } = await startedMachine(3);
    while (machine.phase === "scoring") {
      await machine.submit(SCORES, SCORES);
    }
    expect(machine.phase).toBe("complete");
    expect(fake.submitted.map((s) => s.pair)).toEqual([0, 1, 2]);
  });

  it("rethrows server rejections without advancing or queueing", async () => {
    const { fake, machine } = await startedMachine();
    fake.rejectNext = new ApiError(422, "categories must sum to 100");
    await expect(machine.submit(SCORES, SCORES)).rejects.toBeInstanceOf(
      ApiError,
    );
    expect(machine.cursor).toBe(0);
    expect(machine.pendingCount()).toBe(0);
    // the same pair is still the one awaiting scores
    expect(machine.currentPair()?.pair).toBe(0);
  });

  it("queues on network failure and advances optimistically", async () => {
    const { fake, machine } = await startedMachine();
    fake.failNext = 1;
    const result = await machine.submit(SCORES, SCORES);
    expect(result).toEqual({ acknowledged: false, queued: true });
    expect(machine.currentPair()?.pair).toBe(1);
    expect(machine.pendingCount()).toBe(1);
    expect(fake.submitted).toHaveLength(0);
  });

  it("extends the queue while offline so pairs never reach the server out of order", async () => {
    const { fake, machine } = await startedMachine(3);
    // one failed live submit, then one failed drain attempt during the
    // second submit, which therefore queues without trying to go live
    fake.failNext = 2;
    await machine.submit(SCORES, SCORES);
    await machine.submit(SCORES, SCORES);
    expect(machine.pendingCount()).toBe(2);
    expect(fake.submitted).toHaveLength(0);

    expect(await machine.flush()).toBe(2);
    expect(machine.pendingCount()).toBe(0);
    expect(fake.submitted.map((s) => s.pair)).toEqual([0, 1]);
  });

  it("drains the queue before the next live submit once the network returns", async () => {
    const { fake, machine } = await startedMachine(3);
    fake.failNext = 1;
    await machine.submit(SCORES, SCORES); // queued
    const result = await machine.submit(SCORES, SCORES); // drains, then live
    expect(result).toEqual({ acknowledged: true, queued: false });
    expect(machine.pendingCount()).toBe(0);
    expect(fake.submitted.map((s) => s.pair)).toEqual([0, 1]);
  });

  it("keeps the queue intact when the flush hits the same outage", async () => {
    const { fake, machine } = await startedMachine();
    fake.failNext = 1;
    await machine.submit(SCORES, SCORES);
    fake.failNext = 1;
    expect(await machine.flush()).toBe(0);
    expect(machine.pendingCount()).toBe(1);
  });

  it("reuses the original submission id on retry, so a raced delivery dedupes", async () => {
    const { fake, machine } = await startedMachine();
    fake.failNext = 1;
    await machine.submit(SCORES, SCORES);
    // the first attempt actually reached the server before dying:
    // simulate by delivering the queued item out of band
    const queuedId = "id-0";
    await fake.submitScores("s1", {
      submission_id: queuedId,
      pair: 0,
      left: SCORES,
      right: SCORES,
    });
    await machine.flush();
    const stored = fake.submitted.filter((s) => s.submission_id === queuedId);
    expect(stored).toHaveLength(1);
    expect(machine.pendingCount()).toBe(0);
  });

  it("only reaches consensus after completion with an empty queue", async () => {
    const { fake, machine } = await startedMachine(1);
    await expect(machine.loadConsensus()).rejects.toThrow(/every pair/);

    fake.failNext = 1;
    await machine.submit(SCORES, SCORES);
    expect(machine.phase).toBe("complete");
    await expect(machine.loadConsensus()).rejects.toThrow(/flush/);

    await machine.flush();
    const report = await machine.loadConsensus();
    expect(report).toBe(fake.report);
    expect(machine.phase).toBe("consensus");
    expect(machine.consensusReport).toBe(fake.report);
  });
});
