/**
 * Session state machine and the optimistic submission queue.
 *
 * Phases move strictly forward: start -> scoring (pair by pair) ->
 * complete -> consensus. The machine only ever submits the pair at the
 * local cursor, so no path can skip an unscored pair.
 *
 * Submissions are optimistic: a network failure queues the submission
 * (with its already-assigned submission id) and advances locally; flush()
 * retries in order and the server deduplicates by submission id, so a
 * retry that raced an earlier success stores nothing twice. Later
 * submissions join a non-empty queue instead of jumping ahead, keeping
 * the server's in-order contract intact. HTTP errors are never queued -
 * the server rejected the content, retrying the same bytes cannot help.
 */

import {
  ApiError,
  type CategoryScores,
  type ConsensusReport,
  type PairView,
  type ReviewApi,
  type ScoreSubmission,
  type SessionView,
} from "./api.js";

export type Phase = "start" | "scoring" | "complete" | "consensus";

export interface SubmitResult {
  /** True when the server acknowledged; false when queued for retry. */
  acknowledged: boolean;
  queued: boolean;
}

function defaultIdGen(): string {
  const bytes = new Uint8Array(8);
  crypto.getRandomValues(bytes);
  return Array.from(bytes, (b) => b.toString(16).padStart(2, "0")).join("");
}

export class SessionMachine {
  phase: Phase = "start";
  session: SessionView | null = null;
  cursor = 0;
  consensusReport: ConsensusReport | null = null;
  private queue: ScoreSubmission[] = [];

  constructor(
    private readonly api: ReviewApi,
    private readonly idGen: () => string = defaultIdGen,
  ) {}

  async start(
    reader: string,
    assay: string,
    stain: string,
    seed = 0,
  ): Promise<SessionView> {
    if (this.phase !== "start") {
      throw new Error(`cannot start from phase ${this.phase}`);
    }
    const session = await this.api.createSession({ reader, assay, stain, seed });
    this.session = session;
    this.cursor = session.cursor;
    this.phase = session.cursor >= session.n_pairs ? "complete" : "scoring";
    return session;
  }

  currentPair(): PairView | null {
    if (!this.session || this.phase !== "scoring") return null;
    return this.session.pairs[this.cursor] ?? null;
  }

  pendingCount(): number {
    return this.queue.length;
  }

  /**
   * Submit scores for the current pair. Advances the cursor either on a
   * server ack or on a network failure (optimistically, after queueing).
   *
   * The server accepts pairs strictly in order, so while anything is
   * queued nothing may be sent live: first try to drain the queue, and
   * if that fails append the new submission behind it.
   */
  async submit(
    left: CategoryScores,
    right: CategoryScores,
  ): Promise<SubmitResult> {
    const pair = this.currentPair();
    if (!pair || !this.session) {
      throw new Error("no pair awaiting scores");
    }
    const submission: ScoreSubmission = {
      submission_id: this.idGen(),
      pair: pair.pair,
      left,
      right,
      submitted_at: new Date().toISOString(),
    };
    if (this.queue.length > 0) {
      await this.flush();
    }
    if (this.queue.length > 0) {
      this.queue.push(submission);
      this.advance();
      return { acknowledged: false, queued: true };
    }
    try {
      await this.api.submitScores(this.session.session_id, submission);
    } catch (err) {
      if (err instanceof ApiError) throw err; // server said no; not retryable
      this.queue.push(submission);
      this.advance();
      return { acknowledged: false, queued: true };
    }
    this.advance();
    return { acknowledged: true, queued: false };
  }

  private advance(): void {
    if (!this.session) return;
    this.cursor += 1;
    if (this.cursor >= this.session.n_pairs) {
      this.phase = "complete";
    }
  }

  /**
   * Replay queued submissions in order. Items stay queued on further
   * network failures; duplicate acks drain them like first-time acks.
   */
  async flush(): Promise<number> {
    if (!this.session) return 0;
    let delivered = 0;
    while (this.queue.length > 0) {
      const item = this.queue[0];
      try {
        await this.api.submitScores(this.session.session_id, item);
      } catch (err) {
        if (err instanceof ApiError) throw err;
        break; // still offline; keep the queue intact
      }
      this.queue.shift();
      delivered += 1;
    }
    return delivered;
  }

  async loadConsensus(category = "strong_moderate"): Promise<ConsensusReport> {
    if (this.phase !== "complete" && this.phase !== "consensus") {
      throw new Error("consensus is only reachable after every pair is scored");
    }
    if (this.queue.length > 0) {
      throw new Error("flush queued submissions before viewing consensus");
    }
    const report = await this.api.consensus(category);
    this.consensusReport = report;
    this.phase = "consensus";
    return report;
  }
}
