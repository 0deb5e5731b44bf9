/**
 * Typed client for the review service HTTP+JSON API.
 *
 * Every method maps to one endpoint; non-2xx responses become ApiError
 * with the parsed `detail` string so callers can show the server's own
 * message. Network-level failures (fetch rejecting) propagate untouched,
 * which is how the submission queue tells "retry later" from "fix input".
 */

export interface PairView {
  pair: number;
  fov: number;
  left_url: string;
  right_url: string;
}

export interface SessionView {
  session_id: string;
  reader: string;
  assay: string;
  stain: string;
  n_pairs: number;
  cursor: number;
  status: string;
  pairs: PairView[];
}

export interface NextPair {
  done: boolean;
  pair?: PairView | null;
  index?: number | null;
  total: number;
}

export interface CategoryScores {
  no_stain: number;
  weak: number;
  strong_moderate: number;
}

export interface ScoreSubmission {
  submission_id: string;
  pair: number;
  left: CategoryScores;
  right: CategoryScores;
  submitted_at?: string | null;
}

export interface ScoreAck {
  session_id: string;
  pair: number;
  accepted: boolean;
  duplicate: boolean;
  revision: boolean;
  cursor: number;
  n_pairs: number;
  status: string;
}

export interface ConsensusRow {
  arm: string;
  stain: string;
  fov: number;
  n: number;
  median: number;
  min: number;
  max: number;
}

export interface ConsensusReport {
  category: string;
  n_sessions: number;
  n_records: number;
  rows: ConsensusRow[];
}

export interface Health {
  status: string;
  n_pairs: number;
  n_sessions: number;
  n_open_sessions: number;
}

export interface SessionRequest {
  reader: string;
  assay: string;
  stain: string;
  fovs?: number[] | null;
  seed?: number;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
    this.name = "ApiError";
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

async function parseDetail(resp: Response): Promise<string> {
  try {
    const body = await resp.json();
    if (typeof body?.detail === "string") return body.detail;
    return JSON.stringify(body?.detail ?? body);
  } catch {
    return resp.statusText || "request failed";
  }
}

export class ReviewApi {
  constructor(
    private readonly base: string = "",
    private readonly fetchFn: FetchLike = (...args) => fetch(...args),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchFn(this.base + path, init);
    if (!resp.ok) {
      throw new ApiError(resp.status, await parseDetail(resp));
    }
    return (await resp.json()) as T;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  health(): Promise<Health> {
    return this.request<Health>("/healthz");
  }

  createSession(req: SessionRequest): Promise<SessionView> {
    return this.post<SessionView>("/sessions", req);
  }

  session(id: string): Promise<SessionView> {
    return this.request<SessionView>(`/sessions/${id}`);
  }

  nextPair(id: string): Promise<NextPair> {
    return this.request<NextPair>(`/sessions/${id}/next`);
  }

  submitScores(id: string, submission: ScoreSubmission): Promise<ScoreAck> {
    return this.post<ScoreAck>(`/sessions/${id}/scores`, submission);
  }

  consensus(category = "strong_moderate"): Promise<ConsensusReport> {
    return this.request<ConsensusReport>(
      `/reports/consensus?category=${encodeURIComponent(category)}`,
    );
  }

  /** Raw blinded score log (NDJSON); safe to fetch at any time. */
  async exportLog(): Promise<string> {
    const resp = await this.fetchFn(this.base + "/export");
    if (!resp.ok) {
      throw new ApiError(resp.status, await parseDetail(resp));
    }
    return resp.text();
  }
}
