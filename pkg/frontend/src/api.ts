/**
 * Typed client for the ctfkit HTTP/JSON API.
 *
 * Every UI state in this package derives from these responses and nothing
 * else; the server never includes flags or real display names in
 * player-facing payloads, and neither does anything built on this client.
 */

export interface HintSummary {
  hint_id: string;
  cost: number;
  topic_label: string;
  displayed: boolean;
}

export interface ChallengeSummary {
  challenge_id: string;
  title: string;
  category: string;
  points: number;
  solved: boolean;
  hints: HintSummary[];
}

export interface ChallengeDetail extends ChallengeSummary {
  assets: { asset_id: string; filename: string }[];
}

export interface Progress {
  solved: number;
  visible: number;
  score: number;
}

export interface ScoreboardEntry {
  rank: number;
  alias: string;
  score: number;
  last_solve_at: string | null;
}

export interface SubmitResult {
  verdict:
    | 'correct'
    | 'wrong'
    | 'rejected_locked'
    | 'rejected_closed'
    | 'rejected_already_solved';
  points: number;
}

export interface HintOffer {
  challenge_id: string;
  hint_id: string;
}

export interface LoginInfo {
  alias: string;
  role: 'player' | 'instructor';
  game: { game_id: string; title: string };
}

export interface GameEventRecord {
  seq: number;
  at: string;
  player: string;
  kind: string;
  [field: string]: unknown;
}

export interface EventFeed {
  events: GameEventRecord[];
  last_seq: number;
}

export interface Incident {
  kind: string;
  severity: 'weak' | 'strong';
  players: string[];
  challenges: string[];
  evidence: Record<string, unknown>;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly token: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private async request<T>(method: string, path: string, body?: unknown, raw?: string): Promise<T> {
    const headers: Record<string, string> = { Authorization: `Bearer ${this.token}` };
    let payload: string | undefined;
    if (raw !== undefined) {
      headers['Content-Type'] = 'text/csv';
      payload = raw;
    } else if (body !== undefined) {
      headers['Content-Type'] = 'application/json';
      payload = JSON.stringify(body);
    }
    const response = await this.fetchFn(this.baseUrl + path, { method, headers, body: payload });
    if (!response.ok) {
      let detail = response.statusText;
      try {
        detail = ((await response.json()) as { detail?: string }).detail ?? detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  // -- player face --------------------------------------------------------

  login(): Promise<LoginInfo> {
    return this.request('POST', '/api/login');
  }

  listChallenges(): Promise<{ challenges: ChallengeSummary[]; progress: Progress }> {
    return this.request('GET', '/api/challenges');
  }

  viewChallenge(challengeId: string): Promise<ChallengeDetail> {
    return this.request('GET', `/api/challenges/${challengeId}`);
  }

  submitFlag(challengeId: string, flag: string): Promise<SubmitResult> {
    return this.request('POST', `/api/challenges/${challengeId}/submit`, { flag });
  }

  displayHint(hintId: string): Promise<{ hint_id: string; body: string }> {
    return this.request('POST', `/api/hints/${hintId}/display`);
  }

  pendingOffers(): Promise<{ offers: HintOffer[] }> {
    return this.request('GET', '/api/offers');
  }

  scoreboard(): Promise<{ entries: ScoreboardEntry[] }> {
    return this.request('GET', '/api/scoreboard');
  }

  sendFeedback(challengeId: string, rating: number, comment?: string): Promise<{ accepted: boolean }> {
    return this.request('POST', `/api/challenges/${challengeId}/feedback`, { rating, comment });
  }

  // -- instructor face ----------------------------------------------------

  eventFeed(sinceSeq: number): Promise<EventFeed> {
    return this.request('GET', `/api/admin/events?since_seq=${sinceSeq}`);
  }

  incidentReport(): Promise<{ incidents: Incident[] }> {
    return this.request('GET', '/api/admin/reports/incidents');
  }

  hintReport(): Promise<{ hints: Record<string, unknown>[] }> {
    return this.request('GET', '/api/admin/reports/hints');
  }

  metricsReport(): Promise<{ metrics: Record<string, unknown>[] }> {
    return this.request('GET', '/api/admin/reports/metrics');
  }

  addHint(
    challengeId: string,
    hint: { hint_id: string; topic_label: string; body: string; cost?: number; released_at?: string },
  ): Promise<{ hint_id: string }> {
    return this.request('POST', `/api/admin/challenges/${challengeId}/hints`, hint);
  }

  uploadMarks(csv: string): Promise<{ players: number }> {
    return this.request('POST', '/api/admin/marks', undefined, csv);
  }
}
