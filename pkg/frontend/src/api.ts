// HTTP client for the listening-test backend. The server never exposes
// condition tags; stimuli arrive as opaque audio paths.

export type Protocol = "MOS" | "AB" | "XAB";

export interface Progress {
  answered: number;
  total: number;
}

export interface Trial {
  trial_id: string;
  protocol: Protocol;
  emotion_pair: string;
  stimuli: string[];
  progress: Progress;
}

export interface SessionDone {
  done: true;
  answered: number;
  total: number;
}

export type NextTrial = Trial | SessionDone;

export function isDone(next: NextTrial): next is SessionDone {
  return (next as SessionDone).done === true;
}

export type ResponseValue = number | "A" | "B";

export interface SubmitResult {
  accepted: boolean;
  duplicate: boolean;
}

const RETRY_DELAYS_MS = [250, 500, 1000, 2000];

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

export class ListenClient {
  constructor(
    private readonly baseUrl: string,
    private readonly sessionId: string,
    private readonly raterId: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  audioUrl(stimulusPath: string): string {
    return this.baseUrl + stimulusPath;
  }

  async nextTrial(): Promise<NextTrial> {
    const url = `${this.baseUrl}/sessions/${this.sessionId}/trials/next` +
      `?rater_id=${encodeURIComponent(this.raterId)}`;
    const res = await this.fetchFn(url);
    if (!res.ok) {
      const body = await res.json().catch(() => ({}));
      throw new Error(`next trial failed (${res.status}): ${body.message ?? ""}`);
    }
    return (await res.json()) as NextTrial;
  }

  // Submission is idempotent: a duplicate rejection means the response is
  // already durable on the server, so it counts as success (covers a retry
  // after a network failure or a mid-session refresh).
  async submitResponse(trialId: string, value: ResponseValue, elapsedMs: number): Promise<SubmitResult> {
    let lastError: unknown = null;
    for (let attempt = 0; attempt <= RETRY_DELAYS_MS.length; attempt++) {
      if (attempt > 0) {
        await sleep(RETRY_DELAYS_MS[attempt - 1]);
      }
      let res: Response;
      try {
        res = await this.fetchFn(`${this.baseUrl}/responses`, {
          method: "POST",
          headers: { "Content-Type": "application/json" },
          body: JSON.stringify({
            session_id: this.sessionId,
            rater_id: this.raterId,
            trial_id: trialId,
            value,
            elapsed_ms: elapsedMs,
          }),
        });
      } catch (err) {
        lastError = err; // network failure: retry
        continue;
      }
      if (res.ok) {
        return { accepted: true, duplicate: false };
      }
      if (res.status === 409) {
        return { accepted: true, duplicate: true };
      }
      const body = await res.json().catch(() => ({}));
      throw new Error(`response rejected (${res.status}): ${body.message ?? body.code ?? ""}`);
    }
    throw new Error(`submit failed after retries: ${String(lastError)}`);
  }
}
