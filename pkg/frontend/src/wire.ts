/**
 * Wire-format events and the batching queue the tracker feeds.
 *
 * Server contract: POST {endpoint} with a JSON array of
 * {"cid": int, "ts": int, "k": string, "p": object}; response {ok, n}.
 * Client event ids are monotone per page load, so the server can drop
 * duplicates when a batch is retried.
 */

export interface WireEvent {
  cid: number;
  ts: number;
  k: string;
  p: Record<string, unknown>;
}

export interface QueueOptions {
  endpoint: string;
  /** Max events per POST; a full buffer triggers an immediate flush. */
  maxBatch?: number;
  /** Base delay before a failed batch is retried. */
  retryDelayMs?: number;
  fetchFn?: typeof fetch;
}

const DEFAULT_MAX_BATCH = 50;

export class EventQueue {
  readonly endpoint: string;
  readonly maxBatch: number;
  private readonly fetchFn: typeof fetch;
  private readonly baseRetryMs: number;

  private pending: WireEvent[] = [];
  private nextCid = 1;
  private closed = false;
  private inFlight = false;
  private retryMs: number;
  private blockedUntil = 0;

  constructor(options: QueueOptions) {
    this.endpoint = options.endpoint;
    this.maxBatch = options.maxBatch ?? DEFAULT_MAX_BATCH;
    this.baseRetryMs = options.retryDelayMs ?? 1000;
    this.retryMs = this.baseRetryMs;
    this.fetchFn = options.fetchFn ?? fetch;
  }

  /** Queue one event; ids stay monotone. Returns the cid, or -1 when the
   * session is already closed (nothing may follow a close). */
  emit(kind: string, payload: Record<string, unknown>, tsMs: number): number {
    if (this.closed) {
      return -1;
    }
    const cid = this.nextCid++;
    this.pending.push({ cid, ts: Math.round(tsMs), k: kind, p: payload });
    if (kind === "close") {
      this.closed = true;
    }
    return cid;
  }

  get size(): number {
    return this.pending.length;
  }

  get isClosed(): boolean {
    return this.closed;
  }

  /** True when emit() filled a whole batch and a flush is warranted. */
  get wantsFlush(): boolean {
    return this.pending.length >= this.maxBatch;
  }

  /**
   * POST everything pending, in order, at most maxBatch per request.
   * Failed batches are retained (same cids) and retried on a later flush
   * after an exponential backoff window.
   */
  async flush(nowMs: number, keepalive = false): Promise<number> {
    if (this.inFlight || this.pending.length === 0 || nowMs < this.blockedUntil) {
      return 0;
    }
    this.inFlight = true;
    let sent = 0;
    try {
      while (this.pending.length > 0) {
        const batch = this.pending.slice(0, this.maxBatch);
        let ok = false;
        try {
          const response = await this.fetchFn(this.endpoint, {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify(batch),
            keepalive,
          });
          ok = response.ok;
        } catch {
          ok = false;
        }
        if (!ok) {
          this.blockedUntil = nowMs + this.retryMs;
          this.retryMs = Math.min(this.retryMs * 2, 30_000);
          break;
        }
        this.retryMs = this.baseRetryMs;
        this.pending = this.pending.slice(batch.length);
        sent += batch.length;
      }
    } finally {
      this.inFlight = false;
    }
    return sent;
  }
}
