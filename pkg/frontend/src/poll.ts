/**
 * Coalesced polling: one timer per feed, and never more than one request in
 * flight. If a tick fires while the previous request is still pending, the
 * tick is dropped rather than queued, so a slow server cannot pile up
 * concurrent polls.
 */

export interface Poller {
  stop(): void;
  /** Trigger an immediate poll (still coalesced with any in-flight one). */
  kick(): Promise<void>;
  readonly inFlight: boolean;
}

export function startPolling(
  task: () => Promise<void>,
  intervalMs: number,
  onError: (err: unknown) => void = () => {},
): Poller {
  let busy = false;
  let stopped = false;

  const run = async () => {
    if (busy || stopped) return;
    busy = true;
    try {
      await task();
    } catch (err) {
      onError(err);
    } finally {
      busy = false;
    }
  };

  const timer = setInterval(run, intervalMs);
  void run();

  return {
    stop: () => {
      stopped = true;
      clearInterval(timer);
    },
    kick: run,
    get inFlight() {
      return busy;
    },
  };
}

/**
 * Incremental event-feed cursor. Each poll asks only for events past the
 * last seen seq and hands new ones to the consumer in order.
 */
export class EventCursor {
  private lastSeq = 0;

  constructor(
    private readonly fetchPage: (sinceSeq: number) => Promise<{
      events: { seq: number }[];
      last_seq: number;
    }>,
  ) {}

  get position(): number {
    return this.lastSeq;
  }

  async advance<E extends { seq: number }>(consume: (events: E[]) => void): Promise<void> {
    const page = await this.fetchPage(this.lastSeq);
    if (page.events.length > 0) {
      consume(page.events as E[]);
    }
    this.lastSeq = Math.max(this.lastSeq, page.last_seq);
  }
}
