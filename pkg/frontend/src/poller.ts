/** Background polling while any entity is in a transient state. The service
 * offers no push channel, so the UI polls every 2 s and stops as soon as the
 * watched entity settles. */

export const POLL_INTERVAL_MS = 2000;

export interface PollHandle {
  stop(): void;
  done: Promise<void>;
}

type Scheduler = (fn: () => void, ms: number) => unknown;

/**
 * Repeatedly call `fetchOnce` until `isSettled` returns true for its result,
 * forwarding every result (including the final one) to `onUpdate`.
 * A custom scheduler makes the loop testable without real timers.
 */
export function pollUntilSettled<T>(
  fetchOnce: () => Promise<T>,
  isSettled: (value: T) => boolean,
  onUpdate: (value: T) => void,
  scheduler: Scheduler = (fn, ms) => setTimeout(fn, ms),
): PollHandle {
  let stopped = false;
  let resolveDone: () => void;
  const done = new Promise<void>((resolve) => {
    resolveDone = resolve;
  });

  const tick = async () => {
    if (stopped) return resolveDone();
    let value: T;
    try {
      value = await fetchOnce();
    } catch {
      // transient network failure: keep polling
      scheduler(tick, POLL_INTERVAL_MS);
      return;
    }
    if (stopped) return resolveDone();
    onUpdate(value);
    if (isSettled(value)) {
      stopped = true;
      resolveDone();
      return;
    }
    scheduler(tick, POLL_INTERVAL_MS);
  };
  void tick();

  return {
    stop() {
      stopped = true;
    },
    done,
  };
}
