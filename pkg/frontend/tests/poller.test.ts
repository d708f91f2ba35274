import { describe, expect, it } from "vitest";

import { POLL_INTERVAL_MS, pollUntilSettled } from "../src/poller";

/** Scheduler that runs callbacks immediately but records requested delays. */
function immediateScheduler() {
  const delays: number[] = [];
  return {
    delays,
    schedule: (fn: () => void, ms: number) => {
      delays.push(ms);
      queueMicrotask(fn);
    },
  };
}

describe("pollUntilSettled", () => {
  it("polls until the predicate settles and reports every value", async () => {
    const values = ["generating", "generating", "draft"];
    let i = 0;
    const seen: string[] = [];
    const { delays, schedule } = immediateScheduler();
    const handle = pollUntilSettled(
      async () => values[i++],
      (v) => v === "draft",
      (v) => seen.push(v),
      schedule,
    );
    await handle.done;
    expect(seen).toEqual(["generating", "generating", "draft"]);
    expect(delays).toEqual([POLL_INTERVAL_MS, POLL_INTERVAL_MS]);
  });

  it("keeps polling through transient fetch failures", async () => {
    let calls = 0;
    const seen: string[] = [];
    const { schedule } = immediateScheduler();
    const handle = pollUntilSettled(
      async () => {
        calls++;
        if (calls < 3) throw new Error("network blip");
        return "done";
      },
      (v) => v === "done",
      (v) => seen.push(v),
      schedule,
    );
    await handle.done;
    expect(calls).toBe(3);
    expect(seen).toEqual(["done"]);
  });

  it("stop() halts the loop before the next fetch", async () => {
    let calls = 0;
    const { schedule } = immediateScheduler();
    const handle = pollUntilSettled(
      async () => {
        calls++;
        return "never-settles";
      },
      () => false,
      () => {
        if (calls >= 2) handle.stop();
      },
      schedule,
    );
    await handle.done;
    expect(calls).toBeLessThanOrEqual(3);
  });
});
