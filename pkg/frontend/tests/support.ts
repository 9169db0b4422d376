// Shared test rigging: a hand-cranked clock and a patient poll.

import type { Clock } from "../src/pacing.js";

// timers fire in order as the hands pass them; now() never moves on
// its own, so a test owns every instant
export function manualClock(): Clock & { tick(seconds: number): void } {
  let t = 0;
  const timers: Array<{ at: number; fn: (() => void) | null }> = [];
  return {
    now: () => t,
    after(seconds, fn) {
      const timer = { at: t + seconds, fn: fn as (() => void) | null };
      timers.push(timer);
      return () => {
        timer.fn = null;
      };
    },
    tick(seconds) {
      const until = t + seconds;
      for (;;) {
        const due = timers
          .filter((timer) => timer.fn !== null && timer.at <= until)
          .sort((a, b) => a.at - b.at)[0];
        if (!due) break;
        t = due.at;
        const fn = due.fn!;
        due.fn = null;
        fn();
      }
      t = until;
    },
  };
}

export async function until(
  predicate: () => boolean,
  what: string,
  timeout = 5000,
): Promise<void> {
  const deadline = Date.now() + timeout;
  while (Date.now() < deadline) {
    if (predicate()) return;
    await new Promise((resolve) => setTimeout(resolve, 5));
  }
  throw new Error(`timed out waiting for ${what}`);
}

export const settle = (): Promise<void> => new Promise((resolve) => setTimeout(resolve, 50));

export const sleep = (ms: number): Promise<void> => new Promise((resolve) => setTimeout(resolve, ms));
