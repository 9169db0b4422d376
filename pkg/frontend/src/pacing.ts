// One place for time. Everything that waits or throttles takes a Clock
// so tests can turn the hands by themselves.

export interface Clock {
  now(): number; // seconds, monotonic
  after(seconds: number, fn: () => void): () => void; // returns cancel
}

export const wallClock: Clock = {
  now: () => performance.now() / 1000,
  after(seconds, fn) {
    const id = setTimeout(fn, seconds * 1000);
    return () => clearTimeout(id);
  },
};

export const SLIDER_INTERVAL = 0.1; // seconds between sim frames, 10 Hz tops

export interface SliderGate {
  offer(values: Record<string, number>): void;
  cancel(): void;
}

// Leading edge sends immediately so a single nudge feels instant;
// anything faster coalesces into one trailing frame per interval with
// the latest value per key, so the final slider position always lands.
export function makeSliderGate(
  clock: Clock,
  send: (values: Record<string, number>) => void,
): SliderGate {
  let lastSent = -Infinity;
  let pending: Record<string, number> | null = null;
  let cancelTimer: (() => void) | null = null;

  function flush(): void {
    cancelTimer = null;
    if (pending === null) return;
    const values = pending;
    pending = null;
    lastSent = clock.now();
    send(values);
  }

  return {
    offer(values) {
      if (pending !== null) {
        Object.assign(pending, values); // a flush is already scheduled
        return;
      }
      const now = clock.now();
      if (now - lastSent >= SLIDER_INTERVAL) {
        lastSent = now;
        send({ ...values });
        return;
      }
      pending = { ...values };
      cancelTimer = clock.after(lastSent + SLIDER_INTERVAL - now, flush);
    },
    cancel() {
      if (cancelTimer !== null) cancelTimer();
      cancelTimer = null;
      pending = null;
    },
  };
}
