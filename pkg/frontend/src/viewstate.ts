// Everything the reader sees, rebuilt from the last `page` and `state`
// messages and nothing else. The reducers are pure functions of
// (view, message, now), so reconnecting mid-session and replaying the
// latest page reproduces the exact same display.

import type { PageMessage, ServerMessage } from "./protocol.js";

export type Connection = "connecting" | "connected" | "closed" | "busy";

export interface ViewState {
  connection: Connection;
  page: PageMessage | null;
  state: Record<string, number>;
  lockUntil: number; // clock seconds when the advance control unlocks
}

export function initialView(): ViewState {
  return { connection: "connecting", page: null, state: {}, lockUntil: 0 };
}

export function onOpen(view: ViewState): ViewState {
  return { ...view, connection: "connected" };
}

export function onClosed(view: ViewState, busy: boolean): ViewState {
  return { ...view, connection: busy ? "busy" : "closed" };
}

export function onMessage(view: ViewState, message: ServerMessage, now: number): ViewState {
  if (message.type === "state") {
    return { ...view, state: message.values };
  }
  // a page re-arms the lock and resets the panel to the snapshot it
  // carries, so a fresh connection starts from a consistent pair
  return {
    ...view,
    page: message,
    state: message.displayable_state,
    lockUntil: now + message.debounce_s,
  };
}

// Sending advance or choose arms the same lock the server arms; the
// acknowledging page will re-arm it, but the gap between send and
// receipt must not admit a second advance.
export function onSent(view: ViewState, now: number): ViewState {
  return { ...view, lockUntil: now + (view.page ? view.page.debounce_s : 0) };
}

export function lockRemaining(view: ViewState, now: number): number {
  return Math.max(0, view.lockUntil - now);
}

export function canAdvance(view: ViewState, now: number): boolean {
  return (
    view.connection === "connected" &&
    view.page !== null &&
    !view.page.ended &&
    view.page.choices.length === 0 && // a displayed choice blocks advance
    lockRemaining(view, now) === 0
  );
}

export function canChoose(view: ViewState, index: number): boolean {
  return (
    view.connection === "connected" &&
    view.page !== null &&
    !view.page.ended &&
    Number.isInteger(index) &&
    index >= 0 &&
    index < view.page.choices.length
  );
}

export function canSim(view: ViewState): boolean {
  return view.connection === "connected" && view.page !== null && view.page.sim_enabled;
}
