// Wire shapes of the session socket. The server pushes `page` and
// `state`; a client may send `advance`, `choose`, and `sim`. Nothing
// else crosses in either direction, so this file describes everything
// that can legally appear on the wire.

export const CONSTRUCTS = ["arousal", "valence", "difficulty"] as const;
export type Construct = (typeof CONSTRUCTS)[number];

export interface PageMessage {
  type: "page";
  knot: string;
  page_index: number;
  text: string;
  choices: string[];
  displayable_state: Record<string, number>;
  ended: boolean;
  sim_enabled: boolean;
  debounce_s: number;
}

export interface StateMessage {
  type: "state";
  values: Record<string, number>;
}

export type ServerMessage = PageMessage | StateMessage;

export type ClientMessage =
  | { type: "advance" }
  | { type: "choose"; index: number }
  | { type: "sim"; values: Record<string, number> };

export function encode(message: ClientMessage): string {
  return JSON.stringify(message);
}

// The server drops malformed input silently and we return the favor:
// a frame that does not parse into a known shape yields null and the
// view keeps showing the last good message.
export function parseServerMessage(raw: string): ServerMessage | null {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof data !== "object" || data === null || Array.isArray(data)) return null;
  const msg = data as Record<string, unknown>;
  if (msg.type === "state") {
    const values = numberMap(msg.values);
    return values === null ? null : { type: "state", values };
  }
  if (msg.type !== "page") return null;
  const displayable = numberMap(msg.displayable_state);
  if (
    displayable === null ||
    typeof msg.knot !== "string" ||
    typeof msg.page_index !== "number" ||
    typeof msg.text !== "string" ||
    !isStringArray(msg.choices) ||
    typeof msg.ended !== "boolean" ||
    typeof msg.sim_enabled !== "boolean" ||
    typeof msg.debounce_s !== "number" ||
    msg.debounce_s < 0
  ) {
    return null;
  }
  return {
    type: "page",
    knot: msg.knot,
    page_index: msg.page_index,
    text: msg.text,
    choices: msg.choices,
    displayable_state: displayable,
    ended: msg.ended,
    sim_enabled: msg.sim_enabled,
    debounce_s: msg.debounce_s,
  };
}

function isStringArray(value: unknown): value is string[] {
  return Array.isArray(value) && value.every((item) => typeof item === "string");
}

function numberMap(value: unknown): Record<string, number> | null {
  if (typeof value !== "object" || value === null || Array.isArray(value)) return null;
  const out: Record<string, number> = {};
  for (const [key, entry] of Object.entries(value)) {
    if (typeof entry !== "number" || !Number.isFinite(entry)) return null;
    out[key] = entry;
  }
  return out;
}
