// The one socket. Server messages fold into a ViewState; the reader
// gets exactly three inputs back: advance, choose, sim. Anything the
// view does not permit is a local no-op, mirroring the server, whose
// next page message is the only truth either side needs.

import { CONSTRUCTS, encode, parseServerMessage, type ClientMessage } from "./protocol.js";
import { makeSliderGate, wallClock, type Clock } from "./pacing.js";
import {
  canAdvance,
  canChoose,
  canSim,
  initialView,
  onClosed,
  onMessage,
  onOpen,
  onSent,
  type ViewState,
} from "./viewstate.js";

export const BUSY_CLOSE_CODE = 1013; // the session already has a reader

// The subset of the browser WebSocket this client touches. The `ws`
// package satisfies it too, which is how the tests run under node,
// where no global WebSocket exists.
export interface SocketLike {
  addEventListener(type: "open", listener: () => void): void;
  addEventListener(type: "close", listener: (event: { code: number }) => void): void;
  addEventListener(type: "message", listener: (event: { data: unknown }) => void): void;
  send(data: string): void;
  close(): void;
}

export type SocketCtor = new (url: string) => SocketLike;

export interface ReaderClientOptions {
  url: string;
  socket?: SocketCtor; // defaults to globalThis.WebSocket
  clock?: Clock;
  onChange?: (view: ViewState) => void;
}

export interface ReaderClient {
  readonly view: ViewState;
  advance(): void;
  choose(index: number): void;
  sim(key: string, value: number): void;
  close(): void;
}

export function connectReader(options: ReaderClientOptions): ReaderClient {
  const clock = options.clock ?? wallClock;
  const Socket =
    options.socket ?? ((globalThis as { WebSocket?: unknown }).WebSocket as SocketCtor | undefined);
  if (!Socket) {
    throw new Error("no WebSocket constructor available; pass options.socket");
  }
  const socket = new Socket(options.url);

  let view = initialView();
  const notify = () => options.onChange?.(view);
  const post = (message: ClientMessage) => socket.send(encode(message));
  const sliders = makeSliderGate(clock, (values) => post({ type: "sim", values }));

  socket.addEventListener("open", () => {
    view = onOpen(view);
    notify();
  });
  socket.addEventListener("close", (event) => {
    sliders.cancel();
    view = onClosed(view, event.code === BUSY_CLOSE_CODE);
    notify();
  });
  socket.addEventListener("message", (event) => {
    if (typeof event.data !== "string") return;
    const message = parseServerMessage(event.data);
    if (message === null) return;
    view = onMessage(view, message, clock.now());
    notify();
  });

  return {
    get view() {
      return view;
    },
    advance() {
      if (!canAdvance(view, clock.now())) return;
      view = onSent(view, clock.now());
      post({ type: "advance" });
      notify();
    },
    choose(index) {
      if (!canChoose(view, index)) return;
      view = onSent(view, clock.now());
      post({ type: "choose", index });
      notify();
    },
    sim(key, value) {
      if (!canSim(view)) return;
      if (!(CONSTRUCTS as readonly string[]).includes(key)) return;
      if (!Number.isFinite(value)) return;
      sliders.offer({ [key]: Math.min(1, Math.max(0, value)) });
    },
    close() {
      sliders.cancel();
      socket.close();
    },
  };
}
