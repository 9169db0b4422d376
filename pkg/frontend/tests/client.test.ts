import { describe, expect, test } from "vitest";
import { WebSocketServer, WebSocket as NodeWebSocket } from "ws";

import { connectReader, type SocketCtor } from "../src/client.js";
import { manualClock, settle, until } from "./support.js";

const asCtor = NodeWebSocket as unknown as SocketCtor;

function pageFixture(overrides: Record<string, unknown> = {}) {
  return {
    type: "page",
    knot: "dungeon",
    page_index: 0,
    text: "Stairs descend.",
    choices: [],
    displayable_state: { phys_arousal: 0.5 },
    ended: false,
    sim_enabled: true,
    debounce_s: 2.0,
    ...overrides,
  };
}

interface Harness {
  url: string;
  frames: Array<{ type: string } & Record<string, unknown>>;
  send(message: unknown): void;
  sendRaw(text: string): void;
  closeClient(code: number): void;
  close(): Promise<void>;
}

function startServer(onConnect?: (send: (message: unknown) => void) => void): Promise<Harness> {
  return new Promise((resolve) => {
    const frames: Harness["frames"] = [];
    let attached: InstanceType<typeof NodeWebSocket> | null = null;
    const server = new WebSocketServer({ host: "127.0.0.1", port: 0 }, () => {
      const { port } = server.address() as { port: number };
      resolve({
        url: `ws://127.0.0.1:${port}`,
        frames,
        send: (message) => attached?.send(JSON.stringify(message)),
        sendRaw: (text) => attached?.send(text),
        closeClient: (code) => attached?.close(code),
        close: () =>
          new Promise<void>((done) => {
            attached?.terminate();
            server.close(() => done());
          }),
      });
    });
    server.on("connection", (socket) => {
      attached = socket;
      socket.on("message", (raw) => frames.push(JSON.parse(raw.toString())));
      onConnect?.((message) => socket.send(JSON.stringify(message)));
    });
  });
}

describe("reader client", () => {
  test("the pushed page lands in the view verbatim", async () => {
    const server = await startServer((send) => send(pageFixture()));
    const client = connectReader({ url: server.url, socket: asCtor });
    try {
      await until(() => client.view.page !== null, "the first page");
      expect(client.view.connection).toBe("connected");
      expect(client.view.page).toEqual(pageFixture());
      expect(client.view.state).toEqual({ phys_arousal: 0.5 });
    } finally {
      client.close();
      await server.close();
    }
  });

  test("two advances inside the lock window send one frame", async () => {
    const server = await startServer((send) => send(pageFixture()));
    const clock = manualClock();
    const client = connectReader({ url: server.url, socket: asCtor, clock });
    try {
      await until(() => client.view.page !== null, "the first page");
      clock.tick(2.5); // past the lock the page armed
      client.advance();
      clock.tick(0.5);
      client.advance(); // half a second later: locally locked, no frame
      await until(() => server.frames.length >= 1, "the advance frame");
      await settle();
      expect(server.frames).toEqual([{ type: "advance" }]);

      clock.tick(2.0); // lock expired; the control works again
      client.advance();
      await until(() => server.frames.length === 2, "the second advance");
    } finally {
      client.close();
      await server.close();
    }
  });

  test("choose sends only for buttons that exist", async () => {
    const choices = ["low door", "green path"];
    const server = await startServer((send) => send(pageFixture({ choices })));
    const client = connectReader({ url: server.url, socket: asCtor });
    try {
      await until(() => client.view.page !== null, "the first page");
      client.choose(3); // no such button on a two-choice page
      client.choose(-1);
      client.choose(1);
      await until(() => server.frames.length >= 1, "the choose frame");
      await settle();
      expect(server.frames).toEqual([{ type: "choose", index: 1 }]);
    } finally {
      client.close();
      await server.close();
    }
  });

  test("slider input is throttled, merged, and clamped", async () => {
    const server = await startServer((send) => send(pageFixture()));
    const clock = manualClock();
    const client = connectReader({ url: server.url, socket: asCtor, clock });
    try {
      await until(() => client.view.page !== null, "the first page");
      client.sim("arousal", 0.0); // leading edge, sent at once
      for (let i = 1; i <= 20; i++) {
        clock.tick(0.004);
        client.sim("arousal", i / 20);
      }
      client.sim("valence", 7); // out of range: clamps to 1
      client.sim("focus", 0.5); // not a construct: dropped
      clock.tick(0.2); // trailing flush
      await until(() => server.frames.length >= 2, "the sim frames");
      await settle();
      expect(server.frames).toEqual([
        { type: "sim", values: { arousal: 0 } },
        { type: "sim", values: { arousal: 1, valence: 1 } },
      ]);
    } finally {
      client.close();
      await server.close();
    }
  });

  test("sim is refused when the session is not simulator backed", async () => {
    const server = await startServer((send) => send(pageFixture({ sim_enabled: false })));
    const client = connectReader({ url: server.url, socket: asCtor });
    try {
      await until(() => client.view.page !== null, "the first page");
      client.sim("arousal", 1.0);
      await settle();
      expect(server.frames).toEqual([]);
    } finally {
      client.close();
      await server.close();
    }
  });

  test("junk from the server never reaches the view", async () => {
    const server = await startServer((send) => send(pageFixture()));
    const client = connectReader({ url: server.url, socket: asCtor });
    try {
      await until(() => client.view.page !== null, "the first page");
      server.sendRaw("definitely not json");
      server.send({ type: "reboot", now: true });
      server.send({ type: "state", values: { phys_valence: "high" } });
      await settle();
      expect(client.view.page).toEqual(pageFixture());
      expect(client.view.state).toEqual({ phys_arousal: 0.5 });

      server.send({ type: "state", values: { phys_valence: 0.7 } });
      await until(() => client.view.state.phys_valence === 0.7, "the good state update");
    } finally {
      client.close();
      await server.close();
    }
  });

  test("a busy close and a plain loss read differently", async () => {
    const busyServer = await startServer();
    const turnedAway = connectReader({ url: busyServer.url, socket: asCtor });
    try {
      await until(() => turnedAway.view.connection === "connected", "the busy connect");
      busyServer.closeClient(1013); // the session already has a reader
      await until(() => turnedAway.view.connection === "busy", "the busy state");
    } finally {
      turnedAway.close();
      await busyServer.close();
    }

    const server = await startServer((send) => send(pageFixture()));
    const client = connectReader({ url: server.url, socket: asCtor });
    try {
      await until(() => client.view.page !== null, "the first page");
      server.closeClient(1001);
      await until(() => client.view.connection === "closed", "the closed state");
      client.advance(); // disconnected: nothing may leave
      await settle();
      expect(server.frames).toEqual([]);
    } finally {
      client.close();
      await server.close();
    }
  });

  test("nothing but advance, choose, and sim ever leaves the client", async () => {
    const server = await startServer((send) => send(pageFixture()));
    const clock = manualClock();
    const client = connectReader({ url: server.url, socket: asCtor, clock });
    try {
      await until(() => client.view.page !== null, "the first page");
      clock.tick(3);
      client.advance();
      client.sim("arousal", 0.9);
      client.choose(0); // no choices: stays local
      server.send(pageFixture({ page_index: 1, choices: ["onward"] }));
      await until(() => client.view.page?.page_index === 1, "the second page");
      client.choose(0);
      clock.tick(1);
      await until(() => server.frames.length >= 3, "the scripted frames");
      await settle();
      const kinds = new Set(server.frames.map((frame) => frame.type));
      expect([...kinds].sort()).toEqual(["advance", "choose", "sim"]);
    } finally {
      client.close();
      await server.close();
    }
  });
});
