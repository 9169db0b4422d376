// The reader UI against the real engine, over the real socket. A
// simulator-backed session serves dungeon_forest; the camp knot picks
// its ambush by comparing mean arousal across the two scene tags, so
// the slider decides which branch fires. With the slider at zero both
// means are zero and the tiebreak picks the dungeon; raising it to one
// inside the forest flips the camp branch to the forest ambush. The
// new level must reach the panel within two seconds of the move, and
// a double advance inside the lock window turns exactly one page.

import { spawn } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import path from "node:path";
import { fileURLToPath } from "node:url";
import { expect, test } from "vitest";
import { WebSocket as NodeWebSocket } from "ws";

import { connectReader, type ReaderClient, type SocketCtor } from "../src/client.js";
import { wallClock } from "../src/pacing.js";
import type { PageMessage } from "../src/protocol.js";
import { canAdvance } from "../src/viewstate.js";
import { sleep, until } from "./support.js";

const repo = path.resolve(path.dirname(fileURLToPath(import.meta.url)), "..", "..");
const story = path.join(repo, "stories", "valid", "dungeon_forest.pif");

interface Served {
  url: string;
  stop(): Promise<void>;
}

function serveSession(): Promise<Served> {
  const dir = mkdtempSync(path.join(tmpdir(), "pif-ui-"));
  const configPath = path.join(dir, "session.json");
  // default debounce (2 s); a quick cadence keeps the slider responsive
  writeFileSync(
    configPath,
    JSON.stringify({
      story,
      input: { simulator: { cadence: 20 } },
      ui: { host: "127.0.0.1", port: 0 },
    }),
  );
  const child = spawn("python3", ["-m", "pif", "serve", configPath], {
    cwd: repo,
    stdio: ["ignore", "pipe", "pipe"],
  });
  return new Promise((resolve, reject) => {
    let banner = "";
    let errors = "";
    child.stderr!.on("data", (chunk) => {
      errors += chunk;
    });
    child.once("exit", (code) => reject(new Error(`pif serve exited early (${code}): ${errors}`)));
    child.stdout!.on("data", function onData(chunk: Buffer) {
      banner += chunk.toString();
      const line = banner.split("\n").find((entry) => entry.startsWith("ui: "));
      if (!line) return;
      child.stdout!.off("data", onData);
      resolve({
        url: line.slice("ui: ".length).trim(),
        stop: () =>
          new Promise<void>((done) => {
            const fallback = setTimeout(() => child.kill("SIGKILL"), 10_000);
            child.once("exit", () => {
              clearTimeout(fallback);
              done();
            });
            child.kill("SIGINT");
          }),
      });
    });
  });
}

function attach(url: string): { client: ReaderClient; pages: PageMessage[] } {
  const pages: PageMessage[] = [];
  const client: ReaderClient = connectReader({
    url,
    socket: NodeWebSocket as unknown as SocketCtor,
    onChange: () => {
      const page = client.view.page;
      if (page !== null && page !== pages[pages.length - 1]) pages.push(page);
    },
  });
  return { client, pages };
}

async function advanceFreely(client: ReaderClient): Promise<void> {
  await until(() => canAdvance(client.view, wallClock.now()), "the advance lock", 10_000);
  client.advance();
}

test("live steering against a served simulator session", { timeout: 120_000 }, async () => {
  // control run: the slider stays at zero, both camp rules tie at zero,
  // and the alphabetical tiebreak picks the dungeon ambush
  const control = await serveSession();
  const a = attach(control.url);
  try {
    await until(() => a.client.view.page?.knot === "crossroads", "the opening page", 10_000);
    expect(a.client.view.page?.sim_enabled).toBe(true);
    expect(a.client.view.page?.debounce_s).toBe(2.0);

    a.client.sim("arousal", 0);
    await until(() => a.client.view.state.phys_arousal === 0, "the zeroed slider", 10_000);
    a.client.choose(1); // the green path; choices are not debounced
    await until(() => a.client.view.page?.knot === "forest", "the forest", 10_000);

    // double advance: the second press half a second later is inside
    // the lock, so one frame leaves and one page turns
    const seen = a.pages.length;
    await until(() => canAdvance(a.client.view, wallClock.now()), "the lock", 10_000);
    a.client.advance();
    await sleep(500);
    a.client.advance();
    await sleep(2_500); // a full debounce window for any double turn to land
    const turned = a.pages.slice(seen);
    expect(turned.length).toBe(1);
    expect(turned[0].knot).toBe("forest");
    expect(turned[0].page_index).toBe(1);

    await advanceFreely(a.client); // leaves the forest, closing its tag
    await until(() => a.client.view.page?.knot === "camp", "the camp", 10_000);
    await advanceFreely(a.client); // the camp page ends in the auto rules
    await until(() => (a.client.view.page?.knot ?? "").endsWith("_attack"), "the ambush", 10_000);
    expect(a.client.view.page?.knot).toBe("dungeon_attack");
  } finally {
    a.client.close();
    await control.stop();
  }

  // steered run: the same walk, but the slider moves zero to one inside
  // the forest; the level shows on the panel within two seconds and the
  // camp branch flips to the forest ambush
  const steered = await serveSession();
  const b = attach(steered.url);
  try {
    await until(() => b.client.view.page?.knot === "crossroads", "the opening page", 10_000);
    b.client.sim("arousal", 0);
    await until(() => b.client.view.state.phys_arousal === 0, "the zeroed slider", 10_000);
    b.client.choose(1);
    await until(() => b.client.view.page?.knot === "forest", "the forest", 10_000);

    const moved = wallClock.now();
    b.client.sim("arousal", 1.0);
    await until(() => b.client.view.state.phys_arousal === 1.0, "the raised slider", 10_000);
    expect(wallClock.now() - moved).toBeLessThanOrEqual(2.0);

    await advanceFreely(b.client);
    await until(() => b.client.view.page?.page_index === 1, "the deep forest", 10_000);
    await advanceFreely(b.client);
    await until(() => b.client.view.page?.knot === "camp", "the camp", 10_000);
    await advanceFreely(b.client);
    await until(() => (b.client.view.page?.knot ?? "").endsWith("_attack"), "the ambush", 10_000);
    expect(b.client.view.page?.knot).toBe("forest_attack");
  } finally {
    b.client.close();
    await steered.stop();
  }
});
