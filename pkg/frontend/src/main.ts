import { connectReader } from "./client.js";
import { wallClock } from "./pacing.js";
import { mountReader } from "./render.js";

// ?ws=ws://host:port overrides; the default matches the session's
// default ui port, so `pif serve` plus this page just work together
function socketUrl(): string {
  const override = new URLSearchParams(location.search).get("ws");
  if (override) return override;
  return `ws://${location.hostname || "localhost"}:8080`;
}

const root = document.querySelector<HTMLDivElement>("#app")!;

let render = (() => {}) as ReturnType<typeof mountReader>;
const client = connectReader({
  url: socketUrl(),
  onChange: () => render(client.view, wallClock.now()),
});
render = mountReader(root, {
  advance: () => client.advance(),
  choose: (index) => client.choose(index),
  sim: (key, value) => client.sim(key, value),
});
render(client.view, wallClock.now());

// the lock countdown needs a ticking repaint; everything else renders
// on socket events
setInterval(() => render(client.view, wallClock.now()), 100);

window.addEventListener("keydown", (event) => {
  if (event.target instanceof HTMLInputElement) return; // sliders own their keys
  if (event.code === "Space") {
    event.preventDefault();
    client.advance();
  } else if (event.key >= "1" && event.key <= "9") {
    client.choose(Number(event.key) - 1);
  }
});
