// DOM for the reader. mountReader builds the skeleton once; the
// returned update function is a plain projection of (ViewState, now)
// onto it, so anything on screen can be reproduced from the last page
// and state message alone.

import { CONSTRUCTS } from "./protocol.js";
import { lockRemaining, type ViewState } from "./viewstate.js";

export interface InputHandlers {
  advance(): void;
  choose(index: number): void;
  sim(key: string, value: number): void;
}

export type Render = (view: ViewState, now: number) => void;

const BANNERS: Record<string, string> = {
  connecting: "connecting to the session",
  closed: "connection lost; reload to rejoin the session",
  busy: "another reader is connected to this session",
};

export function mountReader(root: HTMLElement, handlers: InputHandlers): Render {
  root.textContent = "";
  root.classList.add("reader");

  const banner = el("div", "banner");
  const trail = el("header", "trail");
  const pageBox = el("main", "page");
  const choiceBox = el("nav", "choices");

  const advance = document.createElement("button");
  advance.type = "button";
  advance.className = "advance";
  advance.addEventListener("click", () => handlers.advance());

  const fin = el("p", "fin");
  fin.textContent = "(the end)";

  const statePanel = el("section", "panel state-panel");
  const gaugeBox = el("div", "gauges");
  statePanel.append(heading("signals"), gaugeBox);

  const simPanel = el("section", "panel sim-panel");
  const sliderBox = el("div", "sliders");
  simPanel.append(heading("simulated reader"), sliderBox);
  for (const construct of CONSTRUCTS) {
    sliderBox.append(sliderRow(construct, handlers));
  }

  root.append(banner, trail, pageBox, choiceBox, advance, fin, statePanel, simPanel);

  let shownPage: ViewState["page"] = null;

  return function update(view: ViewState, now: number): void {
    const page = view.page;
    const connected = view.connection === "connected";
    banner.hidden = connected;
    if (!connected) banner.textContent = BANNERS[view.connection] ?? view.connection;

    if (page !== shownPage) {
      // page identity changed; text and choices rebuild together so a
      // button can never outlive the page that offered it
      shownPage = page;
      if (page !== null) {
        trail.textContent = page.ended ? "" : `${page.knot}, page ${page.page_index + 1}`;
        pageBox.innerHTML = paragraphs(page.text);
        choiceBox.replaceChildren(
          ...page.choices.map((label, index) => choiceButton(index, label, handlers)),
        );
      }
    }

    const waiting = page !== null && !page.ended && page.choices.length === 0;
    advance.hidden = !waiting;
    if (waiting) {
      const hold = lockRemaining(view, now);
      advance.disabled = hold > 0 || !connected;
      advance.textContent = hold > 0 ? `continue (${hold.toFixed(1)} s)` : "continue";
    }
    fin.hidden = !(page !== null && page.ended);

    const keys = Object.keys(view.state).sort();
    statePanel.hidden = keys.length === 0;
    gaugeBox.replaceChildren(...keys.map((key) => gaugeRow(key, view.state[key])));

    simPanel.hidden = !(page !== null && page.sim_enabled);
  };
}

// ---------------------------------------------------------------------------
// pieces

function el(tag: string, className: string): HTMLElement {
  const node = document.createElement(tag);
  node.className = className;
  return node;
}

function heading(text: string): HTMLElement {
  const h = el("h2", "panel-title");
  h.textContent = text;
  return h;
}

function choiceButton(index: number, label: string, handlers: InputHandlers): HTMLButtonElement {
  const button = document.createElement("button");
  button.type = "button";
  button.className = "choice";
  const key = document.createElement("kbd");
  key.textContent = String(index + 1); // digits choose, same as the keyboard
  button.append(key, document.createTextNode(" " + label));
  button.addEventListener("click", () => handlers.choose(index));
  return button;
}

function sliderRow(construct: string, handlers: InputHandlers): HTMLElement {
  const row = el("label", "slider-row");
  const name = el("span", "slider-name");
  name.textContent = construct;
  const input = document.createElement("input");
  input.type = "range";
  input.min = "0";
  input.max = "1";
  input.step = "0.01";
  input.value = "0.5"; // the simulator's resting midpoint
  input.dataset.construct = construct;
  input.addEventListener("input", () => handlers.sim(construct, Number(input.value)));
  row.append(name, input);
  return row;
}

function gaugeRow(key: string, value: number): HTMLElement {
  const row = el("div", "gauge");
  row.setAttribute("role", "meter");
  row.setAttribute("aria-valuenow", String(value));
  const name = el("span", "gauge-name");
  name.textContent = key.replace(/^phys_/, "");
  const track = el("span", "gauge-track");
  const fill = el("span", "gauge-fill");
  fill.style.width = `${(100 * clamp01(value)).toFixed(1)}%`;
  track.append(fill);
  const amount = el("span", "gauge-value");
  amount.textContent = value.toFixed(2);
  row.append(name, track, amount);
  return row;
}

function clamp01(value: number): number {
  return Math.min(1, Math.max(0, value));
}

const ESCAPES: Record<string, string> = {
  "&": "&amp;",
  "<": "&lt;",
  ">": "&gt;",
  '"': "&quot;",
  "'": "&#39;",
};

// All the rich text a page gets: *spans* become emphasis, everything
// else is shown exactly as written.
function paragraphs(text: string): string {
  return text
    .split("\n")
    .map((line) => {
      const safe = line.replace(/[&<>"']/g, (ch) => ESCAPES[ch]);
      return `<p>${safe.replace(/\*([^*]+)\*/g, "<em>$1</em>")}</p>`;
    })
    .join("");
}
