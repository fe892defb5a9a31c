// Browser bootstrap: wires the API client and view state to the DOM.

import { ApiClient } from "./api.js";
import { ConsoleState } from "./state.js";
import {
  decisionLines,
  projectionLines,
  renderGridSvg,
  renderTrustSvg,
  robotColor,
  statusLine,
} from "./views.js";
import type { Snapshot } from "./types.js";

const base = new URLSearchParams(location.search).get("service") ?? "";
const client = new ApiClient(base);
const state = new ConsoleState();
let closeStream: (() => void) | null = null;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function setBanner(text: string | null): void {
  const banner = el<HTMLDivElement>("banner");
  banner.textContent = text ?? "";
  banner.hidden = text === null;
}

function render(): void {
  const snapshot = state.snapshot;
  if (!snapshot) return;
  el<HTMLDivElement>("status").textContent = statusLine(snapshot);
  el<HTMLDivElement>("grid-panel").innerHTML = renderGridSvg(snapshot);

  const picker = el<HTMLDivElement>("robot-picker");
  picker.innerHTML = "";
  snapshot.robots.forEach((robot, index) => {
    const button = document.createElement("button");
    button.textContent = robot.id;
    button.style.borderColor = robotColor(index);
    button.classList.toggle("active", robot.id === state.selectedRobot);
    button.onclick = () => {
      state.selectedRobot = robot.id;
      void refreshTrust();
    };
    picker.appendChild(button);
  });

  el<HTMLUListElement>("allocation-panel").innerHTML = projectionLines(
    snapshot.allocation.projections,
  )
    .map((line) => `<li>${line}</li>`)
    .join("");

  const feed = el<HTMLUListElement>("event-feed");
  feed.innerHTML = state.events
    .slice(-30)
    .map((record) => `<li><span class="t">t${record.t}</span> ${record.type}</li>`)
    .reverse()
    .join("");

  renderDialog(snapshot);
  void refreshTrust();
}

async function refreshTrust(): Promise<void> {
  if (!state.sessionId || !state.snapshot || !state.selectedRobot) return;
  const detailed = await client.snapshot(state.sessionId, { bins: true });
  state.applySnapshot(detailed);
  const belief = detailed.beliefs[state.selectedRobot];
  if (!belief) return;
  el<HTMLDivElement>("trust-panel").innerHTML = renderTrustSvg(
    belief,
    state.trajectoryOf(state.selectedRobot),
    state.selectedRobot,
  );
  el<HTMLDivElement>("trust-caption").textContent =
    `${state.selectedRobot}: mean ${belief.mean.toFixed(4)}, ` +
    `variance ${belief.variance.toExponential(2)}`;
}

function renderDialog(snapshot: Snapshot): void {
  const dialog = el<HTMLDivElement>("decision-dialog");
  if (!snapshot.pending) {
    dialog.hidden = true;
    return;
  }
  dialog.hidden = false;
  el<HTMLUListElement>("decision-lines").innerHTML = decisionLines(snapshot.pending)
    .map((line) => `<li>${line}</li>`)
    .join("");
}

async function submitDecision(allow: boolean): Promise<void> {
  if (!state.sessionId) return;
  try {
    const snapshot = await client.decide(state.sessionId, allow);
    state.applySnapshot(snapshot);
    setBanner(null);
  } catch (error) {
    setBanner(String(error));
    if (state.sessionId) {
      state.applySnapshot(await client.snapshot(state.sessionId));
    }
  }
  render();
}

async function advance(ticks: number): Promise<void> {
  if (!state.sessionId) return;
  try {
    const snapshot = await client.advance(state.sessionId, ticks);
    state.applySnapshot(snapshot);
    setBanner(null);
  } catch (error) {
    setBanner(String(error));
  }
  render();
}

function subscribe(): void {
  if (!state.sessionId) return;
  closeStream?.();
  closeStream = client.openStream(
    state.sessionId,
    state.nextEventIndex,
    (index, record) => {
      state.applyEvent(index, record);
      render();
    },
    (connected) => {
      state.connected = connected;
      setBanner(connected ? null : "event stream lost; reconnecting");
    },
  );
}

async function createSession(): Promise<void> {
  const text = el<HTMLTextAreaElement>("scenario-input").value;
  try {
    const created = await client.createSession(JSON.parse(text));
    state.reset(created.session);
    state.applySnapshot(created.snapshot);
    el<HTMLSpanElement>("session-id").textContent = created.session;
    setBanner(null);
    subscribe();
    render();
  } catch (error) {
    setBanner(String(error));
  }
}

async function attachSession(): Promise<void> {
  const id = el<HTMLInputElement>("attach-input").value.trim();
  if (!id) return;
  try {
    const snapshot = await client.snapshot(id);
    state.reset(id);
    state.applySnapshot(snapshot);
    el<HTMLSpanElement>("session-id").textContent = id;
    setBanner(null);
    subscribe();
    render();
  } catch (error) {
    setBanner(String(error));
  }
}

el<HTMLButtonElement>("create-button").onclick = () => void createSession();
el<HTMLButtonElement>("attach-button").onclick = () => void attachSession();
el<HTMLButtonElement>("tick-1").onclick = () => void advance(1);
el<HTMLButtonElement>("tick-10").onclick = () => void advance(10);
el<HTMLButtonElement>("tick-run").onclick = () => void advance(1000);
el<HTMLButtonElement>("approve").onclick = () => void submitDecision(true);
el<HTMLButtonElement>("deny").onclick = () => void submitDecision(false);
