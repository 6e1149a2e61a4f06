// Console entry point: connect, claim, and render against a live run.
//
// URL parameters: ?base=http://127.0.0.1:8313&run=<run_id>&actor=<actor_id>
// The raw session stream is cached in sessionStorage, so reloading the tab
// mid-run replays the stream and reconstructs an identical radio log.

import { SessionClient, fetchScenario, sessionUrl } from "./client.js";
import { drawMap } from "./map.js";
import { applyMessage, ConsoleViewState, replay } from "./state.js";
import { ScenarioDoc, SEVERITY_COLOR, SessionMessage } from "./types.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function storageKey(runId: string): string {
  return `skyloop-session-${runId}`;
}

function loadCached(runId: string): SessionMessage[] {
  try {
    return JSON.parse(sessionStorage.getItem(storageKey(runId)) ?? "[]");
  } catch {
    return [];
  }
}

function renderRadioLog(state: ConsoleViewState): void {
  const log = el<HTMLUListElement>("radio-log");
  log.innerHTML = "";
  for (const entry of state.radioLog) {
    const li = document.createElement("li");
    const who = entry.you ? "you" : entry.speaker;
    const t = (entry.tsMs / 1000).toFixed(1).padStart(6);
    li.textContent = `${t}s ${entry.frequency} ${who}: ${entry.cleanText}`;
    if (entry.heardDiffers) {
      const heard = document.createElement("div");
      heard.className = "as-heard";
      heard.textContent = `as heard: ${entry.degradedText}`;
      li.appendChild(heard);
    }
    if (entry.provenance === "assistant") li.classList.add("assistant");
    if (entry.you) li.classList.add("you");
    log.appendChild(li);
  }
  log.scrollTop = log.scrollHeight;
}

function renderBanners(state: ConsoleViewState): void {
  const box = el<HTMLDivElement>("banners");
  box.innerHTML = "";
  for (const banner of state.banners) {
    const div = document.createElement("div");
    div.className = "banner";
    div.style.background = SEVERITY_COLOR[banner.severity];
    const head = document.createElement("strong");
    head.textContent = `${banner.severity}: `;
    div.appendChild(head);
    div.appendChild(document.createTextNode(banner.message));
    const details = document.createElement("details");
    const summary = document.createElement("summary");
    summary.textContent = "evidence";
    details.appendChild(summary);
    const pre = document.createElement("pre");
    pre.textContent = JSON.stringify(banner.evidence, null, 1);
    details.appendChild(pre);
    div.appendChild(details);
    box.appendChild(div);
  }
}

function renderStatus(state: ConsoleViewState, scenario: ScenarioDoc): void {
  const status = el<HTMLDivElement>("status");
  const role = state.claimedActor
    ? `claimed ${state.claimedActor}`
    : state.claimPending
      ? `claiming ${state.claimPending}…`
      : "observer";
  const clock = (state.simNowMs / 1000).toFixed(0);
  const drops = state.droppedSnapshots ? ` drops=${state.droppedSnapshots}` : "";
  status.textContent = `${scenario.scenario_id} | t=${clock}s | ${role}${drops}`;
  const errors = el<HTMLDivElement>("errors");
  errors.innerHTML = "";
  for (const err of state.errors.slice(-3)) {
    const div = document.createElement("div");
    div.textContent = `${err.request ?? "session"}: ${err.detail}`;
    errors.appendChild(div);
  }
  const ownship = el<HTMLDivElement>("ownship");
  if (state.ownship) {
    const o = state.ownship;
    ownship.textContent = `${o.actor_id} ${o.phase} ${Math.round(o.ground_speed)} m/s ${Math.round(o.z)} m`;
  }
}

async function boot(): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  const base = params.get("base") ?? "http://127.0.0.1:8313";
  const runId = params.get("run");
  const actorId = params.get("actor");
  if (!runId) {
    el<HTMLDivElement>("status").textContent =
      "missing ?run=<run_id> (start a real_time run via POST /v1/runs first)";
    return;
  }

  const scenario = (await fetchScenario(base, runId)) as ScenarioDoc;
  const cached = loadCached(runId);
  let state = replay(cached);
  const allMessages = cached.slice();

  const client = new SessionClient(sessionUrl(base, runId));
  client.onMessage((msg) => {
    allMessages.push(msg);
    sessionStorage.setItem(storageKey(runId), JSON.stringify(allMessages));
    state = applyMessage(state, msg, client.wallNow());
    renderRadioLog(state);
    renderBanners(state);
    renderStatus(state, scenario);
  });
  client.onClosed(() => {
    el<HTMLDivElement>("status").textContent += " | session closed";
  });
  await client.connect();
  if (actorId && !state.claimedActor) {
    state = { ...state, claimPending: actorId };
    client.claim(actorId);
  }

  const form = el<HTMLFormElement>("tx-form");
  const freqSelect = el<HTMLSelectElement>("tx-frequency");
  for (const f of scenario.geometry.frequencies) {
    const opt = document.createElement("option");
    opt.value = f;
    opt.textContent = f;
    freqSelect.appendChild(opt);
  }
  form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    const text = el<HTMLInputElement>("tx-text").value.trim();
    const addressed = el<HTMLInputElement>("tx-addressed").value.trim() || null;
    if (!text) {
      el<HTMLDivElement>("errors").textContent = "transmission text is empty";
      return;
    }
    client.transmit(freqSelect.value, addressed, text);
    el<HTMLInputElement>("tx-text").value = "";
  });

  const canvas = el<HTMLCanvasElement>("map");
  const ctx = canvas.getContext("2d")!;
  const paint = () => {
    drawMap(ctx, scenario, state, canvas.width, canvas.height);
    requestAnimationFrame(paint);
  };
  paint();
  renderStatus(state, scenario);
  renderRadioLog(state);
  renderBanners(state);
}

boot().catch((err) => {
  el<HTMLDivElement>("status").textContent = `boot failed: ${err}`;
});
