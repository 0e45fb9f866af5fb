/** DOM wiring for the single-page client. All business logic lives behind the
 * gateway; this file only renders state and forwards user actions to the API. */

import { describeError, GatewayClient } from "./api.js";
import {
  type AppState,
  beginMessage,
  beginSession,
  canSend,
  completeMessage,
  failMessage,
  focusMask,
  hydrateFromJournal,
  initialState,
  setOpacity,
  setOverlay,
  setPair,
} from "./state.js";
import { exportTranscript } from "./transcript.js";
import type { ArtifactInfo, ChatTurn } from "./types.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

const apiBase = new URLSearchParams(window.location.search).get("api") ?? "";
const client = new GatewayClient(apiBase);

let state: AppState = initialState();
let localT1: string | null = null;
let localT2: string | null = null;

const ui = {
  health: el<HTMLSpanElement>("health"),
  sessionId: el<HTMLSpanElement>("session-id"),
  newSession: el<HTMLButtonElement>("new-session"),
  exportBtn: el<HTMLButtonElement>("export"),
  fileT1: el<HTMLInputElement>("file-t1"),
  fileT2: el<HTMLInputElement>("file-t2"),
  upload: el<HTMLButtonElement>("upload"),
  previewT1: el<HTMLImageElement>("preview-t1"),
  previewT2: el<HTMLImageElement>("preview-t2"),
  overlay: el<HTMLImageElement>("overlay"),
  overlayToggle: el<HTMLInputElement>("overlay-toggle"),
  opacity: el<HTMLInputElement>("opacity"),
  quickOverlay: el<HTMLButtonElement>("quick-overlay"),
  turns: el<HTMLOListElement>("turns"),
  composer: el<HTMLFormElement>("composer"),
  message: el<HTMLInputElement>("message"),
  send: el<HTMLButtonElement>("send"),
};

function update(next: AppState): void {
  state = next;
  render();
}

function artifactNode(artifact: ArtifactInfo): HTMLElement {
  const wrap = document.createElement("figure");
  wrap.className = "artifact";
  if (artifact.kind === "png") {
    const img = document.createElement("img");
    img.loading = "lazy";
    img.src = client.artifactUrl(artifact.ref);
    img.alt = artifact.caption;
    img.title = "Click to use as the overlay mask";
    img.addEventListener("click", () => update(focusMask(state, artifact.ref)));
    wrap.appendChild(img);
  } else {
    const link = document.createElement("a");
    link.href = client.artifactUrl(artifact.ref);
    link.target = "_blank";
    link.textContent = `${artifact.kind} artifact`;
    wrap.appendChild(link);
  }
  const cap = document.createElement("figcaption");
  cap.textContent = artifact.caption;
  wrap.appendChild(cap);
  return wrap;
}

function turnNode(turn: ChatTurn): HTMLLIElement {
  const li = document.createElement("li");
  li.className = turn.error ? `turn ${turn.role} error` : `turn ${turn.role}`;
  const who = document.createElement("span");
  who.className = "who";
  who.textContent = turn.role === "user" ? "you" : "agent";
  const text = document.createElement("p");
  text.textContent = turn.text;
  li.appendChild(who);
  li.appendChild(text);
  for (const artifact of turn.artifacts) {
    li.appendChild(artifactNode(artifact));
  }
  return li;
}

function render(): void {
  ui.sessionId.textContent = state.sessionId ?? "no session";
  ui.exportBtn.disabled = state.sessionId === null;
  ui.upload.disabled =
    state.sessionId === null ||
    !ui.fileT1.files?.length ||
    !ui.fileT2.files?.length;
  ui.send.disabled = !canSend(state);
  ui.quickOverlay.disabled = !canSend(state) || state.viewer.maskRef === null;
  ui.message.disabled = state.sessionId === null;

  if (state.pair) {
    ui.previewT1.src = client.artifactUrl(state.pair.t1_ref);
    ui.previewT2.src = client.artifactUrl(state.pair.t2_ref);
  } else {
    if (localT1) {
      ui.previewT1.src = localT1;
    } else {
      ui.previewT1.removeAttribute("src");
    }
    if (localT2) {
      ui.previewT2.src = localT2;
    } else {
      ui.previewT2.removeAttribute("src");
    }
  }

  const { maskRef, overlayOn, opacity } = state.viewer;
  ui.overlayToggle.checked = overlayOn;
  ui.opacity.value = String(Math.round(opacity * 100));
  if (maskRef && overlayOn) {
    ui.overlay.src = client.artifactUrl(maskRef);
    ui.overlay.style.opacity = String(opacity);
    ui.overlay.hidden = false;
  } else {
    ui.overlay.hidden = true;
  }

  ui.turns.replaceChildren(...state.turns.map(turnNode));
  ui.turns.scrollTop = ui.turns.scrollHeight;
}

function preview(input: HTMLInputElement, slot: "t1" | "t2"): void {
  const file = input.files?.[0] ?? null;
  const current = slot === "t1" ? localT1 : localT2;
  if (current) {
    URL.revokeObjectURL(current);
  }
  const next = file ? URL.createObjectURL(file) : null;
  if (slot === "t1") {
    localT1 = next;
  } else {
    localT2 = next;
  }
  render();
}

async function refreshHealth(): Promise<void> {
  try {
    const health = await client.health();
    ui.health.textContent = `${health.status} · ${health.checkpoint_id}`;
  } catch (err) {
    ui.health.textContent = describeError(err);
  }
}

async function newSession(): Promise<void> {
  try {
    const sessionId = await client.createSession();
    localT1 = null;
    localT2 = null;
    ui.fileT1.value = "";
    ui.fileT2.value = "";
    window.location.hash = `s=${sessionId}`;
    update(beginSession(state, sessionId));
  } catch (err) {
    ui.health.textContent = describeError(err);
  }
}

async function uploadPair(): Promise<void> {
  const sessionId = state.sessionId;
  const t1 = ui.fileT1.files?.[0];
  const t2 = ui.fileT2.files?.[0];
  if (!sessionId || !t1 || !t2) {
    return;
  }
  ui.upload.disabled = true;
  try {
    update(setPair(state, await client.uploadPair(sessionId, t1, t2)));
  } catch (err) {
    update(failMessage(state, describeError(err)));
  }
}

async function send(text: string): Promise<void> {
  const sessionId = state.sessionId;
  if (!sessionId || !canSend(state) || !text.trim()) {
    return;
  }
  update(beginMessage(state, text));
  try {
    update(completeMessage(state, await client.sendMessage(sessionId, text)));
  } catch (err) {
    update(failMessage(state, describeError(err)));
  }
}

async function exportJournal(): Promise<void> {
  const sessionId = state.sessionId;
  if (!sessionId) {
    return;
  }
  try {
    const entries = await client.fetchJournal(sessionId);
    const blob = new Blob([exportTranscript(sessionId, entries)], {
      type: "application/json",
    });
    const url = URL.createObjectURL(blob);
    const link = document.createElement("a");
    link.href = url;
    link.download = `transcript-${sessionId}.json`;
    link.click();
    URL.revokeObjectURL(url);
  } catch (err) {
    update(failMessage(state, describeError(err)));
  }
}

async function hydrate(): Promise<void> {
  const match = /^#s=(.+)$/.exec(window.location.hash);
  if (!match) {
    return;
  }
  const sessionId = match[1];
  try {
    const entries = await client.fetchJournal(sessionId);
    update(hydrateFromJournal(state, sessionId, entries));
  } catch {
    window.location.hash = "";
  }
}

function init(): void {
  ui.newSession.addEventListener("click", () => void newSession());
  ui.exportBtn.addEventListener("click", () => void exportJournal());
  ui.fileT1.addEventListener("change", () => preview(ui.fileT1, "t1"));
  ui.fileT2.addEventListener("change", () => preview(ui.fileT2, "t2"));
  ui.upload.addEventListener("click", () => void uploadPair());
  ui.composer.addEventListener("submit", (event) => {
    event.preventDefault();
    const text = ui.message.value;
    ui.message.value = "";
    void send(text);
  });
  ui.overlayToggle.addEventListener("change", () =>
    update(setOverlay(state, ui.overlayToggle.checked)),
  );
  ui.opacity.addEventListener("input", () =>
    update(setOpacity(state, Number(ui.opacity.value) / 100)),
  );
  ui.quickOverlay.addEventListener("click", () => {
    const alpha = state.viewer.opacity.toFixed(2);
    void send(`overlay the change mask on the newer image with alpha ${alpha}`);
  });

  render();
  void refreshHealth();
  void hydrate();
}

init();
