/** Pure UI state and transitions. No DOM, no network: every function returns
 * a new state so the transitions are trivially unit-testable. */

import type { ChatTurn, JournalEntry, MessageReply, PairRefs } from "./types.js";
import { latestMask, latestPair, turnsFromJournal } from "./transcript.js";

export interface ViewerState {
  /** Artifact ref of the mask layered over the T2 preview, if any. */
  maskRef: string | null;
  overlayOn: boolean;
  /** Overlay alpha in [0, 1]. */
  opacity: number;
}

export interface AppState {
  sessionId: string | null;
  pair: PairRefs | null;
  turns: ChatTurn[];
  /** One in-flight message per session: send stays disabled while true. */
  pending: boolean;
  viewer: ViewerState;
}

export function initialState(): AppState {
  return {
    sessionId: null,
    pair: null,
    turns: [],
    pending: false,
    viewer: { maskRef: null, overlayOn: false, opacity: 0.5 },
  };
}

/** A fresh session drops every piece of per-session state. */
export function beginSession(state: AppState, sessionId: string): AppState {
  return { ...initialState(), viewer: { ...state.viewer, maskRef: null }, sessionId };
}

export function setPair(state: AppState, pair: PairRefs): AppState {
  return { ...state, pair };
}

export function canSend(state: AppState): boolean {
  return state.sessionId !== null && !state.pending;
}

/** Record the outgoing user turn and lock sending until a reply lands. */
export function beginMessage(state: AppState, text: string): AppState {
  if (!canSend(state)) {
    throw new Error("a message is already in flight");
  }
  const turn: ChatTurn = { role: "user", text, artifacts: [] };
  return { ...state, turns: [...state.turns, turn], pending: true };
}

/** Append the agent reply and point the viewer at its newest png artifact. */
export function completeMessage(state: AppState, reply: MessageReply): AppState {
  const turn: ChatTurn = {
    role: "agent",
    text: reply.reply,
    artifacts: reply.artifacts,
  };
  const turns = [...state.turns, turn];
  const mask = latestMask(turns);
  return {
    ...state,
    turns,
    pending: false,
    viewer: { ...state.viewer, maskRef: mask ? mask.ref : state.viewer.maskRef },
  };
}

/** Surface a failed send in the turn list, keeping the error body verbatim. */
export function failMessage(state: AppState, errorText: string): AppState {
  const turn: ChatTurn = {
    role: "agent",
    text: errorText,
    artifacts: [],
    error: true,
  };
  return { ...state, turns: [...state.turns, turn], pending: false };
}

/** Rebuild the whole per-session state from the journal alone. */
export function hydrateFromJournal(
  state: AppState,
  sessionId: string,
  entries: JournalEntry[],
): AppState {
  const turns = turnsFromJournal(entries);
  const pair = latestPair(entries);
  const mask = latestMask(turns);
  return {
    ...state,
    sessionId,
    pair: pair
      ? { pair_ref: pair.pair_ref, t1_ref: pair.t1_ref, t2_ref: pair.t2_ref }
      : null,
    turns,
    pending: false,
    viewer: { ...state.viewer, maskRef: mask ? mask.ref : null },
  };
}

export function setOverlay(state: AppState, on: boolean): AppState {
  return { ...state, viewer: { ...state.viewer, overlayOn: on } };
}

export function setOpacity(state: AppState, opacity: number): AppState {
  const clamped = Math.min(1, Math.max(0, opacity));
  return { ...state, viewer: { ...state.viewer, opacity: clamped } };
}

/** Point the viewer at a specific artifact (clicking one in the turn list). */
export function focusMask(state: AppState, maskRef: string): AppState {
  return { ...state, viewer: { ...state.viewer, maskRef, overlayOn: true } };
}
