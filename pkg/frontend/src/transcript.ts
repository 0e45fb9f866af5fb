/** Journal parsing and transcript reconstruction. The journal is the source
 * of truth: everything the UI shows can be rebuilt from it. */

import type { ArtifactInfo, ChatTurn, JournalEntry } from "./types.js";

/** Parse the JSONL journal body into entries, preserving order. */
export function parseJournal(text: string): JournalEntry[] {
  const entries: JournalEntry[] = [];
  for (const line of text.split("\n")) {
    const trimmed = line.trim();
    if (!trimmed) {
      continue;
    }
    const parsed: unknown = JSON.parse(trimmed);
    if (parsed === null || typeof parsed !== "object") {
      throw new Error(`journal line is not an object: ${trimmed}`);
    }
    entries.push(parsed as JournalEntry);
  }
  return entries;
}

/** Rebuild the chat turn list from journal message events, in arrival order. */
export function turnsFromJournal(entries: JournalEntry[]): ChatTurn[] {
  const turns: ChatTurn[] = [];
  for (const entry of entries) {
    if (entry.event !== "message") {
      continue;
    }
    turns.push({
      role: entry.role,
      text: entry.text,
      artifacts: entry.artifacts ?? [],
    });
  }
  return turns;
}

/** Most recent uploaded pair recorded in the journal, if any. */
export function latestPair(
  entries: JournalEntry[],
): { pair_ref: string; t1_ref: string; t2_ref: string } | null {
  for (let i = entries.length - 1; i >= 0; i -= 1) {
    const entry = entries[i];
    if (entry.event === "pair_uploaded") {
      return { pair_ref: entry.pair_ref, t1_ref: entry.t1, t2_ref: entry.t2 };
    }
  }
  return null;
}

/** Most recent png artifact produced by an agent turn, if any. */
export function latestMask(turns: ChatTurn[]): ArtifactInfo | null {
  for (let i = turns.length - 1; i >= 0; i -= 1) {
    const turn = turns[i];
    if (turn.role !== "agent") {
      continue;
    }
    for (let j = turn.artifacts.length - 1; j >= 0; j -= 1) {
      if (turn.artifacts[j].kind === "png") {
        return turn.artifacts[j];
      }
    }
  }
  return null;
}

/** Serialize the transcript for download. The entries are the journal lines
 * verbatim, so the export matches the session journal turn for turn. */
export function exportTranscript(
  sessionId: string,
  entries: JournalEntry[],
): string {
  return JSON.stringify({ session_id: sessionId, entries }, null, 2);
}
