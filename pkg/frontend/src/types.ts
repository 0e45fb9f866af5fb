/** Wire-format types for the gateway HTTP API. */

/** Artifact kinds the gateway serves, mapped to media types server-side. */
export type ArtifactKind = "png" | "txt" | "json";

/** One artifact reference as returned inside message replies and journals. */
export interface ArtifactInfo {
  ref: string;
  kind: ArtifactKind;
  caption: string;
}

/** A single entry in the chat transcript, in arrival order. */
export interface ChatTurn {
  role: "user" | "agent";
  text: string;
  artifacts: ArtifactInfo[];
  /** True when the text is a verbatim gateway error body, not an agent reply. */
  error?: boolean;
}

/** GET /api/health response. */
export interface HealthInfo {
  status: string;
  checkpoint_id: string;
}

/** POST /api/sessions/{id}/pair response. */
export interface PairRefs {
  pair_ref: string;
  t1_ref: string;
  t2_ref: string;
}

/** POST /api/sessions/{id}/messages success response. */
export interface MessageReply {
  reply: string;
  artifacts: ArtifactInfo[];
}

/** One line of the session journal (JSONL, flat objects with a ts field). */
export type JournalEntry =
  | { ts: number; event: "session_created" }
  | { ts: number; event: "pair_uploaded"; pair_ref: string; t1: string; t2: string }
  | {
      ts: number;
      event: "message";
      role: "user" | "agent";
      text: string;
      artifacts?: ArtifactInfo[];
    };

/** 422 body when the planner could not produce a valid plan. */
export interface PlanningFailure {
  error: "planning_failure";
  diagnostics: string[];
}

/** 422 body when a plan step failed during execution. */
export interface ExecutionFailure {
  error: "execution_failure";
  step_id: string;
  tool: string;
  message: string;
}
