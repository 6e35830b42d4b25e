// Voting terminal view: candidate list, confirmation screen, per-center
// delivery progress, and the retry affordance for partial casts.
//
// Pure state machine + HTML renderer; the DOM wiring lives in app.ts so
// this logic is testable without a browser.

import type { CastResponse, Overview } from "../shared/types.js";

export type TerminalPhase =
  | "idle"
  | "confirming"
  | "submitting"
  | "registered"
  | "partial"
  | "rejected";

export interface TerminalState {
  phase: TerminalPhase;
  /** 1-based candidate index; wiped once the vote is registered. */
  selected: number | null;
  ballotId: string | null;
  statuses: Record<string, string>;
  error: string | null;
}

export function initialTerminalState(): TerminalState {
  return { phase: "idle", selected: null, ballotId: null, statuses: {}, error: null };
}

export function selectCandidate(state: TerminalState, index: number): TerminalState {
  if (state.phase !== "idle" && state.phase !== "confirming") return state;
  return { ...state, phase: "confirming", selected: index };
}

export function cancelSelection(state: TerminalState): TerminalState {
  if (state.phase !== "confirming") return state;
  return { ...initialTerminalState() };
}

/**
 * Move to submitting. Calling this again while already submitting returns
 * the state unchanged, so a double-clicked confirm button produces one cast,
 * not two. A retry keeps the ballot id pinned by the earlier outcome.
 */
export function beginSubmit(state: TerminalState): TerminalState {
  if (state.phase === "submitting") return state;
  if (
    state.phase !== "confirming" &&
    state.phase !== "partial" &&
    state.phase !== "rejected"
  ) {
    return state;
  }
  return { ...state, phase: "submitting", error: null };
}

export function applyOutcome(state: TerminalState, outcome: CastResponse): TerminalState {
  const phase: TerminalPhase =
    outcome.overall === "registered"
      ? "registered"
      : outcome.overall === "partial"
        ? "partial"
        : "rejected";
  const next: TerminalState = {
    ...state,
    phase,
    // The gateway holds the shares; once the first attempt is out the door
    // the browser keeps only the ballot id, never the vote content.
    selected: null,
    ballotId: outcome.ballot_id,
    statuses: outcome.statuses,
  };
  if (phase === "registered") {
    next.ballotId = null;
    next.statuses = {};
  }
  return next;
}

export function applyFailure(state: TerminalState, message: string): TerminalState {
  return { ...state, phase: "rejected", error: message };
}

/** After the "registered" screen the terminal resets for the next voter. */
export function resetForNextVoter(state: TerminalState): TerminalState {
  if (state.phase !== "registered" && state.phase !== "rejected") return state;
  return initialTerminalState();
}

const esc = (value: string) =>
  value.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");

function candidateList(candidates: string[], state: TerminalState): string {
  const disabled = state.phase !== "idle" && state.phase !== "confirming";
  const rows = candidates
    .map((name, i) => {
      const index = i + 1;
      const selected = state.selected === index ? " selected" : "";
      return `<button class="candidate${selected}" data-candidate="${index}"${
        disabled ? " disabled" : ""
      }>${esc(name)}</button>`;
    })
    .join("\n");
  return `<div class="candidates">${rows}</div>`;
}

function progressList(statuses: Record<string, string>): string {
  const rows = Object.entries(statuses)
    .sort(([a], [b]) => Number(a) - Number(b))
    .map(([centerId, status]) => {
      const ok = status === "acknowledged";
      return `<li class="center-progress ${ok ? "ok" : "pending"}">center ${centerId}: ${esc(
        status,
      )}</li>`;
    })
    .join("\n");
  return `<ul class="progress">${rows}</ul>`;
}

export function renderTerminal(
  election: Overview["election"] | { candidates: string[] },
  state: TerminalState,
  open = true,
): string {
  if (!open) {
    return `<section class="terminal closed"><p>The election is closed; this terminal is read-only.</p></section>`;
  }
  const candidates = election.candidates;
  switch (state.phase) {
    case "idle":
      return `<section class="terminal"><h2>Select a candidate</h2>${candidateList(
        candidates,
        state,
      )}</section>`;
    case "confirming": {
      const name = candidates[(state.selected ?? 1) - 1];
      return `<section class="terminal confirm"><h2>Confirm your vote</h2>${candidateList(
        candidates,
        state,
      )}<p class="confirm-box">You are voting for <strong>${esc(
        name,
      )}</strong>. This cannot be changed after submission.</p><button class="confirm-btn" data-action="confirm">Confirm &amp; submit</button> <button data-action="cancel">Back</button></section>`;
    }
    case "submitting":
      return `<section class="terminal"><h2>Submitting&hellip;</h2>${progressList(
        state.statuses,
      )}</section>`;
    case "registered":
      return `<section class="terminal registered"><h2>Vote registered</h2><p>Thank you. The terminal is ready for the next voter.</p><button data-action="next">Next voter</button></section>`;
    case "partial":
      return `<section class="terminal partial"><h2>Partially delivered</h2><p>Some collection centers did not confirm yet. Your ballot is safe to retry; it will not be counted twice.</p>${progressList(
        state.statuses,
      )}<button class="retry-btn" data-action="retry" data-ballot-id="${esc(
        state.ballotId ?? "",
      )}">Retry delivery</button></section>`;
    case "rejected":
      return `<section class="terminal rejected"><h2>Vote not registered</h2><p>${esc(
        state.error ?? "No collection center accepted the ballot.",
      )}</p><button class="retry-btn" data-action="retry" data-ballot-id="${esc(
        state.ballotId ?? "",
      )}">Retry delivery</button> <button data-action="next">Start over</button></section>`;
  }
}

