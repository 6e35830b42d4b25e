// Entry point: hash routing between the voting terminal (#terminal) and the
// official dashboard (#official), DOM event wiring, and the polling loop.
//
// The terminal page renders from the election info injected into the page
// by the gateway and talks to the network only to cast; the overview
// endpoint is polled by the dashboard route alone.

import { castVote, fetchOverview, finalizeCenter } from "./api.js";
import { pollDelay, renderOverview } from "./dashboard.js";
import {
  applyFailure,
  applyOutcome,
  beginSubmit,
  cancelSelection,
  initialTerminalState,
  renderTerminal,
  resetForNextVoter,
  selectCandidate,
  type TerminalState,
} from "./terminal.js";
import type { Overview } from "../shared/types.js";

interface InjectedElection {
  election_id: string;
  candidates: string[];
}

const view = () => document.getElementById("view")!;

function injectedElection(): InjectedElection {
  return (
    (window as { __ELECTION__?: InjectedElection }).__ELECTION__ ?? {
      election_id: "",
      candidates: [],
    }
  );
}

let terminalState: TerminalState = initialTerminalState();
let electionOpen = true;
let overview: Overview | null = null;
let pollTimer: number | undefined;
let failures = 0;

async function submitBallot() {
  const selected = terminalState.selected;
  const ballotId = terminalState.ballotId;
  const before = terminalState;
  terminalState = beginSubmit(terminalState);
  if (terminalState === before) return; // double click while submitting
  drawTerminal();
  try {
    // retry replays the pending delivery by id; a fresh cast sends only
    // the candidate and lets the gateway assign the ballot id
    const request = ballotId
      ? { ballot_id: ballotId }
      : { candidate_index: selected ?? 0 };
    const outcome = await castVote(request);
    terminalState = applyOutcome(terminalState, outcome);
    const statuses = Object.values(outcome.statuses);
    if (
      outcome.overall === "rejected" &&
      statuses.length > 0 &&
      statuses.every((status) => status.includes("phase"))
    ) {
      electionOpen = false; // every center refused: collection is over
    }
  } catch (error) {
    terminalState = applyFailure(terminalState, String((error as Error).message));
  }
  drawTerminal();
}

function drawTerminal() {
  view().innerHTML = renderTerminal(injectedElection(), terminalState, electionOpen);
  view()
    .querySelectorAll<HTMLButtonElement>("button[data-candidate]")
    .forEach((button) => {
      button.onclick = () => {
        terminalState = selectCandidate(terminalState, Number(button.dataset.candidate));
        drawTerminal();
      };
    });
  view()
    .querySelectorAll<HTMLButtonElement>("button[data-action]")
    .forEach((button) => {
      const action = button.dataset.action;
      if (action === "confirm" || action === "retry") button.onclick = submitBallot;
      if (action === "cancel")
        button.onclick = () => {
          terminalState = cancelSelection(terminalState);
          drawTerminal();
        };
      if (action === "next")
        button.onclick = () => {
          terminalState = resetForNextVoter(terminalState);
          drawTerminal();
        };
    });
}

async function drawDashboard() {
  try {
    overview = await fetchOverview();
    failures = 0;
  } catch {
    failures += 1;
  }
  if (location.hash !== "#official") return;
  if (overview === null) {
    view().innerHTML = `<p class="error">Gateway unreachable; retrying.</p>`;
  } else {
    view().innerHTML = renderOverview(overview);
    const finalize = view().querySelector<HTMLButtonElement>(
      'button[data-action="finalize"]',
    );
    if (finalize) {
      finalize.onclick = async () => {
        finalize.disabled = true;
        const snapshot = overview!;
        await Promise.allSettled(
          snapshot.endpoints.map((endpoint) =>
            finalizeCenter(endpoint, snapshot.election.election_id),
          ),
        );
        await drawDashboard();
      };
    }
  }
  window.clearTimeout(pollTimer);
  pollTimer = window.setTimeout(drawDashboard, pollDelay(failures));
}

function route() {
  window.clearTimeout(pollTimer);
  if (location.hash === "#official") {
    void drawDashboard();
  } else {
    drawTerminal();
  }
}

window.addEventListener("hashchange", route);
window.addEventListener("DOMContentLoaded", route);
