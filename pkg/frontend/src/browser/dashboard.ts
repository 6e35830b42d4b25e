// Official dashboard view: per-center status, finalization records with
// integrity badges, and the decoded tally once enough verified records
// exist. Pure renderer over the gateway's overview payload.

import type { Overview } from "../shared/types.js";

const esc = (value: string) =>
  value.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");

export function renderCenters(overview: Overview): string {
  const rows = overview.centers
    .map((center) => {
      const state = center.reachable
        ? (center.phase ?? "unknown")
        : `unreachable (${esc(center.error ?? "no response")})`;
      const count =
        center.received_count !== undefined ? String(center.received_count) : "-";
      return `<tr><td>center ${center.center_id}</td><td>${esc(state)}</td><td>${count}</td></tr>`;
    })
    .join("\n");
  return `<table class="centers"><thead><tr><th>Center</th><th>Phase</th><th>Ballots</th></tr></thead><tbody>${rows}</tbody></table>`;
}

export function renderRecords(overview: Overview): string {
  if (overview.records.length === 0) {
    return `<p class="records-empty">No finalization records yet.</p>`;
  }
  const rows = overview.records
    .map((record) => {
      const badge = record.verified
        ? `<span class="badge ok" title="digest and signature verified">verified</span>`
        : `<span class="badge bad" title="${esc(record.error ?? "verification failed")}">invalid</span>`;
      return `<tr><td>center ${record.center_id}</td><td>${esc(
        record.share_sum ?? "?",
      )}</td><td>${record.received_count ?? "-"}</td><td>${badge}</td></tr>`;
    })
    .join("\n");
  return `<table class="records"><thead><tr><th>Center</th><th>Share sum</th><th>Ballots</th><th>Integrity</th></tr></thead><tbody>${rows}</tbody></table>`;
}

export function renderTally(overview: Overview): string {
  if (!overview.tally) {
    const needed = overview.election.threshold;
    const have = overview.records.filter((record) => record.verified).length;
    return `<p class="tally-waiting">Tally hidden: ${have} of ${needed} required verified records. Mid-election only turnout is visible.</p>`;
  }
  const rows = [...overview.tally.result]
    .sort((a, b) => b.votes - a.votes)
    .map(
      (row) =>
        `<tr><td>${esc(row.candidate)}</td><td class="votes">${row.votes}</td></tr>`,
    )
    .join("\n");
  const subsets = overview.tally.subsets_checked
    .map(
      (subset) =>
        `<li>centers {${subset.centers.join(", ")}} reconstruct ${esc(subset.value)}</li>`,
    )
    .join("\n");
  const notes = overview.tally.turnout_notes
    .map((note) => `<li class="warn">${esc(note)}</li>`)
    .join("\n");
  return (
    `<table class="tally"><thead><tr><th>Candidate</th><th>Votes Secured</th></tr></thead><tbody>${rows}</tbody></table>` +
    `<details class="audit"><summary>Reconstruction cross-checks</summary><ul>${subsets}</ul></details>` +
    (notes ? `<ul class="turnout-notes">${notes}</ul>` : "")
  );
}

export function renderOverview(overview: Overview): string {
  const election = overview.election;
  const finalizeDisabled = overview.centers.every(
    (center) => center.phase === "finalized",
  );
  return `
<section class="dashboard">
  <h2>${esc(election.election_id)}</h2>
  <p>${election.candidates.length} candidates, ${election.voter_count} voters, threshold ${election.threshold} of ${election.center_count} centers</p>
  ${renderCenters(overview)}
  <button data-action="finalize"${finalizeDisabled ? " disabled" : ""}>Finalize all centers</button>
  <h3>Finalization records</h3>
  ${renderRecords(overview)}
  <h3>Result</h3>
  ${renderTally(overview)}
</section>`;
}

/**
 * Polling backoff: steady while the gateway answers, exponential (capped)
 * while it does not.
 */
export function pollDelay(consecutiveFailures: number, baseMs = 2000, maxMs = 30000): number {
  if (consecutiveFailures <= 0) return baseMs;
  return Math.min(baseMs * 2 ** consecutiveFailures, maxMs);
}
