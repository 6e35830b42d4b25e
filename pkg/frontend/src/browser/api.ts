// Browser-side HTTP helpers for the gateway and the center endpoints.

import type { CastRequest, CastResponse, Overview } from "../shared/types.js";

async function requestJson<T>(
  url: string,
  init: RequestInit,
  timeoutMs = 10000,
): Promise<T> {
  const response = await fetch(url, {
    ...init,
    signal: AbortSignal.timeout(timeoutMs),
  });
  const body = await response.json().catch(() => null);
  if (!response.ok) {
    throw new Error(body?.error ?? `HTTP ${response.status}`);
  }
  return body as T;
}

export function fetchOverview(): Promise<Overview> {
  return requestJson<Overview>("/v1/official/overview", { method: "GET" });
}

export function castVote(request: CastRequest): Promise<CastResponse> {
  return requestJson<CastResponse>(
    "/v1/terminal/cast",
    {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(request),
    },
    30000,
  );
}

/**
 * Finalize one center directly over its own API (the dashboard's finalize
 * button); the body follows the centers' wire schema, version "1".
 */
export async function finalizeCenter(endpoint: string, electionId: string): Promise<void> {
  const eid = encodeURIComponent(electionId);
  await requestJson(`${endpoint}/v1/elections/${eid}/finalize`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify({
      version: "1",
      kind: "finalize-request",
      election_id: electionId,
    }),
  });
}
