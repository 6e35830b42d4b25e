// JSON shapes shared between the gateway and the browser views.
// The center-side messages mirror the collection-center HTTP API ("netsvc"
// schemas, protocol version "1"); the rest are the two gateway payloads.

export interface PublicConfig {
  election_id: string;
  candidates: string[];
  voter_count: number;
  window_width: number;
  prime: string;
  threshold: number;
  center_count: number;
  center_public_keys?: Record<string, string>;
}

export type CenterPhase = "idle" | "collecting" | "finalized";

/** One row of GET /v1/official/overview. */
export interface CenterStatus {
  center_id: number;
  endpoint: string;
  reachable: boolean;
  phase?: CenterPhase;
  received_count?: number;
  error?: string;
}

export interface RecordStatus {
  center_id: number;
  verified: boolean;
  share_sum?: string;
  received_count?: number;
  error?: string;
}

export interface TallyRow {
  candidate: string;
  votes: number;
}

export interface TallyView {
  result: TallyRow[];
  packed: string;
  subsets_checked: { centers: number[]; value: string }[];
  turnout_notes: string[];
}

export interface Overview {
  election: {
    election_id: string;
    candidates: string[];
    voter_count: number;
    threshold: number;
    center_count: number;
  };
  centers: CenterStatus[];
  records: RecordStatus[];
  /** Present only once >= threshold verified records exist. */
  tally: TallyView | null;
  endpoints: string[];
}

/**
 * POST /v1/terminal/cast. A fresh cast sends candidate_index only; the
 * gateway assigns the ballot id. A retry sends ballot_id only and replays
 * the pending delivery (same shares), so a ballot can never end up split
 * under two different polynomials.
 */
export interface CastRequest {
  candidate_index?: number;
  ballot_id?: string;
}

export type CastOverall = "registered" | "partial" | "rejected";

export interface CastResponse {
  ballot_id: string;
  overall: CastOverall;
  statuses: Record<string, string>;
}
