// Wire types mirroring the service JSON verbatim. The console renders these
// fields as-is; it never recomputes privacy statistics client-side.

export interface ProfileRow {
  epsilon: number;
  rdr_min: number;
  rdr_max: number;
  ratio: number;
  norm_variance: number;
  histogram: number[];
}

export interface PisSummary {
  pis_min: number;
  pis_max: number;
  pis_mean: number;
  unique_records: number;
  rows: number;
  histogram: number[];
}

export interface AnalysisReport {
  report_version: number;
  kind: string;
  dataset_id: string | null;
  query: unknown;
  mechanism: { family: string; delta: number };
  sensitivity: number;
  eps_c: string;
  candidates: number[];
  no_candidates: boolean;
  pis_summary: PisSummary;
  rows: ProfileRow[];
}

export interface OdometerEntry {
  query_id: string;
  eps: string;
  delta: string;
  alg: string;
  ts: string;
}

export interface OdometerInfo {
  dataset_id: string;
  eps_c: string;
  delta_sum: string;
  delta_g: string | null;
  comp_bound: string;
  entries: OdometerEntry[];
}

export interface DecisionReport {
  report_version: number;
  kind: string;
  dataset_id: string | null;
  query_id: string;
  algorithm: string;
  status: "answered" | "rejected";
  reason: string | null;
  seed: number | null;
  chosen_epsilon: number | null;
  epsilon_released: boolean;
  output: number[] | null;
  statistic: number | null;
  charged_eps: string;
  charged_delta: string;
  eps_c_after: string;
  candidates_considered: number;
}

export interface AnswerResponse {
  state: string;
  decision: DecisionReport;
}

export interface TicketStatus {
  ticket_id: string;
  dataset_id: string;
  state: string;
  query: unknown;
  decision: DecisionReport | null;
}

export type RatioPreference = { type: "min_max_ratio"; tau_p: number };

export interface AnswerRequest {
  algorithm: "rdr" | "svt";
  seed: number;
  preference?: RatioPreference;
  eps_svt?: number;
  tau_var?: number;
}
