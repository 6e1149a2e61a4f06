// Wire types for the gateway session protocol and REST documents.

export type Severity = "INFO" | "ADVISORY" | "CAUTION" | "WARNING";

export const SEVERITY_RANK: Record<Severity, number> = {
  INFO: 1,
  ADVISORY: 2,
  CAUTION: 3,
  WARNING: 4,
};

export const SEVERITY_COLOR: Record<Severity, string> = {
  INFO: "#9e9e9e", // gray
  ADVISORY: "#1976d2", // blue
  CAUTION: "#ffa000", // amber
  WARNING: "#d32f2f", // red
};

export interface SessionMessage {
  kind: string;
  payload: any;
  ts_ms: number;
}

export interface RadioTurnPayload {
  turn_id: string;
  t_tx_ms: number;
  frequency: string;
  speaker: string;
  addressed_to: string | null;
  clean_text: string;
  degraded_text: string;
  snr_db: number;
  overheard_by: string[];
  provenance: string;
}

export interface AdvisoryPayload {
  advisory_id: string;
  type: string;
  severity: Severity;
  message: string;
  recipients: string[];
  evidence: {
    turn_ids: string[];
    camera_ids: string[];
    ttg_s: number | null;
    rules_triggered: string[];
    [key: string]: unknown;
  };
  t_ready_ms: number;
  t_dec_ms: number;
  t_tts_ms: number | null;
  spoken: boolean;
  provenance: string;
}

export interface TrackRecord {
  actor_id: string;
  callsign: string | null;
  t_adsb_out_ms: number;
  x: number;
  y: number;
  z: number;
  ground_speed: number;
  vertical_speed: number;
  heading_deg: number;
}

export interface TrackSnapshotPayload {
  t_adsb_in_ms: number;
  tracks: TrackRecord[];
}

export interface ActorStatePayload {
  actor_id: string;
  x: number;
  y: number;
  z: number;
  heading_deg: number;
  ground_speed: number;
  phase: string;
}

export interface ScenarioDoc {
  scenario_id: string;
  scene: string;
  geometry: {
    frequencies: string[];
    advisory_frequency: string | null;
    runways: {
      id: string;
      threshold_lo: [number, number];
      length_m: number;
      width_m: number;
    }[];
  };
  actors: {
    actor_id: string;
    class: string;
    callsign: string | null;
    tuned_frequency: string | null;
  }[];
}
