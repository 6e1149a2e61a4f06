// Console view state: a pure reducer over the ordered session stream.
//
// The console holds no simulation truth of its own: replaying the same
// message sequence from scratch reconstructs an identical radio log,
// banner list, and traffic picture.

import {
  ActorStatePayload,
  AdvisoryPayload,
  RadioTurnPayload,
  SEVERITY_RANK,
  SessionMessage,
  TrackRecord,
} from "./types.js";

const TRAIL_LENGTH = 40;
const BANNER_MIN_RANK = SEVERITY_RANK.ADVISORY; // INFO stays log-only

export interface RadioLogEntry {
  tsMs: number;
  turnId: string;
  speaker: string;
  frequency: string;
  addressedTo: string | null;
  cleanText: string;
  degradedText: string;
  heardDiffers: boolean;
  you: boolean;
  provenance: string;
}

export interface Banner {
  advisoryId: string;
  severity: keyof typeof SEVERITY_RANK;
  message: string;
  tsMs: number;
  advisoryType: string;
  evidence: AdvisoryPayload["evidence"];
}

export interface TrafficEntry {
  track: TrackRecord;
  trail: [number, number][];
}

export interface ConsoleViewState {
  claimedActor: string | null;
  claimPending: string | null;
  radioLog: RadioLogEntry[];
  advisories: AdvisoryPayload[];
  banners: Banner[];
  traffic: Record<string, TrafficEntry>;
  ownship: ActorStatePayload | null;
  simNowMs: number;
  clockOffsetMs: number | null;
  droppedSnapshots: number;
  errors: { detail: string; request?: string }[];
  myTurnIds: string[];
}

export function initialState(): ConsoleViewState {
  return {
    claimedActor: null,
    claimPending: null,
    radioLog: [],
    advisories: [],
    banners: [],
    traffic: {},
    ownship: null,
    simNowMs: 0,
    clockOffsetMs: null,
    droppedSnapshots: 0,
    errors: [],
    myTurnIds: [],
  };
}

function insertRadioEntry(log: RadioLogEntry[], entry: RadioLogEntry): RadioLogEntry[] {
  // Strictly ts-ordered; equal timestamps keep arrival order.
  const out = log.slice();
  let i = out.length;
  while (i > 0 && out[i - 1].tsMs > entry.tsMs) {
    i -= 1;
  }
  out.splice(i, 0, entry);
  return out;
}

function sortBanners(banners: Banner[]): Banner[] {
  return banners
    .slice()
    .sort(
      (a, b) =>
        SEVERITY_RANK[b.severity] - SEVERITY_RANK[a.severity] || a.tsMs - b.tsMs
    );
}

export function applyMessage(
  state: ConsoleViewState,
  msg: SessionMessage,
  wallNowMs?: number
): ConsoleViewState {
  switch (msg.kind) {
    case "radio_turn": {
      const p = msg.payload as RadioTurnPayload;
      const entry: RadioLogEntry = {
        tsMs: p.t_tx_ms,
        turnId: p.turn_id,
        speaker: p.speaker,
        frequency: p.frequency,
        addressedTo: p.addressed_to,
        cleanText: p.clean_text,
        degradedText: p.degraded_text,
        heardDiffers: p.degraded_text !== p.clean_text,
        you: state.myTurnIds.includes(p.turn_id),
        provenance: p.provenance,
      };
      return { ...state, radioLog: insertRadioEntry(state.radioLog, entry) };
    }
    case "advisory": {
      const p = msg.payload as AdvisoryPayload;
      if (state.advisories.some((a) => a.advisory_id === p.advisory_id)) {
        return state;
      }
      const advisories = [...state.advisories, p];
      let banners = state.banners;
      if (SEVERITY_RANK[p.severity] >= BANNER_MIN_RANK) {
        banners = sortBanners([
          ...state.banners,
          {
            advisoryId: p.advisory_id,
            severity: p.severity,
            message: p.message,
            tsMs: msg.ts_ms,
            advisoryType: p.type,
            evidence: p.evidence,
          },
        ]);
      }
      return { ...state, advisories, banners };
    }
    case "track_snapshot": {
      const traffic = { ...state.traffic };
      for (const track of msg.payload.tracks as TrackRecord[]) {
        const prev = traffic[track.actor_id];
        const trail = prev ? prev.trail.slice(-TRAIL_LENGTH + 1) : [];
        trail.push([track.x, track.y]);
        traffic[track.actor_id] = { track, trail };
      }
      return { ...state, traffic };
    }
    case "actor_state": {
      const p = msg.payload as ActorStatePayload;
      if (state.claimedActor && p.actor_id !== state.claimedActor) {
        return state;
      }
      return { ...state, ownship: p };
    }
    case "clock": {
      const simNow = msg.payload.sim_now_ms as number;
      const dropped = (msg.payload.dropped_snapshots as number) ?? state.droppedSnapshots;
      const offset =
        wallNowMs !== undefined ? simNow - wallNowMs : state.clockOffsetMs;
      return {
        ...state,
        simNowMs: simNow,
        droppedSnapshots: dropped,
        clockOffsetMs: offset,
      };
    }
    case "role_grant": {
      return {
        ...state,
        claimedActor: msg.payload.actor_id,
        claimPending: null,
      };
    }
    case "ack_transmit": {
      return { ...state, myTurnIds: [...state.myTurnIds, msg.payload.turn_id] };
    }
    case "error": {
      return {
        ...state,
        claimPending:
          msg.payload.request === "role_claim" ? null : state.claimPending,
        errors: [
          ...state.errors,
          { detail: msg.payload.detail, request: msg.payload.request },
        ],
      };
    }
    default:
      return state;
  }
}

export function replay(messages: SessionMessage[]): ConsoleViewState {
  return messages.reduce((s, m) => applyMessage(s, m), initialState());
}
