"""Decision engine: slot-confidence guard, rule ladder, evidence-score fallback.

The ladder escalates fast in clearly unsafe conditions; the weighted
evidence score is a conservative fallback for ambiguous ones. All rules are
deterministic; an optional HTTP decision plugin can replace the built-in
rules per update, and an NLG plugin may rewrite advisory text (never
severity or evidence).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Callable, Optional

from .geometry import Runway
from .phraseology import ParsedSlots, parse_phraseology, resolve_recipient
from .radio import AsrResult
from .surveillance import Detection, OccupancyFlag, Track, compute_cpa, compute_ttg

TAU_ASR = 0.8
TTG_GATE_S = 8.0
ARRIVAL_CONTEXT_TTG_S = 60.0
TTG_MAX_S = 60.0
FALLBACK_CAUTION = 0.75
FALLBACK_ADVISORY = 0.50
DEBOUNCE_MS = 10_000
EVIDENCE_WEIGHTS = (0.50, 0.35, 0.15)   # vision, ASR consistency, context


class Severity(IntEnum):
    INFO = 1
    ADVISORY = 2
    CAUTION = 3
    WARNING = 4

    @classmethod
    def parse(cls, name: str) -> "Severity":
        try:
            return cls[name.upper()]
        except KeyError:
            raise ValueError(f"unknown severity {name!r}") from None


@dataclass
class EvidenceState:
    W_V: float = 0.0
    W_A: float = 0.0
    W_C: float = 0.0
    readback_mismatch: bool = False
    activity: bool = False
    occupancy: bool = False
    ttg_s: Optional[float] = None
    arrival_context: bool = False
    recipient_ambiguous: bool = False
    slot_conf: float = 0.0


@dataclass
class Advisory:
    advisory_id: str
    type: str
    severity: Severity
    message: str
    recipients: list[str]
    evidence: dict
    t_ready_ms: int
    t_dec_ms: int
    provenance: str = "builtin"
    spoken: bool = False
    t_tts_ms: Optional[int] = None

    def as_record(self) -> dict:
        return {
            "advisory_id": self.advisory_id,
            "type": self.type,
            "severity": self.severity.name,
            "message": self.message,
            "recipients": list(self.recipients),
            "evidence": self.evidence,
            "t_ready_ms": self.t_ready_ms,
            "t_dec_ms": self.t_dec_ms,
            "t_tts_ms": self.t_tts_ms,
            "spoken": self.spoken,
            "provenance": self.provenance,
        }


def guard(slots: ParsedSlots, tau_asr: float = TAU_ASR) -> bool:
    """True when the parse is too weak to act on (strictly below threshold)."""
    return slots.slot_conf < tau_asr


@dataclass
class LadderResult:
    type: str
    severity: Severity
    rules_triggered: list[str]


def evaluate_ladder(e: EvidenceState, ttg_gate_s: float = TTG_GATE_S) -> Optional[LadderResult]:
    """Fixed gate order a, b, c; highest severity wins, ties go to gate order."""
    fired: list[tuple[str, str, Severity]] = []
    if e.readback_mismatch and e.activity:
        fired.append(("a", "readback_mismatch", Severity.CAUTION))
    if e.occupancy and (
        (e.ttg_s is not None and e.ttg_s <= ttg_gate_s) or e.arrival_context
    ):
        fired.append(("b", "occupancy_conflict", Severity.WARNING))
    if e.recipient_ambiguous and e.activity:
        fired.append(("c", "recipient_ambiguity", Severity.CAUTION))
    if not fired:
        return None
    best = max(fired, key=lambda f: f[2])  # max is stable: earlier gate wins ties
    return LadderResult(
        type=best[1],
        severity=best[2],
        rules_triggered=[f"gate_{g}:{t}" for g, t, _ in fired],
    )


def evidence_fallback(
    e: EvidenceState,
    caution_at: float = FALLBACK_CAUTION,
    advisory_at: float = FALLBACK_ADVISORY,
) -> Optional[tuple[Severity, float]]:
    """Weighted score S; CAUTION at >= 0.75, ADVISORY at >= 0.50, else nothing."""
    wv, wa, wc = EVIDENCE_WEIGHTS
    s = wv * e.W_V + wa * e.W_A + wc * e.W_C
    if s >= caution_at:
        return (Severity.CAUTION, s)
    if s >= advisory_at:
        return (Severity.ADVISORY, s)
    return None


# ---------------------------------------------------------------------------
# Message templates (deterministic; NLG plugin may rewrite the surface form)


def _fmt_ttg(ttg_s: Optional[float]) -> str:
    if ttg_s is None or math.isinf(ttg_s):
        return ""
    return f", time to go {ttg_s:.0f} seconds"


def compose_message(adv_type: str, ctx: dict) -> str:
    if adv_type == "clarification_request":
        return f"{ctx.get('speaker', 'station calling')}, say again last transmission"
    if adv_type == "readback_mismatch":
        return (
            f"caution {ctx.get('callsign', 'aircraft')}, readback runway {ctx.get('readback_runway')} "
            f"does not match cleared runway {ctx.get('cleared_runway')}, runway activity observed"
        )
    if adv_type == "occupancy_conflict":
        others = " and ".join(ctx.get("callsigns", [])) or "traffic"
        return (
            f"warning, runway {ctx.get('runway')} occupied, conflicting clearances for "
            f"{others}{_fmt_ttg(ctx.get('ttg_s'))}"
        )
    if adv_type == "recipient_ambiguity":
        return (
            f"caution, possible misaddressed clearance, heard {ctx.get('heard')} "
            f"closest match {ctx.get('match')}, runway activity observed"
        )
    if adv_type == "evidence_fallback":
        return f"advisory, elevated conflict evidence score {ctx.get('score', 0.0):.2f} on runway {ctx.get('runway')}"
    if adv_type == "cpa_conflict":
        return (
            f"warning, predicted loss of separation between {ctx.get('a')} and {ctx.get('b')} "
            f"in {ctx.get('t_cpa_s', 0.0):.0f} seconds"
        )
    if adv_type == "vision_contact":
        return f"advisory, untracked {ctx.get('label', 'traffic')} contact observed"
    return f"{adv_type} advisory"


# ---------------------------------------------------------------------------
# Stateful engine


@dataclass
class DecisionConfig:
    tau_asr: float = TAU_ASR
    ttg_gate_s: float = TTG_GATE_S
    arrival_context_ttg_s: float = ARRIVAL_CONTEXT_TTG_S
    ttg_max_s: float = TTG_MAX_S
    debounce_ms: int = DEBOUNCE_MS
    speak_min_level: Severity = Severity.CAUTION
    cpa_warning_s: float = 60.0
    cpa_caution_s: float = 180.0
    enable_cpa: bool = True        # separation rules only make sense enroute
    separation_min_horizontal_m: float = 9300.0
    separation_min_vertical_m: float = 300.0
    corroboration_k: int = 2


@dataclass
class _ClearanceRecord:
    callsign: str
    action: str
    runway_end: Optional[str]
    turn_id: str
    t_ms: int


class DecisionEngine:
    """Maintains per-modality evidence and evaluates rules on each update."""

    def __init__(
        self,
        runways: list[Runway],
        roster: dict[str, str],            # callsign -> actor class
        atc_callsigns: set[str],
        config: DecisionConfig,
        emit: Callable[[Advisory], None],
        protected_margin_m: float = 60.0,
        decision_latency_ms: int = 0,
    ):
        self.runways = runways
        self.roster = roster
        self.atc_callsigns = atc_callsigns
        self.config = config
        self.emit = emit
        self.margin = protected_margin_m
        self.decision_latency_ms = decision_latency_ms
        self.decision_plugin: Optional[Callable[[dict], Optional[dict]]] = None
        self.nlg_plugin: Optional[Callable[[dict], Optional[str]]] = None

        self._adv_count = 0
        self._clarified_turns: set[str] = set()
        self._debounce: dict[tuple, tuple[int, Severity]] = {}
        self.clearances: dict[str, _ClearanceRecord] = {}
        self.mismatches: dict[str, dict] = {}      # callsign -> mismatch evidence
        self.ambiguity: Optional[dict] = None
        self.tracks: dict[str, Track] = {}         # callsign -> latest track
        self.occupancy: dict[str, OccupancyFlag] = {}
        self._wv_history: list[tuple[int, float]] = []
        self.last_slot_conf: float = 0.0
        self._recent_transcripts: list[dict] = []
        self._recent_detections: list[dict] = []

    # -- stream inputs ------------------------------------------------------

    def on_asr(self, asr: AsrResult, speaker_callsign: Optional[str], now_ms: int) -> None:
        slots = parse_phraseology(asr.transcript)
        self.last_slot_conf = slots.slot_conf
        self._recent_transcripts.append(
            {"turn_id": asr.turn_id, "transcript": asr.transcript, "t_asr_out_ms": asr.t_asr_out_ms}
        )
        del self._recent_transcripts[:-20]
        if slots.action is not None and guard(slots, self.config.tau_asr):
            self._emit_clarification(asr, speaker_callsign, now_ms)
            return
        if slots.action is None:
            return
        speaker_is_atc = speaker_callsign in self.atc_callsigns if speaker_callsign else False
        if speaker_is_atc:
            self._record_clearance(slots, asr, now_ms)
        else:
            self._record_readback(slots, asr, speaker_callsign, now_ms)
        self.evaluate(now_ms, trigger_turns=[asr.turn_id])

    def on_occupancy(self, flags: list[OccupancyFlag], corroborator, now_ms: int) -> None:
        for f in flags:
            self.occupancy[f.runway] = f
            if f.occupied:
                mean_conf = corroborator.mean_confirming_confidence(f.runway, now_ms)
                wv = mean_conf * min(f.corroboration / self.config.corroboration_k, 1.0)
                self._wv_history.append((now_ms, wv))
        self._wv_history = [(t, v) for t, v in self._wv_history if now_ms - t <= 2000]
        self.evaluate(now_ms, trigger_cameras=True)

    def on_tracks(self, tracks: list[Track], now_ms: int) -> None:
        for t in tracks:
            if t.callsign:
                self.tracks[t.callsign] = t
        self._check_cpa(tracks, now_ms)
        self.evaluate(now_ms)

    def on_detections(self, detections: list[Detection], now_ms: int) -> None:
        for d in detections:
            self._recent_detections.append(
                {"camera_id": d.camera_id, "ts_ms": d.ts_ms, "class": d.class_label}
            )
        del self._recent_detections[:-50]
        self._check_untracked_contact(detections, now_ms)

    # -- evidence bookkeeping -------------------------------------------------

    def _record_clearance(self, slots: ParsedSlots, asr: AsrResult, now_ms: int) -> None:
        recipient, ambiguous = resolve_recipient(slots, sorted(self.roster))
        if slots.action == "cancel_takeoff_clearance":
            if recipient and recipient in self.clearances:
                del self.clearances[recipient]
            return
        if slots.action in ("cleared_for_takeoff", "cleared_to_land", "line_up_and_wait"):
            callsign = recipient or slots.callsign
            if callsign:
                self.clearances[callsign] = _ClearanceRecord(
                    callsign=callsign,
                    action=slots.action,
                    runway_end=slots.runway,
                    turn_id=asr.turn_id,
                    t_ms=now_ms,
                )
                self.mismatches.pop(callsign, None)
        if ambiguous:
            self.ambiguity = {
                "heard": slots.callsign,
                "match": recipient,
                "turn_id": asr.turn_id,
                "t_ms": now_ms,
            }

    def _record_readback(
        self, slots: ParsedSlots, asr: AsrResult, speaker_callsign: Optional[str], now_ms: int
    ) -> None:
        callsign = speaker_callsign or slots.callsign
        if not callsign:
            return
        rec = self.clearances.get(callsign)
        if rec is None:
            # The instruction itself may have been lost to the recognizer;
            # a pilot readback is still evidence that a clearance exists.
            if slots.action in (
                "cleared_for_takeoff",
                "cleared_to_land",
                "line_up_and_wait",
            ) and slots.runway:
                self.clearances[callsign] = _ClearanceRecord(
                    callsign=callsign,
                    action=slots.action,
                    runway_end=slots.runway,
                    turn_id=asr.turn_id,
                    t_ms=now_ms,
                )
            return
        if rec.runway_end is None or slots.runway is None:
            return
        if slots.runway != rec.runway_end:
            share = 1.0  # the runway is the single mismatched slot of interest
            self.mismatches[callsign] = {
                "readback_runway": slots.runway,
                "cleared_runway": rec.runway_end,
                "turn_ids": [rec.turn_id, asr.turn_id],
                "w_a": slots.slot_conf * share,
                "t_ms": now_ms,
            }
        else:
            self.mismatches.pop(callsign, None)

    # -- evidence assembly ------------------------------------------------------

    def _runway_of_end(self, end: Optional[str]) -> Optional[str]:
        if end is None:
            return None
        for rw in self.runways:
            if rw.has_end(end):
                return rw.ident
        return None

    def _approach_ttg(self, ident: str) -> Optional[float]:
        """Min TTG among aircraft converging on this runway, excluding traffic
        already inside the protected area.

        Candidates come from the clearance book and, independently of any
        radio parse, from track geometry (course aligned with a runway end
        and laterally near the extended centerline), so the gate still works
        when ASR is heavily degraded.
        """
        rw = next(r for r in self.runways if r.ident == ident)
        best: Optional[float] = None

        def consider(track: Track, end: str) -> None:
            nonlocal best
            if rw.protected_contains(track.x, track.y, self.margin) and track.z < 150.0:
                return
            ttg = compute_ttg(track, rw.threshold(end))
            if ttg is None or math.isinf(ttg):
                return
            if best is None or ttg < best:
                best = ttg

        for callsign, rec in self.clearances.items():
            if self._runway_of_end(rec.runway_end) != ident or rec.runway_end is None:
                continue
            track = self.tracks.get(callsign)
            if track is not None:
                consider(track, rec.runway_end)

        for callsign, track in self.tracks.items():
            if self.roster.get(callsign) != "aircraft":
                continue
            for end in rw.ends:
                dirx, diry = rw.direction(end)
                course = math.degrees(math.atan2(dirx, diry)) % 360.0
                delta = (track.heading_deg - course + 180.0) % 360.0 - 180.0
                if abs(delta) > 45.0:
                    continue
                _along, cross = rw.along_cross(track.x, track.y)
                if abs(cross) > 200.0:
                    continue
                consider(track, end)   # receding traffic yields inf and is ignored
        return best

    def _arrival_context(self, ident: str) -> bool:
        for callsign, rec in self.clearances.items():
            if rec.action != "cleared_to_land":
                continue
            if self._runway_of_end(rec.runway_end) != ident:
                continue
            track = self.tracks.get(callsign)
            if track is None:
                continue   # clearance without a position is not context evidence
            rw = next(r for r in self.runways if r.ident == ident)
            ttg = compute_ttg(track, rw.threshold(rec.runway_end))
            if ttg is not None and ttg <= self.config.arrival_context_ttg_s:
                return True
        return False

    def current_evidence(self, now_ms: int) -> tuple[EvidenceState, dict]:
        """EvidenceState plus a context dict used for message composition."""
        e = EvidenceState(slot_conf=self.last_slot_conf)
        ctx: dict = {"turn_ids": [], "camera_ids": []}

        occupied = [f for f in self.occupancy.values() if f.occupied]
        target = occupied[0] if occupied else None
        if target is not None:
            e.occupancy = True
            e.activity = any(f.activity for f in occupied)
            ctx["runway"] = target.runway
            e.ttg_s = self._approach_ttg(target.runway)
            e.arrival_context = self._arrival_context(target.runway)
            ctx["ttg_s"] = e.ttg_s
            ctx["callsigns"] = sorted(
                c for c, rec in self.clearances.items()
                if self._runway_of_end(rec.runway_end) == target.runway
            )
            ctx["turn_ids"].extend(
                rec.turn_id
                for c, rec in sorted(self.clearances.items())
                if self._runway_of_end(rec.runway_end) == target.runway
            )

        if self.mismatches:
            callsign = sorted(self.mismatches)[0]
            mm = self.mismatches[callsign]
            e.readback_mismatch = True
            e.W_A = min(1.0, mm["w_a"])
            ctx.update(
                callsign=callsign,
                readback_runway=mm["readback_runway"],
                cleared_runway=mm["cleared_runway"],
            )
            ctx["turn_ids"].extend(mm["turn_ids"])
            if "runway" not in ctx:
                ctx["runway"] = self._runway_of_end(mm["cleared_runway"])

        if self.ambiguity is not None and now_ms - self.ambiguity["t_ms"] <= 60_000:
            e.recipient_ambiguous = True
            ctx.setdefault("heard", self.ambiguity["heard"])
            ctx.setdefault("match", self.ambiguity["match"])
            ctx["turn_ids"].append(self.ambiguity["turn_id"])

        e.W_V = max((v for _, v in self._wv_history), default=0.0)
        if e.ttg_s is not None and not math.isinf(e.ttg_s):
            e.W_C = max(0.0, min(1.0, 1.0 - e.ttg_s / self.config.ttg_max_s))
        elif e.arrival_context:
            e.W_C = 0.5
        return e, ctx

    # -- evaluation -------------------------------------------------------------

    def evaluate(
        self,
        now_ms: int,
        trigger_turns: Optional[list[str]] = None,
        trigger_cameras: bool = False,
    ) -> Optional[Advisory]:
        e, ctx = self.current_evidence(now_ms)
        if trigger_turns:
            ctx["turn_ids"].extend(t for t in trigger_turns if t not in ctx["turn_ids"])
        if trigger_cameras or e.occupancy:
            ctx["camera_ids"] = sorted({d["camera_id"] for d in self._recent_detections})

        if self.decision_plugin is not None:
            adv = self._plugin_decide(e, ctx, now_ms)
            if adv is not None:
                return self._deliver(adv, now_ms)
            # fall through to builtin on plugin decline/failure

        result = evaluate_ladder(e, self.config.ttg_gate_s)
        if result is not None:
            adv = self._build(result.type, result.severity, e, ctx, result.rules_triggered, now_ms)
            return self._deliver(adv, now_ms)
        fb = evidence_fallback(e)
        if fb is not None:
            severity, score = fb
            ctx["score"] = score
            adv = self._build("evidence_fallback", severity, e, ctx, ["evidence_fallback"], now_ms)
            adv.evidence["S"] = round(score, 6)
            return self._deliver(adv, now_ms)
        return None

    def _build(
        self,
        adv_type: str,
        severity: Severity,
        e: EvidenceState,
        ctx: dict,
        rules: list[str],
        now_ms: int,
    ) -> Advisory:
        recipients = []
        if adv_type == "readback_mismatch" and ctx.get("callsign"):
            recipients = [ctx["callsign"], "controller"]
        elif adv_type == "occupancy_conflict":
            recipients = list(ctx.get("callsigns", [])) + ["controller"]
        elif adv_type == "recipient_ambiguity":
            recipients = [c for c in [ctx.get("match")] if c] + ["controller"]
        else:
            recipients = ["controller"]
        evidence = {
            "turn_ids": list(dict.fromkeys(ctx.get("turn_ids", []))),
            "camera_ids": list(ctx.get("camera_ids", [])),
            "ttg_s": None if e.ttg_s is None or math.isinf(e.ttg_s) else round(e.ttg_s, 3),
            "rules_triggered": rules,
            "W_V": round(e.W_V, 6),
            "W_A": round(e.W_A, 6),
            "W_C": round(e.W_C, 6),
        }
        self._adv_count += 1
        return Advisory(
            advisory_id=f"adv-{self._adv_count:04d}",
            type=adv_type,
            severity=severity,
            message=compose_message(adv_type, ctx),
            recipients=recipients,
            evidence=evidence,
            t_ready_ms=now_ms,
            t_dec_ms=now_ms + self.decision_latency_ms,
        )

    def _deliver(self, adv: Advisory, now_ms: int) -> Optional[Advisory]:
        key = (adv.type, tuple(sorted(adv.recipients)))
        prev = self._debounce.get(key)
        if prev is not None:
            t_prev, sev_prev = prev
            if now_ms - t_prev < self.config.debounce_ms and adv.severity <= sev_prev:
                return None
        self._debounce[key] = (now_ms, adv.severity)
        if self.nlg_plugin is not None:
            rewritten = self.nlg_plugin(
                {"message": adv.message, "type": adv.type, "severity": adv.severity.name}
            )
            if rewritten:
                adv.message = rewritten
        self.emit(adv)
        return adv

    def _emit_clarification(self, asr: AsrResult, speaker: Optional[str], now_ms: int) -> None:
        if asr.turn_id in self._clarified_turns:
            return
        self._clarified_turns.add(asr.turn_id)
        ctx = {"speaker": speaker or "station calling"}
        self._adv_count += 1
        adv = Advisory(
            advisory_id=f"adv-{self._adv_count:04d}",
            type="clarification_request",
            severity=Severity.INFO,
            message=compose_message("clarification_request", ctx),
            recipients=[speaker] if speaker else [],
            evidence={
                "turn_ids": [asr.turn_id],
                "camera_ids": [],
                "ttg_s": None,
                "rules_triggered": ["guard"],
                "W_V": 0.0,
                "W_A": 0.0,
                "W_C": 0.0,
            },
            t_ready_ms=now_ms,
            t_dec_ms=now_ms + self.decision_latency_ms,
        )
        self.emit(adv)

    # -- auxiliary rule channels (outside the ladder) ----------------------------

    def _check_cpa(self, tracks: list[Track], now_ms: int) -> None:
        if not self.config.enable_cpa:
            return
        aircraft = sorted(
            (t for t in tracks if t.callsign and self.roster.get(t.callsign) == "aircraft"),
            key=lambda t: t.callsign,
        )
        for i, a in enumerate(aircraft):
            for b in aircraft[i + 1 :]:
                t_cpa, d_cpa = compute_cpa(a, b)
                if t_cpa <= 0.0:
                    continue
                pa = (
                    a.x + a.velocity()[0] * t_cpa,
                    a.y + a.velocity()[1] * t_cpa,
                    a.z + a.velocity()[2] * t_cpa,
                )
                pb = (
                    b.x + b.velocity()[0] * t_cpa,
                    b.y + b.velocity()[1] * t_cpa,
                    b.z + b.velocity()[2] * t_cpa,
                )
                h = math.hypot(pa[0] - pb[0], pa[1] - pb[1])
                v = abs(pa[2] - pb[2])
                violates = (
                    h < self.config.separation_min_horizontal_m
                    and v < self.config.separation_min_vertical_m
                )
                if not violates:
                    continue
                if t_cpa <= self.config.cpa_warning_s:
                    severity = Severity.WARNING
                elif t_cpa <= self.config.cpa_caution_s:
                    severity = Severity.CAUTION
                else:
                    continue
                ctx = {"a": a.callsign, "b": b.callsign, "t_cpa_s": t_cpa, "turn_ids": [], "camera_ids": []}
                self._adv_count += 1
                adv = Advisory(
                    advisory_id=f"adv-{self._adv_count:04d}",
                    type="cpa_conflict",
                    severity=severity,
                    message=compose_message("cpa_conflict", ctx),
                    recipients=[a.callsign, b.callsign],
                    evidence={
                        "turn_ids": [],
                        "camera_ids": [],
                        "ttg_s": round(t_cpa, 3),
                        "rules_triggered": ["cpa_conflict"],
                        "W_V": 0.0,
                        "W_A": 0.0,
                        "W_C": 0.0,
                        "d_cpa_m": round(d_cpa, 1),
                    },
                    t_ready_ms=now_ms,
                    t_dec_ms=now_ms + self.decision_latency_ms,
                )
                self._deliver(adv, now_ms)

    def _check_untracked_contact(self, detections: list[Detection], now_ms: int) -> None:
        for det in detections:
            if det.class_label != "airplane":
                continue
            associated = False
            for track in self.tracks.values():
                if math.hypot(track.x - det.est_x, track.y - det.est_y) < 500.0:
                    associated = True
                    break
            if associated:
                continue
            ctx = {"label": det.class_label}
            self._adv_count += 1
            adv = Advisory(
                advisory_id=f"adv-{self._adv_count:04d}",
                type="vision_contact",
                severity=Severity.ADVISORY,
                message=compose_message("vision_contact", ctx),
                recipients=["controller"],
                evidence={
                    "turn_ids": [],
                    "camera_ids": [det.camera_id],
                    "ttg_s": None,
                    "rules_triggered": ["vision_contact"],
                    "W_V": round(det.confidence, 6),
                    "W_A": 0.0,
                    "W_C": 0.0,
                },
                t_ready_ms=now_ms,
                t_dec_ms=now_ms + self.decision_latency_ms,
            )
            self._deliver(adv, now_ms)
            return

    # -- plugin integration --------------------------------------------------------

    def _plugin_decide(self, e: EvidenceState, ctx: dict, now_ms: int) -> Optional[Advisory]:
        bundle = {
            "transcripts": self._recent_transcripts[-10:],
            "detections": self._recent_detections[-20:],
            "adsb_slice": [t.as_record() for _, t in sorted(self.tracks.items())],
            "evidence": {
                "readback_mismatch": e.readback_mismatch,
                "activity": e.activity,
                "occupancy": e.occupancy,
                "ttg_s": e.ttg_s if e.ttg_s is None or not math.isinf(e.ttg_s) else None,
                "arrival_context": e.arrival_context,
                "recipient_ambiguous": e.recipient_ambiguous,
                "W_V": e.W_V,
                "W_A": e.W_A,
                "W_C": e.W_C,
            },
        }
        try:
            raw = self.decision_plugin(bundle)
        except Exception:
            return None
        if raw is None:
            return None
        adv = validate_plugin_advisory(raw, now_ms, self.decision_latency_ms, f"adv-{self._adv_count + 1:04d}")
        if adv is None:
            return None
        self._adv_count += 1
        return adv


def validate_plugin_advisory(
    raw: dict, now_ms: int, decision_latency_ms: int, advisory_id: str
) -> Optional[Advisory]:
    """Schema-check a plugin response; None on violation (caller falls back)."""
    if not isinstance(raw, dict):
        return None
    try:
        severity = Severity.parse(str(raw["severity"]))
        message = str(raw["message"])
    except (KeyError, ValueError):
        return None
    recipients = raw.get("recipients", [])
    if not isinstance(recipients, list):
        return None
    evidence = raw.get("evidence", {})
    if not isinstance(evidence, dict):
        return None
    evidence.setdefault("turn_ids", [])
    evidence.setdefault("camera_ids", [])
    evidence.setdefault("ttg_s", None)
    evidence.setdefault("rules_triggered", ["plugin"])
    evidence.setdefault("W_V", 0.0)
    evidence.setdefault("W_A", 0.0)
    evidence.setdefault("W_C", 0.0)
    return Advisory(
        advisory_id=advisory_id,
        type=str(raw.get("type", "plugin_advisory")),
        severity=severity,
        message=message,
        recipients=[str(r) for r in recipients],
        evidence=evidence,
        t_ready_ms=now_ms,
        t_dec_ms=now_ms + decision_latency_ms,
        provenance="plugin",
    )
