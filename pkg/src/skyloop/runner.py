"""Run director: builds a scenario into a live simulation and executes it.

Wires the event kernel, radio bus, actors, surveillance, decision engine,
and telemetry together. All randomness comes from named streams derived
from the run seed, so identical (scenario, seed) pairs produce
byte-identical event logs.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

from .actors import Actor, RadioReply, ScriptedAtc, inject_readback_error
from .assistant import Advisory, DecisionConfig, DecisionEngine, Severity
from .geometry import dist3
from .kernel import ClockMode, RandomStream, Simulator, derive_stream
from .phraseology import parse_phraseology, resolve_recipient
from .radio import (
    AsrProfile,
    LatencyProfile,
    RadioBus,
    RadioTurn,
    degrade_text,
    simulate_asr,
)
from .scenario import (
    ClearanceEvent,
    RunTrace,
    ScenarioSpec,
    TraceSample,
    derive_conflict_open,
    expand_variant,
    validate,
)
from .surveillance import (
    Camera,
    Corroborator,
    Detection,
    VisionProfile,
    WorldActor,
    emit_tracks,
)
from .telemetry import EventLog, RunMetrics, build_ledger, compute_latencies


class ScenarioValidationError(Exception):
    def __init__(self, violations):
        self.violations = violations
        super().__init__("; ".join(str(v) for v in violations))


@dataclass
class RunProfile:
    """All injectable knobs for one run; constants by default so the latency
    accounting reproduces configured values exactly."""

    asr: AsrProfile = field(default_factory=AsrProfile)
    vision: VisionProfile = field(default_factory=VisionProfile)
    tts_latency: LatencyProfile = field(default_factory=lambda: LatencyProfile.constant(900))
    adsb_latency_ms: int = 50
    adsb_cadence_ms: int = 1000
    decision_latency_ms: int = 0
    tick_ms: int = 50
    channel_snr_db: float = 20.0
    visibility_m: Optional[float] = None       # None: use scenario geometry
    speak_min_level: Severity = Severity.CAUTION
    actors_parse_degraded: bool = False
    readback_delay_ms: int = 1500
    decision: DecisionConfig = field(default_factory=DecisionConfig)


_OVERRIDE_KEYS = {
    "asr.latency_ms",
    "asr.word_error_rate",
    "vision.latency_ms",
    "vision.first_detect_range_m",
    "tts.latency_ms",
    "adsb.latency_ms",
    "adsb.cadence_ms",
    "decision.latency_ms",
    "decision.tau_asr",
    "channel.snr_db",
    "scene.visibility_m",
    "tick_ms",
    "speak_min_level",
    "actors.parse_degraded",
    "readback_delay_ms",
}


def apply_overrides(profile: RunProfile, overrides: dict) -> RunProfile:
    """Validated, dotted-key profile overrides; unknown keys are errors."""
    bad = sorted(set(overrides) - _OVERRIDE_KEYS)
    if bad:
        raise ValueError(f"unknown profile override keys: {bad}")
    p = replace(
        profile,
        asr=replace(profile.asr),
        vision=replace(profile.vision),
        decision=replace(profile.decision),
    )
    for key, value in overrides.items():
        if key == "asr.latency_ms":
            p.asr.latency = LatencyProfile.constant(int(value))
        elif key == "asr.word_error_rate":
            p.asr.word_error_rate = float(value)
        elif key == "vision.latency_ms":
            p.vision.latency = LatencyProfile.constant(int(value))
        elif key == "vision.first_detect_range_m":
            p.vision.first_detect_range_m = float(value)
        elif key == "tts.latency_ms":
            p.tts_latency = LatencyProfile.constant(int(value))
        elif key == "adsb.latency_ms":
            p.adsb_latency_ms = int(value)
        elif key == "adsb.cadence_ms":
            p.adsb_cadence_ms = int(value)
        elif key == "decision.latency_ms":
            p.decision_latency_ms = int(value)
        elif key == "decision.tau_asr":
            p.decision.tau_asr = float(value)
        elif key == "channel.snr_db":
            p.channel_snr_db = float(value)
        elif key == "scene.visibility_m":
            p.visibility_m = float(value)
        elif key == "tick_ms":
            p.tick_ms = int(value)
        elif key == "speak_min_level":
            p.speak_min_level = Severity.parse(str(value))
        elif key == "actors.parse_degraded":
            p.actors_parse_degraded = bool(value)
        elif key == "readback_delay_ms":
            p.readback_delay_ms = int(value)
    return p


@dataclass
class RunResult:
    scenario_id: str
    seed: int
    metrics: RunMetrics
    log_text: str
    trace: RunTrace
    advisories: list[Advisory]
    t_conflict_ms: Optional[int]


class Runner:
    """One scenario run. Construct, then call run() (fast time) or drive
    run_wall() from a thread (real time with HILT sessions)."""

    def __init__(
        self,
        spec: ScenarioSpec,
        seed: Optional[int] = None,
        mode: ClockMode = ClockMode.FAST_TIME,
        pace: float = 1.0,
        overrides: Optional[dict] = None,
    ):
        violations = validate(spec)
        if violations:
            raise ScenarioValidationError(violations)
        self.seed = spec.seed if seed is None else int(seed)
        self.spec = expand_variant(spec, self.seed)
        profile = RunProfile()
        merged: dict = dict(self.spec.profile_overrides)
        merged.update(overrides or {})
        self.profile = apply_overrides(profile, merged) if merged else profile
        self.mode = mode

        self.sim = Simulator(mode=mode, pace=pace)
        self.log = EventLog()
        self.trace = RunTrace()
        self.advisories: list[Advisory] = []
        self._spoken_queue: list[Advisory] = []
        self._subscribers: list[Callable[[str, dict, int], None]] = []
        self._claims: dict[str, str] = {}          # actor_id -> session_id
        self._turn_counter = 0
        self._human_counter = 0
        self._granted_turns: set[str] = set()
        self._first_detection_logged = False
        self._lock = threading.Lock()
        self.finished = False
        # Plugin override hooks (wired by the gateway when plugins are enabled).
        self.asr_override: Optional[Callable] = None
        self.vision_override: Optional[Callable] = None

        # Streams
        self._s_channel = derive_stream(self.seed, "radio_channel")
        self._s_asr = derive_stream(self.seed, "asr_noise")
        self._s_asr_latency = derive_stream(self.seed, "asr_latency")
        self._s_vision = derive_stream(self.seed, "vision")
        self._s_tts = derive_stream(self.seed, "tts_latency")
        self._s_fault = derive_stream(self.seed, "fault")

        # World
        geometry = self.spec.geometry
        self.runways = self.spec.runways()
        self.visibility_m = (
            self.profile.visibility_m
            if self.profile.visibility_m is not None
            else geometry.visibility_m
        )
        self.actors: dict[str, Actor] = {}
        self.atc: dict[str, ScriptedAtc] = {}
        for a_spec in self.spec.actors:
            if a_spec.actor_class == "atc":
                self.atc[a_spec.actor_id] = ScriptedAtc(a_spec)
                continue
            self.actors[a_spec.actor_id] = Actor(
                a_spec, geometry, conf_gate=self.profile.decision.tau_asr
            )
        self._arm_fault()

        self.bus = RadioBus(geometry.frequencies)
        for a_spec in self.spec.actors:
            if a_spec.actor_class == "wildlife":
                continue
            freq = a_spec.tuned_frequency or (
                geometry.frequencies[0] if geometry.frequencies else None
            )
            if freq:
                self.bus.tune(a_spec.actor_id, freq, self._make_listener(a_spec.actor_id))

        # Surveillance
        self.cameras = [
            Camera(c, self.profile.vision, self.visibility_m) for c in self.spec.cameras
        ]
        self.corroborator = Corroborator(
            self.runways, geometry.protected_margin_m, self.profile.vision
        )

        # Decision engine
        roster = {
            a.callsign: a.actor_class for a in self.spec.actors if a.callsign
        }
        atc_callsigns = {
            a.callsign for a in self.spec.actors if a.actor_class == "atc" and a.callsign
        }
        cfg = replace(
            self.profile.decision,
            speak_min_level=self.profile.speak_min_level,
            enable_cpa=self.spec.scene == "enroute",
            separation_min_horizontal_m=geometry.separation_min_horizontal_m,
            separation_min_vertical_m=geometry.separation_min_vertical_m,
        )
        self.engine = DecisionEngine(
            runways=self.runways,
            roster=roster,
            atc_callsigns=atc_callsigns,
            config=cfg,
            emit=self._on_advisory,
            protected_margin_m=geometry.protected_margin_m,
            decision_latency_ms=self.profile.decision_latency_ms,
        )

        self._schedule_all()

    # -- setup ---------------------------------------------------------------

    def _arm_fault(self) -> None:
        fault = self.spec.fault
        if fault.variant == "bad_readback" and fault.target_actor in self.actors:
            actor = self.actors[fault.target_actor]
            actor.readback_fault = "bad_readback"
            actor.readback_fault_turn = fault.target_turn_id
        elif fault.variant == "misaddressed" and fault.target_actor in self.actors:
            self.actors[fault.target_actor].accept_near_miss = True

    def _schedule_all(self) -> None:
        self.log.append(
            0,
            "run_start",
            {
                "scenario_id": self.spec.scenario_id,
                "family": self.spec.family,
                "seed": self.seed,
                "mode": self.mode.value,
                "snr_db": self.profile.channel_snr_db,
                "visibility_m": self.visibility_m,
            },
        )
        for t in self.spec.comm_timeline:
            self.sim.schedule(t.at_ms, "scripted_tx", self._on_scripted, payload=t)
        self.sim.schedule(self.profile.tick_ms, "tick", self._on_tick)
        self.sim.schedule(self.profile.adsb_cadence_ms, "adsb", self._on_adsb)
        for cam in self.cameras:
            self.sim.schedule(cam.sample_period_ms, "frame", self._on_frame, payload=cam)
        if self.mode is ClockMode.REAL_TIME:
            self.sim.schedule(1000, "clock_sync", self._on_clock_sync)
        self._sample_trace(0)

    # -- session plumbing -------------------------------------------------------

    def subscribe(self, fn: Callable[[str, dict, int], None]) -> None:
        with self._lock:
            self._subscribers.append(fn)

    def _publish(self, kind: str, payload: dict) -> None:
        ts = self.sim.clock.now_ms
        with self._lock:
            subs = list(self._subscribers)
        for fn in subs:
            fn(kind, payload, ts)

    def claim_actor(self, actor_id: str, session_id: str) -> tuple[bool, str]:
        spec_actor = next((a for a in self.spec.actors if a.actor_id == actor_id), None)
        if spec_actor is None:
            return (False, f"unknown actor {actor_id!r}")
        if spec_actor.actor_class not in ("aircraft", "atc"):
            return (False, f"{spec_actor.actor_class} actors cannot be claimed")
        with self._lock:
            if actor_id in self._claims:
                return (False, f"actor {actor_id!r} already claimed")
            self._claims[actor_id] = session_id
        if actor_id in self.actors:
            self.actors[actor_id].claimed_by_human = True
        return (True, "")

    def release_actor(self, actor_id: str, session_id: str) -> None:
        with self._lock:
            if self._claims.get(actor_id) == session_id:
                del self._claims[actor_id]
        if actor_id in self.actors:
            self.actors[actor_id].claimed_by_human = False

    def alloc_human_turn_id(self) -> str:
        with self._lock:
            self._human_counter += 1
            return f"human-{self._human_counter:04d}"

    def inject_human_turn(
        self, actor_id: str, frequency: str, addressed_to: Optional[str], text: str, turn_id: str
    ) -> None:
        """Thread-safe: queue a human transmission onto the loop."""

        def _do() -> None:
            self._transmit(
                speaker=actor_id,
                frequency=frequency,
                text=text,
                addressed_to=addressed_to,
                turn_id=turn_id,
                snr_db=None,
                provenance="human",
            )

        self.sim.post_command(_do)

    # -- event handlers -----------------------------------------------------------

    def _on_scripted(self, event) -> None:
        t = event.payload
        if t.speaker in self._claims:
            return  # claimed actors' scripted transmissions are suppressed
        self._transmit(
            speaker=t.speaker,
            frequency=t.frequency,
            text=t.text,
            addressed_to=t.addressed_to,
            turn_id=t.turn_id,
            snr_db=t.snr_db,
            provenance="scripted",
        )

    def _next_turn_id(self, prefix: str) -> str:
        self._turn_counter += 1
        return f"{prefix}-{self._turn_counter:04d}"

    def _transmit(
        self,
        speaker: str,
        frequency: str,
        text: str,
        addressed_to: Optional[str],
        turn_id: Optional[str],
        snr_db: Optional[float],
        provenance: str,
    ) -> RadioTurn:
        now = self.sim.clock.now_ms
        tid = turn_id or self._next_turn_id("turn")
        snr = self.profile.channel_snr_db if snr_db is None else float(snr_db)
        if provenance == "assistant":
            degraded, p_err = text, 0.0       # advisory TTS is not noise-augmented
        else:
            degraded, _, p_err = degrade_text(text, snr, self._s_channel)
        turn = RadioTurn(
            turn_id=tid,
            t_tx_ms=now,
            frequency=frequency,
            speaker=speaker,
            clean_text=text,
            degraded_text=degraded,
            snr_db=snr,
            addressed_to=addressed_to,
            provenance=provenance,
            channel_p_err=p_err,
        )

        # Ground-truth authorization opens at clearance delivery.
        speaker_spec = next((a for a in self.spec.actors if a.actor_id == speaker), None)
        if speaker in self.atc:
            self._note_ground_truth_clearance(turn)
            self.atc[speaker].note_instruction(addressed_to, text)

        exclude = set()
        if (
            self.spec.fault.variant == "cancel_not_received"
            and self.spec.fault.target_turn_id == tid
            and self.spec.fault.target_actor
        ):
            exclude.add(self.spec.fault.target_actor)

        self.log.append(now, "radio_turn", turn.as_record())
        self.bus.transmit(turn, exclude=exclude)
        self._publish("radio_turn", turn.as_record())

        # Parallel ASR path: a copy goes to the recognizer (assistant side).
        if provenance != "assistant":
            asr = None
            if self.asr_override is not None:
                asr = self.asr_override(turn)   # None falls back to the simulator
            if asr is None:
                asr = simulate_asr(turn, self.profile.asr, self._s_asr, self._s_asr_latency)
            speaker_callsign = speaker_spec.callsign if speaker_spec else None
            self.sim.schedule(
                asr.t_asr_out_ms,
                "asr_done",
                self._on_asr_done,
                payload=(asr, speaker_callsign),
            )
        return turn

    def _note_ground_truth_clearance(self, turn: RadioTurn) -> None:
        slots = parse_phraseology(turn.clean_text)
        if slots.action not in (
            "cleared_for_takeoff",
            "cleared_to_land",
            "line_up_and_wait",
            "cancel_takeoff_clearance",
        ):
            return
        roster = [a.callsign for a in self.spec.actors if a.callsign]
        recipient, _ambiguous = resolve_recipient(slots, roster)
        exact = slots.callsign in roster
        if not exact:
            return  # near-miss grants are recorded at acceptance time
        actor_id = next(
            (a.actor_id for a in self.spec.actors if a.callsign == recipient), None
        )
        if actor_id is None:
            return
        if slots.action == "cancel_takeoff_clearance":
            return  # cancellation counts on receipt, handled at delivery
        if turn.turn_id in self._granted_turns:
            return
        self._granted_turns.add(turn.turn_id)
        self.trace.clearances.append(
            ClearanceEvent(
                t_ms=turn.t_tx_ms,
                actor_id=actor_id,
                kind="granted",
                runway_end=slots.runway,
            )
        )

    def _make_listener(self, actor_id: str):
        def listener(turn: RadioTurn, overheard: bool) -> None:
            if overheard:
                return
            self._actor_hears(actor_id, turn)

        return listener

    def _actor_hears(self, actor_id: str, turn: RadioTurn) -> None:
        now = self.sim.clock.now_ms
        if actor_id in self.atc:
            if actor_id in self._claims:
                return
            atc = self.atc[actor_id]
            speaker_spec = next(
                (a for a in self.spec.actors if a.actor_id == turn.speaker), None
            )
            speaker_callsign = speaker_spec.callsign if speaker_spec else None
            reply = atc.react(speaker_callsign, turn.clean_text)
            if reply is not None:
                self._schedule_reply(actor_id, turn.frequency, reply)
            return

        actor = self.actors.get(actor_id)
        if actor is None or turn.provenance == "assistant":
            return
        heard = turn.degraded_text if self.profile.actors_parse_degraded else turn.clean_text
        slots = parse_phraseology(heard)
        if slots.action is None:
            return
        for_me, near_miss = actor.addressed_by(slots)
        if not for_me:
            return
        reply = actor.receive_command(slots, slots.slot_conf, now)

        # Ground truth: a runway clearance accepted via near-miss addressing
        # opens authorization for the accepting actor.
        if (
            reply is not None
            and reply.intent == "readback"
            and reply.executable
            and slots.action in ("cleared_for_takeoff", "cleared_to_land", "line_up_and_wait")
            and near_miss
            and turn.turn_id not in self._granted_turns
        ):
            self._granted_turns.add(turn.turn_id)
            self.trace.clearances.append(
                ClearanceEvent(
                    t_ms=turn.t_tx_ms,
                    actor_id=actor_id,
                    kind="granted",
                    runway_end=slots.runway,
                )
            )
        if slots.action == "cancel_takeoff_clearance":
            self.trace.clearances.append(
                ClearanceEvent(t_ms=now, actor_id=actor_id, kind="cancel_received", runway_end=self._actor_runway_end(actor))
            )

        if reply is not None and not actor.claimed_by_human:
            if (
                reply.intent == "readback"
                and actor.readback_fault
                and (
                    actor.readback_fault_turn is None
                    or actor.readback_fault_turn == turn.turn_id
                )
            ):
                reply = inject_readback_error(reply, actor.readback_fault, self._s_fault)
                actor.readback_fault = None   # fire once
            self._schedule_reply(actor_id, turn.frequency, reply)

    def _actor_runway_end(self, actor: Actor) -> Optional[str]:
        return actor._runway_end

    def _schedule_reply(self, actor_id: str, frequency: str, reply: RadioReply) -> None:
        delay = self.profile.readback_delay_ms

        def _send(_event) -> None:
            self._transmit(
                speaker=actor_id,
                frequency=frequency,
                text=reply.text,
                addressed_to=reply.addressed_to,
                turn_id=None,
                snr_db=None,
                provenance="actor",
            )

        self.sim.schedule_in(delay, "reply_tx", _send)

    def _on_asr_done(self, event) -> None:
        asr, speaker_callsign = event.payload
        self.log.append(self.sim.clock.now_ms, "asr_result", asr.as_record())
        self.engine.on_asr(asr, speaker_callsign, self.sim.clock.now_ms)

    def _world_snapshot(self) -> list[WorldActor]:
        out = []
        for a_spec in self.spec.actors:
            if a_spec.actor_id in self.actors:
                st = self.actors[a_spec.actor_id].state
                out.append(
                    WorldActor(
                        actor_id=a_spec.actor_id,
                        actor_class=a_spec.actor_class,
                        callsign=a_spec.callsign,
                        x=st.x,
                        y=st.y,
                        z=st.z,
                        heading_deg=st.heading_deg,
                        ground_speed=st.ground_speed,
                        vertical_speed=st.vertical_speed,
                        adsb_equipped=a_spec.adsb_equipped,
                    )
                )
            else:  # ATC: static tower position
                p = a_spec.initial_pose
                out.append(
                    WorldActor(
                        actor_id=a_spec.actor_id,
                        actor_class=a_spec.actor_class,
                        callsign=a_spec.callsign,
                        x=p.x,
                        y=p.y,
                        z=p.z,
                        heading_deg=p.heading_deg,
                        ground_speed=0.0,
                        vertical_speed=0.0,
                        adsb_equipped=a_spec.adsb_equipped,
                    )
                )
        return out

    def _on_tick(self, event) -> None:
        dt = self.profile.tick_ms
        now = self.sim.clock.now_ms
        for actor_id in sorted(self.actors):
            self.actors[actor_id].step(dt)
        self._sample_trace(now)
        # Staleness clearing must run even when no detections arrive.
        changed = self.corroborator.refresh(now)
        if changed:
            for flag in changed:
                self.log.append(now, "occupancy", flag.as_record())
            self.engine.on_occupancy(changed, self.corroborator, now)
        if now + dt <= self.spec.duration_ms:
            self.sim.schedule_in(dt, "tick", self._on_tick)

    def _sample_trace(self, t_ms: int) -> None:
        sample = TraceSample(t_ms=t_ms)
        for a_spec in self.spec.actors:
            if a_spec.actor_id in self.actors:
                st = self.actors[a_spec.actor_id].state
                sample.positions[a_spec.actor_id] = (st.x, st.y, st.z)
                sample.velocities[a_spec.actor_id] = st.velocity()
        self.trace.samples.append(sample)

    def _on_adsb(self, event) -> None:
        t_in = self.sim.clock.now_ms
        tracks = emit_tracks(self._world_snapshot(), t_in, self.profile.adsb_latency_ms)
        t_out = t_in + self.profile.adsb_latency_ms

        def _deliver(_event) -> None:
            for track in tracks:
                self.log.append(
                    self.sim.clock.now_ms,
                    "track",
                    {**track.as_record(), "t_adsb_in_ms": t_in},
                )
            self.engine.on_tracks(tracks, self.sim.clock.now_ms)
            self._publish(
                "track_snapshot",
                {
                    "t_adsb_in_ms": t_in,
                    "tracks": [t.as_record() for t in tracks],
                },
            )
            with self._lock:
                claimed = list(self._claims)
            for actor_id in claimed:
                actor = self.actors.get(actor_id)
                if actor is None:
                    continue
                st = actor.state
                self._publish(
                    "actor_state",
                    {
                        "actor_id": actor_id,
                        "x": round(st.x, 3),
                        "y": round(st.y, 3),
                        "z": round(st.z, 3),
                        "heading_deg": round(st.heading_deg, 3),
                        "ground_speed": round(st.ground_speed, 3),
                        "phase": st.phase,
                    },
                )

        self.sim.schedule(t_out, "adsb_out", _deliver)
        if t_in + self.profile.adsb_cadence_ms <= self.spec.duration_ms:
            self.sim.schedule_in(self.profile.adsb_cadence_ms, "adsb", self._on_adsb)

    def _on_frame(self, event) -> None:
        cam: Camera = event.payload
        t_frame = self.sim.clock.now_ms
        world = self._world_snapshot()
        detections = None
        if self.vision_override is not None:
            snapshot = [
                {
                    "actor_id": a.actor_id,
                    "class": a.actor_class,
                    "x": a.x,
                    "y": a.y,
                    "z": a.z,
                    "heading_deg": a.heading_deg,
                    "ground_speed": a.ground_speed,
                }
                for a in world
            ]
            raw = self.vision_override(cam.spec.camera_id, t_frame, snapshot, cam.spec.ego_mask)
            if raw is not None:
                detections = [
                    Detection(
                        camera_id=cam.spec.camera_id,
                        ts_ms=t_frame,
                        class_label=str(d.get("class_label", d.get("class", "airplane"))),
                        confidence=float(d.get("confidence", d.get("conf", 0.0))),
                        bbox=tuple(d.get("bbox", (0.0, 0.0, 0.0, 0.0))),
                        actor_id_truth=str(d.get("actor_id_truth", d.get("actor_id", ""))),
                        est_x=float(d.get("est_x", 0.0)),
                        est_y=float(d.get("est_y", 0.0)),
                        est_speed_mps=float(d.get("est_speed_mps", 0.0)),
                    )
                    for d in raw
                ]
        if detections is None:
            detections = cam.simulate_frame(world, t_frame, self._s_vision)
        if detections:
            if not self._first_detection_logged:
                self._first_detection_logged = True
                world_by_id = {a.actor_id: a for a in world}
                cx, cy, cz, _ = cam.pose(world_by_id)
                tgt = world_by_id[detections[0].actor_id_truth]
                rng = dist3((cx, cy, cz), (tgt.x, tgt.y, tgt.z))
                self._pending_first_detection = {
                    "camera_id": cam.spec.camera_id,
                    "actor_id": detections[0].actor_id_truth,
                    "range_m": round(rng, 2),
                    "t_frame_ms": t_frame,
                }
            t_vision = t_frame + self.profile.vision.latency.draw(self._s_vision)
            self.sim.schedule(
                t_vision, "vision_done", self._on_vision_done, payload=(detections, t_frame)
            )
        if t_frame + cam.sample_period_ms <= self.spec.duration_ms:
            self.sim.schedule_in(cam.sample_period_ms, "frame", self._on_frame, payload=cam)

    def _on_vision_done(self, event) -> None:
        detections, t_frame = event.payload
        now = self.sim.clock.now_ms
        pending = getattr(self, "_pending_first_detection", None)
        if pending is not None and pending["t_frame_ms"] == t_frame:
            self.log.append(now, "first_detection", pending)
            self._pending_first_detection = None
        for det in detections:
            self.log.append(
                now,
                "detection",
                {**det.as_record(), "t_frame_ms": t_frame, "t_vision_ms": now},
            )
        changed = self.corroborator.ingest(detections, now)
        for flag in changed:
            self.log.append(now, "occupancy", flag.as_record())
        self.engine.on_detections(detections, now)
        if changed:
            self.engine.on_occupancy(changed, self.corroborator, now)

    def _on_clock_sync(self, event) -> None:
        self._publish("clock", {"sim_now_ms": self.sim.clock.now_ms})
        if self.sim.clock.now_ms + 1000 <= self.spec.duration_ms:
            self.sim.schedule_in(1000, "clock_sync", self._on_clock_sync)

    # -- advisories ------------------------------------------------------------

    def _on_advisory(self, adv: Advisory) -> None:
        now = self.sim.clock.now_ms
        speak = adv.severity >= self.profile.speak_min_level
        if speak:
            adv.spoken = True
            adv.t_tts_ms = adv.t_dec_ms + self.profile.tts_latency.draw(self._s_tts)
        self.advisories.append(adv)
        self.log.append(now, "advisory", adv.as_record())
        if speak:
            self.sim.schedule(adv.t_tts_ms, "tts_out", self._on_tts_out, payload=adv)
        else:
            self._publish("advisory", adv.as_record())

    def _on_tts_out(self, event) -> None:
        adv: Advisory = event.payload
        freq = self.spec.geometry.advisory_frequency or (
            self.spec.geometry.frequencies[0] if self.spec.geometry.frequencies else None
        )
        if freq:
            self._transmit(
                speaker="assistant",
                frequency=freq,
                text=adv.message,
                addressed_to=None,
                turn_id=self._next_turn_id("adv-turn"),
                snr_db=None,
                provenance="assistant",
            )
        self._publish("advisory", adv.as_record())

    # -- run ------------------------------------------------------------------------

    def run(self) -> RunResult:
        self.sim.run_until(self.spec.duration_ms)
        return self.finalize()

    def finalize(self) -> RunResult:
        t_conflict = derive_conflict_open(self.spec, self.trace)
        if t_conflict is not None:
            self.log.append(self.spec.duration_ms, "conflict_open", {"t_ms": int(t_conflict)})
        self.log.append(self.spec.duration_ms, "run_end", {"t_ms": self.spec.duration_ms})
        metrics = compute_latencies(build_ledger(self.log.records))
        self.finished = True
        return RunResult(
            scenario_id=self.spec.scenario_id,
            seed=self.seed,
            metrics=metrics,
            log_text=self.log.dump(),
            trace=self.trace,
            advisories=self.advisories,
            t_conflict_ms=t_conflict,
        )
