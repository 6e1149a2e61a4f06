"""Actor models: aircraft, ground vehicles, wildlife, and scripted ATC.

Motion uses constant-acceleration / constant-rate kinematics per phase,
enough to keep timing and geometry honest without aerodynamic modeling.
Radio commands are applied through a confidence gate: low-confidence
parses trigger a clarification request instead of a state change.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .geometry import Runway, find_runway, heading_from_vector, reciprocal_runway, unit_from_heading
from .kernel import RandomStream
from .phraseology import (
    ParsedSlots,
    classify_meta,
    render_readback,
)
from .scenario import ActorSpec, SceneGeometry

CONF_GATE_DEFAULT = 0.8       # actor-layer clarification threshold
ROTATE_DURATION_MS = 2000
FLARE_ALTITUDE_M = 8.0
FLARE_SINK_MPS = 1.5
CLIMB_CLEAR_ALTITUDE_M = 150.0
STOP_SPEED_MPS = 0.2
READBACK_DELAY_MS = 1500
SAY_AGAIN_RETRY_MS = 10_000

# Phase graph: takeoff_roll -> rotate -> climb_out; glide -> flare -> rollout.
PHASES = (
    "parked",
    "holding_short",
    "lineup",
    "lined_up",
    "takeoff_roll",
    "rotate",
    "climb_out",
    "cruise",
    "glide",
    "flare",
    "rollout",
    "drive",
    "stop",
    "walk",
    "fly",
    "stand",
)


@dataclass
class BehaviorCommand:
    action: str
    runway: Optional[str] = None
    altitude_ft: Optional[int] = None
    effective_at_ms: int = 0


@dataclass
class RadioReply:
    text: str
    intent: str                 # readback | clarification | roger | ack
    addressed_to: Optional[str] = None
    executable: bool = True
    delay_ms: int = READBACK_DELAY_MS
    slots: Optional[dict] = None


@dataclass
class ActorState:
    actor_id: str
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0
    heading_deg: float = 0.0
    ground_speed: float = 0.0
    vertical_speed: float = 0.0
    phase: str = "parked"
    pending_clearances: list[BehaviorCommand] = field(default_factory=list)
    last_instruction_conf: float = 1.0

    def position(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)

    def velocity(self) -> tuple[float, float, float]:
        ux, uy = unit_from_heading(self.heading_deg)
        return (ux * self.ground_speed, uy * self.ground_speed, self.vertical_speed)


def inject_readback_error(
    reply: RadioReply,
    variant: str,
    stream: RandomStream,
    replacement_callsign: Optional[str] = None,
) -> RadioReply:
    """Apply a scripted readback fault; deterministic for a given stream."""
    if variant in (None, "none"):
        return reply
    if reply.slots is None:
        return reply
    slots = dict(reply.slots)
    if variant == "bad_readback" and slots.get("runway"):
        slots["runway"] = reciprocal_runway(slots["runway"])
    elif variant == "misaddressed":
        slots["callsign"] = replacement_callsign or slots.get("callsign")
    else:
        return reply
    text = render_readback(
        slots["callsign"],
        slots["action"],
        runway=slots.get("runway"),
        altitude_ft=slots.get("altitude_ft"),
    )
    return RadioReply(
        text=text,
        intent=reply.intent,
        addressed_to=reply.addressed_to,
        executable=reply.executable,
        delay_ms=reply.delay_ms,
        slots=slots,
    )


class Actor:
    """State machine + kinematics for one scenario actor."""

    def __init__(self, spec: ActorSpec, geometry: SceneGeometry, conf_gate: float = CONF_GATE_DEFAULT):
        self.spec = spec
        self.geometry = geometry
        self.runways = [r.build() for r in geometry.runways]
        self.conf_gate = conf_gate
        self.claimed_by_human = False
        self.readback_fault: Optional[str] = None
        self.readback_fault_turn: Optional[str] = None
        self.accept_near_miss = False    # misaddressed variant: crew assumes it was for them
        p = spec.initial_pose
        self.state = ActorState(
            actor_id=spec.actor_id,
            x=p.x,
            y=p.y,
            z=p.z,
            heading_deg=p.heading_deg,
            phase=self._initial_phase(),
        )
        self._rotate_left_ms = 0
        self._hold_runways: set[str] = set()
        self._target_altitude_m: Optional[float] = None
        self._path: list[tuple[float, float]] = [
            (float(px), float(py)) for px, py in spec.behavior_params.get("path", [])
        ]
        self._path_i = 0
        self._takeoff_after_lineup = False
        self._runway: Optional[Runway] = None
        self._runway_end: Optional[str] = None
        end = spec.behavior_params.get("runway_end")
        if end:
            self._runway_end = str(end)
            self._runway = find_runway(self.runways, self._runway_end)
        self._init_behavior()

    # -- setup -------------------------------------------------------------

    def _initial_phase(self) -> str:
        b = self.spec.behavior
        return {
            "approach": "glide",
            "hold_short": "holding_short",
            "cruise": "cruise",
            "parked": "parked",
            "drive": "drive",
            "stop": "stop",
            "walk": "walk",
            "fly": "fly",
            "stand": "stand",
        }.get(b, "parked")

    def _init_behavior(self) -> None:
        st = self.state
        params = self.spec.behavior_params
        if st.phase == "glide":
            st.ground_speed = self.spec.perf("approach_speed_mps")
            glide = math.radians(self.spec.perf("glide_path_deg"))
            st.vertical_speed = -st.ground_speed * math.tan(glide)
            if self._runway is not None and self._runway_end is not None:
                dx, dy = self._runway.direction(self._runway_end)
                st.heading_deg = heading_from_vector(dx, dy)
        elif st.phase == "cruise":
            st.ground_speed = float(params.get("speed_mps", self.spec.perf("cruise_speed_mps")))
            st.vertical_speed = 0.0
        elif st.phase in ("drive", "walk", "fly"):
            default = (
                self.spec.perf("vehicle_speed_mps")
                if st.phase == "drive"
                else self.spec.perf("wildlife_speed_mps")
            )
            st.ground_speed = float(params.get("speed_mps", default))
            if st.phase == "fly":
                st.z = max(st.z, float(params.get("altitude_m", 20.0)))

    # -- kinematics ----------------------------------------------------------

    def step(self, dt_ms: int) -> None:
        dt = dt_ms / 1000.0
        st = self.state
        phase = st.phase
        if phase in ("parked", "holding_short", "lined_up", "stop", "stand"):
            st.ground_speed = 0.0
            st.vertical_speed = 0.0
            return
        if phase == "lineup":
            self._step_toward_lineup(dt)
        elif phase == "takeoff_roll":
            self._step_takeoff_roll(dt)
        elif phase == "rotate":
            self._advance(dt)
            self._rotate_left_ms -= dt_ms
            if self._rotate_left_ms <= 0:
                st.phase = "climb_out"
                st.vertical_speed = self.spec.perf("climb_rate_mps")
        elif phase == "climb_out":
            self._advance(dt)
            st.z += st.vertical_speed * dt
        elif phase == "cruise":
            self._step_cruise(dt)
        elif phase == "glide":
            self._step_glide(dt)
        elif phase == "flare":
            self._advance(dt)
            st.z += -FLARE_SINK_MPS * dt
            st.vertical_speed = -FLARE_SINK_MPS
            if st.z <= 0.0:
                st.z = 0.0
                st.vertical_speed = 0.0
                st.phase = "rollout"
        elif phase == "rollout":
            st.ground_speed = max(0.0, st.ground_speed - self.spec.perf("decel_mps2") * dt)
            self._advance(dt)
            if st.ground_speed <= STOP_SPEED_MPS:
                st.ground_speed = 0.0
                st.phase = "stop"
        elif phase in ("drive", "walk", "fly"):
            self._step_path(dt)

    def _advance(self, dt: float) -> None:
        st = self.state
        ux, uy = unit_from_heading(st.heading_deg)
        st.x += ux * st.ground_speed * dt
        st.y += uy * st.ground_speed * dt

    def _step_toward_lineup(self, dt: float) -> None:
        st = self.state
        assert self._runway is not None and self._runway_end is not None
        along, _cross = self._runway.along_cross(st.x, st.y)
        tx, ty = self._lineup_point()
        d = math.hypot(tx - st.x, ty - st.y)
        speed = self.spec.perf("taxi_speed_mps")
        if d <= speed * dt:
            st.x, st.y = tx, ty
            dx, dy = self._runway.direction(self._runway_end)
            st.heading_deg = heading_from_vector(dx, dy)
            st.ground_speed = 0.0
            if self._takeoff_after_lineup:
                st.phase = "takeoff_roll"
            else:
                st.phase = "lined_up"
        else:
            st.heading_deg = heading_from_vector(tx - st.x, ty - st.y)
            st.ground_speed = speed
            self._advance(dt)

    def _lineup_point(self) -> tuple[float, float]:
        assert self._runway is not None and self._runway_end is not None
        st = self.state
        along, _ = self._runway.along_cross(st.x, st.y)
        if self._runway_end == self._runway.ends[1]:
            along = self._runway.length_m - along
        along = max(along, 30.0)
        tx0, ty0 = self._runway.threshold(self._runway_end)
        dx, dy = self._runway.direction(self._runway_end)
        return (tx0 + dx * along, ty0 + dy * along)

    def _step_takeoff_roll(self, dt: float) -> None:
        st = self.state
        st.ground_speed = min(
            self.spec.perf("rotation_speed_mps"),
            st.ground_speed + self.spec.perf("accel_mps2") * dt,
        )
        self._advance(dt)
        if st.ground_speed >= self.spec.perf("rotation_speed_mps"):
            st.phase = "rotate"
            self._rotate_left_ms = ROTATE_DURATION_MS

    def _step_cruise(self, dt: float) -> None:
        st = self.state
        if self._target_altitude_m is not None:
            dz = self._target_altitude_m - st.z
            rate = self.spec.perf("climb_rate_mps")
            if abs(dz) <= rate * dt:
                st.z = self._target_altitude_m
                st.vertical_speed = 0.0
                self._target_altitude_m = None
            else:
                st.vertical_speed = math.copysign(rate, dz)
                st.z += st.vertical_speed * dt
        else:
            st.vertical_speed = 0.0
        self._advance(dt)

    def _step_glide(self, dt: float) -> None:
        st = self.state
        self._advance(dt)
        st.z = max(0.0, st.z + st.vertical_speed * dt)
        if st.z <= FLARE_ALTITUDE_M:
            st.phase = "flare"
            st.vertical_speed = -FLARE_SINK_MPS

    def _step_path(self, dt: float) -> None:
        st = self.state
        if self._path_i >= len(self._path):
            st.ground_speed = 0.0
            st.phase = "stop" if st.phase == "drive" else "stand"
            return
        default = (
            self.spec.perf("vehicle_speed_mps")
            if self.spec.actor_class == "vehicle"
            else self.spec.perf("wildlife_speed_mps")
        )
        speed = float(self.spec.behavior_params.get("speed_mps", default))
        tx, ty = self._path[self._path_i]
        d = math.hypot(tx - st.x, ty - st.y)
        if d < 1e-9:
            self._path_i += 1
            return
        st.heading_deg = heading_from_vector(tx - st.x, ty - st.y)
        travel = min(speed * dt, d)
        nx = st.x + (tx - st.x) / d * travel
        ny = st.y + (ty - st.y) / d * travel
        if self._blocked_by_hold(nx, ny):
            st.ground_speed = 0.0
            return
        st.ground_speed = speed
        st.x, st.y = nx, ny
        if travel >= d - 1e-9:
            self._path_i += 1

    def _blocked_by_hold(self, nx: float, ny: float) -> bool:
        for ident in self._hold_runways:
            for rw in self.runways:
                if rw.ident == ident and rw.protected_contains(
                    nx, ny, self.geometry.protected_margin_m
                ):
                    return True
        return False

    # -- radio ----------------------------------------------------------------

    def hears(self, frequency: str) -> bool:
        tuned = self.spec.tuned_frequency or (
            self.geometry.frequencies[0] if self.geometry.frequencies else None
        )
        return frequency == tuned

    def addressed_by(self, slots: ParsedSlots) -> tuple[bool, bool]:
        """(is_for_me, via_near_miss). Exact callsign match, or a near-miss
        the crew plausibly accepts when the misaddressed fault is armed."""
        if self.spec.callsign is None or slots.callsign is None:
            return (False, False)
        if slots.callsign == self.spec.callsign:
            return (True, False)
        if self.accept_near_miss and _near_callsign(slots.callsign, self.spec.callsign):
            return (True, True)
        return (False, False)

    def receive_command(
        self, slots: ParsedSlots, slot_conf: float, now_ms: int
    ) -> Optional[RadioReply]:
        """Confidence-gated command intake; returns the radio reply, if any."""
        st = self.state
        st.last_instruction_conf = slot_conf
        if slots.action is None:
            return None
        if slot_conf < self.conf_gate:
            return RadioReply(
                text=f"say again, {self.spec.callsign}",
                intent="clarification",
                executable=False,
            )
        cmd = BehaviorCommand(
            action=slots.action,
            runway=slots.runway,
            altitude_ft=slots.altitude_ft,
            effective_at_ms=now_ms,
        )
        executable = self._apply_command(cmd)
        if executable:
            st.pending_clearances.append(cmd)
        reply_slots = {
            "callsign": self.spec.callsign,
            "action": cmd.action,
            "runway": cmd.runway,
            "altitude_ft": cmd.altitude_ft,
        }
        text = render_readback(
            self.spec.callsign, cmd.action, runway=cmd.runway, altitude_ft=cmd.altitude_ft
        )
        return RadioReply(text=text, intent="readback", executable=executable, slots=reply_slots)

    def _apply_command(self, cmd: BehaviorCommand) -> bool:
        """Mutate phase per the command; False when not executable in this phase."""
        st = self.state
        action = cmd.action
        if action == "cleared_for_takeoff":
            if st.phase in ("holding_short", "lineup", "lined_up"):
                if st.phase == "lined_up":
                    st.phase = "takeoff_roll"
                else:
                    self._arm_runway(cmd.runway)
                    self._takeoff_after_lineup = True
                    st.phase = "lineup"
                self._hold_runways.clear()
                return True
            return False
        if action == "line_up_and_wait":
            if st.phase == "holding_short":
                self._arm_runway(cmd.runway)
                self._takeoff_after_lineup = False
                st.phase = "lineup"
                self._hold_runways.clear()
                return True
            return False
        if action == "cancel_takeoff_clearance":
            if st.phase in ("lineup", "lined_up", "takeoff_roll"):
                if st.phase == "takeoff_roll":
                    st.phase = "rollout"       # reject: decelerate on the runway
                else:
                    st.ground_speed = 0.0
                    st.phase = "lined_up" if st.phase != "lineup" else "holding_short"
                self._takeoff_after_lineup = False
                return True
            return st.phase == "holding_short"
        if action == "cleared_to_land":
            return st.phase in ("glide", "flare", "cruise")
        if action == "go_around":
            if st.phase in ("glide", "flare"):
                st.phase = "climb_out"
                st.vertical_speed = self.spec.perf("climb_rate_mps")
                return True
            return False
        if action == "hold_short":
            if cmd.runway:
                rw = find_runway(self.runways, cmd.runway)
                if rw is not None:
                    self._hold_runways.add(rw.ident)
                    return True
            return False
        if action in ("climb_maintain", "descend_maintain"):
            if st.phase in ("cruise", "climb_out") and cmd.altitude_ft:
                self._target_altitude_m = cmd.altitude_ft * 0.3048
                if st.phase == "climb_out":
                    st.phase = "cruise"
                return True
            return False
        if action == "proceed":
            if st.phase == "stop" and self._path_i < len(self._path):
                st.phase = "drive"
                st.ground_speed = float(
                    self.spec.behavior_params.get("speed_mps", self.spec.perf("vehicle_speed_mps"))
                )
                return True
            return False
        if action == "stop":
            if st.phase in ("drive", "walk"):
                st.phase = "stop"
                st.ground_speed = 0.0
                return True
            return False
        return False

    def _arm_runway(self, end_token: Optional[str]) -> None:
        if end_token:
            rw = find_runway(self.runways, end_token)
            if rw is not None:
                self._runway = rw
                self._runway_end = end_token


def _near_callsign(a: str, b: str) -> bool:
    if a == b or len(a) != len(b):
        return a == b
    return sum(x != y for x, y in zip(a, b)) == 1


class ScriptedAtc:
    """Controller behavior: acknowledge readbacks, repeat on 'say again'."""

    def __init__(self, spec: ActorSpec, max_repeats: int = 2):
        self.spec = spec
        self.max_repeats = max_repeats
        self._last_instruction: dict[str, str] = {}
        self._repeats: dict[str, int] = {}

    def note_instruction(self, addressed_to: Optional[str], text: str) -> None:
        if addressed_to:
            self._last_instruction[addressed_to] = text
            self._repeats.setdefault(addressed_to, 0)

    def react(self, speaker_callsign: Optional[str], text: str) -> Optional[RadioReply]:
        meta = classify_meta(text)
        if meta == "say_again" and speaker_callsign in self._last_instruction:
            if self._repeats.get(speaker_callsign, 0) >= self.max_repeats:
                return None
            self._repeats[speaker_callsign] = self._repeats.get(speaker_callsign, 0) + 1
            return RadioReply(
                text=self._last_instruction[speaker_callsign],
                intent="ack",
                addressed_to=speaker_callsign,
            )
        if meta == "roger":
            return None
        if speaker_callsign and speaker_callsign in self._last_instruction and meta is None:
            # Treat any parsed pilot transmission echoing an instruction as a readback.
            return RadioReply(
                text=f"{speaker_callsign}, roger", intent="roger", addressed_to=speaker_callsign
            )
        return None
