"""Declarative scenario model: schema, validation, seeded variants, conflict window.

Scenario files are UTF-8 JSON, one scenario per file, versioned with
``schema_version``. The shipped suite lives under ``skyloop/scenarios/<FAMILY>/``.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Optional

from .geometry import Runway, is_canonical_runway
from .kernel import derive_stream

SCHEMA_VERSION = 1

ACTOR_CLASSES = ("aircraft", "atc", "vehicle", "wildlife")
SCENES = ("airport_surface", "enroute")
CAMERA_MOUNTS = ("tower", "nose", "tail", "runway_fixed")
FAULT_VARIANTS = (
    "none",
    "bad_readback",
    "cancel_not_received",
    "misaddressed",
    "tight_timing",
)

AIRCRAFT_BEHAVIORS = ("approach", "hold_short", "cruise", "parked")
VEHICLE_BEHAVIORS = ("drive", "stop")
WILDLIFE_BEHAVIORS = ("walk", "fly", "stand")

DEFAULT_PERFORMANCE = {
    "accel_mps2": 2.0,
    "decel_mps2": 2.5,
    "rotation_speed_mps": 65.0,
    "climb_rate_mps": 12.0,
    "approach_speed_mps": 70.0,
    "glide_path_deg": 3.0,
    "taxi_speed_mps": 10.0,
    "vehicle_speed_mps": 8.0,
    "wildlife_speed_mps": 3.0,
    "cruise_speed_mps": 120.0,
}


class ScenarioParseError(Exception):
    """Unreadable or structurally ill-formed scenario input."""


@dataclass
class Violation:
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.path}: {self.message}"


@dataclass
class Pose:
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0
    heading_deg: float = 0.0


@dataclass
class ActorSpec:
    actor_id: str
    actor_class: str
    callsign: Optional[str]
    initial_pose: Pose
    behavior: str
    behavior_params: dict = field(default_factory=dict)
    performance: dict = field(default_factory=dict)
    adsb_equipped: bool = True
    tuned_frequency: Optional[str] = None

    def perf(self, key: str) -> float:
        return float(self.performance.get(key, DEFAULT_PERFORMANCE[key]))


@dataclass
class ScriptedTransmission:
    turn_id: str
    at_ms: int
    speaker: str
    frequency: str
    text: str
    addressed_to: Optional[str] = None
    snr_db: Optional[float] = None


@dataclass
class CameraSpec:
    camera_id: str
    mount: str
    pose: Pose
    mounted_on: Optional[str] = None
    fov_deg: float = 70.0
    sample_hz: float = 18.0
    ego_mask: bool = True


@dataclass
class RunwaySpec:
    ident: str
    threshold_lo: tuple[float, float]
    length_m: float
    width_m: float = 45.0

    def build(self) -> Runway:
        return Runway(self.ident, tuple(self.threshold_lo), self.length_m, self.width_m)


@dataclass
class SceneGeometry:
    frequencies: list[str] = field(default_factory=list)
    advisory_frequency: Optional[str] = None
    runways: list[RunwaySpec] = field(default_factory=list)
    waypoints: dict[str, tuple[float, float, float]] = field(default_factory=dict)
    protected_margin_m: float = 60.0
    separation_min_horizontal_m: float = 9300.0
    separation_min_vertical_m: float = 300.0
    visibility_m: float = 10000.0


@dataclass
class Perturbations:
    timing_ms: int = 0
    position_m: float = 0.0


@dataclass
class FaultSpec:
    variant: str = "none"
    target_actor: Optional[str] = None
    target_turn_id: Optional[str] = None


@dataclass
class ScenarioSpec:
    scenario_id: str
    scene: str
    geometry: SceneGeometry
    actors: list[ActorSpec]
    comm_timeline: list[ScriptedTransmission]
    cameras: list[CameraSpec]
    seed: int = 0
    family: str = ""
    description: str = ""
    duration_ms: int = 120_000
    perturbations: Perturbations = field(default_factory=Perturbations)
    fault: FaultSpec = field(default_factory=FaultSpec)
    conflict_annotation: Optional[int] = None
    derivable: bool = True
    profile_overrides: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def actor(self, actor_id: str) -> ActorSpec:
        for a in self.actors:
            if a.actor_id == actor_id:
                return a
        raise KeyError(actor_id)

    def callsigns(self) -> list[str]:
        return [a.callsign for a in self.actors if a.callsign]

    def runways(self) -> list[Runway]:
        return [r.build() for r in self.geometry.runways]


# ---------------------------------------------------------------------------
# JSON (de)serialization


def _pose_from(obj: dict) -> Pose:
    return Pose(
        x=float(obj.get("x", 0.0)),
        y=float(obj.get("y", 0.0)),
        z=float(obj.get("z", 0.0)),
        heading_deg=float(obj.get("heading_deg", 0.0)),
    )


def _pose_to(p: Pose) -> dict:
    return {"x": p.x, "y": p.y, "z": p.z, "heading_deg": p.heading_deg}


def scenario_from_dict(raw: dict) -> ScenarioSpec:
    try:
        geo = raw.get("geometry", {})
        geometry = SceneGeometry(
            frequencies=list(geo.get("frequencies", [])),
            advisory_frequency=geo.get("advisory_frequency"),
            runways=[
                RunwaySpec(
                    ident=r["id"],
                    threshold_lo=(float(r["threshold_lo"][0]), float(r["threshold_lo"][1])),
                    length_m=float(r["length_m"]),
                    width_m=float(r.get("width_m", 45.0)),
                )
                for r in geo.get("runways", [])
            ],
            waypoints={k: tuple(v) for k, v in geo.get("waypoints", {}).items()},
            protected_margin_m=float(geo.get("protected_margin_m", 60.0)),
            separation_min_horizontal_m=float(geo.get("separation_min_horizontal_m", 9300.0)),
            separation_min_vertical_m=float(geo.get("separation_min_vertical_m", 300.0)),
            visibility_m=float(geo.get("visibility_m", 10000.0)),
        )
        actors = [
            ActorSpec(
                actor_id=a["actor_id"],
                actor_class=a["class"],
                callsign=a.get("callsign"),
                initial_pose=_pose_from(a.get("initial_pose", {})),
                behavior=a.get("initial_behavior", {}).get("name", "parked"),
                behavior_params=dict(a.get("initial_behavior", {}).get("params", {})),
                performance=dict(a.get("performance", {})),
                adsb_equipped=bool(a.get("adsb_equipped", True)),
                tuned_frequency=a.get("tuned_frequency"),
            )
            for a in raw.get("actors", [])
        ]
        timeline = [
            ScriptedTransmission(
                turn_id=t["turn_id"],
                at_ms=int(t["at_ms"]),
                speaker=t["speaker"],
                frequency=t["frequency"],
                text=t["text"],
                addressed_to=t.get("addressed_to"),
                snr_db=t.get("snr_db"),
            )
            for t in raw.get("comm_timeline", [])
        ]
        cameras = [
            CameraSpec(
                camera_id=c["camera_id"],
                mount=c["mount"],
                pose=_pose_from(c.get("pose", {})),
                mounted_on=c.get("mounted_on"),
                fov_deg=float(c.get("fov_deg", 70.0)),
                sample_hz=float(c.get("sample_hz", 18.0)),
                ego_mask=bool(c.get("ego_mask", True)),
            )
            for c in raw.get("cameras", [])
        ]
        pert = raw.get("perturbations", {})
        fault = raw.get("fault", {})
        return ScenarioSpec(
            scenario_id=raw["scenario_id"],
            scene=raw.get("scene", "airport_surface"),
            geometry=geometry,
            actors=actors,
            comm_timeline=timeline,
            cameras=cameras,
            seed=int(raw.get("seed", 0)),
            family=raw.get("family", raw["scenario_id"].split("-")[0]),
            description=raw.get("description", ""),
            duration_ms=int(raw.get("duration_ms", 120_000)),
            perturbations=Perturbations(
                timing_ms=int(pert.get("timing_ms", 0)),
                position_m=float(pert.get("position_m", 0.0)),
            ),
            fault=FaultSpec(
                variant=fault.get("variant", "none"),
                target_actor=fault.get("target_actor"),
                target_turn_id=fault.get("target_turn_id"),
            ),
            conflict_annotation=raw.get("conflict_annotation"),
            derivable=bool(raw.get("derivable", True)),
            profile_overrides=dict(raw.get("profile_overrides", {})),
            schema_version=int(raw.get("schema_version", SCHEMA_VERSION)),
        )
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ScenarioParseError(f"ill-formed scenario: {exc!r}") from exc


def scenario_to_dict(spec: ScenarioSpec) -> dict:
    return {
        "schema_version": spec.schema_version,
        "scenario_id": spec.scenario_id,
        "family": spec.family,
        "description": spec.description,
        "scene": spec.scene,
        "duration_ms": spec.duration_ms,
        "seed": spec.seed,
        "geometry": {
            "frequencies": list(spec.geometry.frequencies),
            "advisory_frequency": spec.geometry.advisory_frequency,
            "runways": [
                {
                    "id": r.ident,
                    "threshold_lo": list(r.threshold_lo),
                    "length_m": r.length_m,
                    "width_m": r.width_m,
                }
                for r in spec.geometry.runways
            ],
            "waypoints": {k: list(v) for k, v in spec.geometry.waypoints.items()},
            "protected_margin_m": spec.geometry.protected_margin_m,
            "separation_min_horizontal_m": spec.geometry.separation_min_horizontal_m,
            "separation_min_vertical_m": spec.geometry.separation_min_vertical_m,
            "visibility_m": spec.geometry.visibility_m,
        },
        "actors": [
            {
                "actor_id": a.actor_id,
                "class": a.actor_class,
                "callsign": a.callsign,
                "initial_pose": _pose_to(a.initial_pose),
                "initial_behavior": {"name": a.behavior, "params": a.behavior_params},
                "performance": a.performance,
                "adsb_equipped": a.adsb_equipped,
                "tuned_frequency": a.tuned_frequency,
            }
            for a in spec.actors
        ],
        "comm_timeline": [
            {
                "turn_id": t.turn_id,
                "at_ms": t.at_ms,
                "speaker": t.speaker,
                "frequency": t.frequency,
                "addressed_to": t.addressed_to,
                "text": t.text,
                "snr_db": t.snr_db,
            }
            for t in spec.comm_timeline
        ],
        "cameras": [
            {
                "camera_id": c.camera_id,
                "mount": c.mount,
                "mounted_on": c.mounted_on,
                "pose": _pose_to(c.pose),
                "fov_deg": c.fov_deg,
                "sample_hz": c.sample_hz,
                "ego_mask": c.ego_mask,
            }
            for c in spec.cameras
        ],
        "perturbations": {
            "timing_ms": spec.perturbations.timing_ms,
            "position_m": spec.perturbations.position_m,
        },
        "fault": {
            "variant": spec.fault.variant,
            "target_actor": spec.fault.target_actor,
            "target_turn_id": spec.fault.target_turn_id,
        },
        "conflict_annotation": spec.conflict_annotation,
        "derivable": spec.derivable,
        "profile_overrides": spec.profile_overrides,
    }


def load_scenario(path: str | Path) -> ScenarioSpec:
    try:
        raw = json.loads(Path(path).read_text("utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ScenarioParseError(f"cannot read scenario {path}: {exc}") from exc
    return scenario_from_dict(raw)


# ---------------------------------------------------------------------------
# Validation


def validate(spec: ScenarioSpec) -> list[Violation]:
    """Check every schema invariant; empty list means the scenario is sound."""
    out: list[Violation] = []

    if spec.scene not in SCENES:
        out.append(Violation("scene", f"unknown scene {spec.scene!r}"))
    if spec.duration_ms <= 0:
        out.append(Violation("duration_ms", "must be positive"))

    for i, r in enumerate(spec.geometry.runways):
        ends = r.ident.split("/")
        if len(ends) != 2 or not all(is_canonical_runway(e) for e in ends):
            out.append(
                Violation(
                    f"geometry.runways[{i}].id",
                    f"runway ident {r.ident!r} must be two canonical tokens like '01/19'",
                )
            )
            continue
        try:
            r.build()
        except ValueError as exc:
            out.append(Violation(f"geometry.runways[{i}]", str(exc)))

    ids = [a.actor_id for a in spec.actors]
    dup = {i for i in ids if ids.count(i) > 1}
    for d in sorted(dup):
        out.append(Violation("actors", f"duplicate actor_id {d!r}"))

    for i, a in enumerate(spec.actors):
        path = f"actors[{i}]"
        if a.actor_class not in ACTOR_CLASSES:
            out.append(Violation(f"{path}.class", f"unknown class {a.actor_class!r}"))
            continue
        if a.actor_class == "wildlife":
            if a.callsign is not None:
                out.append(Violation(f"{path}.callsign", "wildlife must not have a callsign"))
            if a.behavior not in WILDLIFE_BEHAVIORS:
                out.append(Violation(f"{path}.initial_behavior", f"unknown behavior {a.behavior!r}"))
        else:
            if not a.callsign:
                out.append(Violation(f"{path}.callsign", f"{a.actor_class} actors require a callsign"))
        if not a.adsb_equipped and a.actor_class not in ("aircraft", "wildlife"):
            out.append(
                Violation(
                    f"{path}.adsb_equipped",
                    "only aircraft and wildlife may be unequipped",
                )
            )
        if a.actor_class == "aircraft" and a.behavior not in AIRCRAFT_BEHAVIORS:
            out.append(Violation(f"{path}.initial_behavior", f"unknown behavior {a.behavior!r}"))
        if a.actor_class == "vehicle" and a.behavior not in VEHICLE_BEHAVIORS:
            out.append(Violation(f"{path}.initial_behavior", f"unknown behavior {a.behavior!r}"))
        if a.tuned_frequency and a.tuned_frequency not in spec.geometry.frequencies:
            out.append(
                Violation(f"{path}.tuned_frequency", f"{a.tuned_frequency!r} not in frequency list")
            )
        rwy_end = a.behavior_params.get("runway_end")
        if rwy_end is not None:
            if not is_canonical_runway(str(rwy_end)):
                out.append(
                    Violation(
                        f"{path}.initial_behavior.params.runway_end",
                        f"{rwy_end!r} is not canonical (use two-digit tokens like '01')",
                    )
                )
            elif not any(str(rwy_end) in r.ident.split("/") for r in spec.geometry.runways):
                out.append(
                    Violation(
                        f"{path}.initial_behavior.params.runway_end",
                        f"no runway with end {rwy_end!r}",
                    )
                )

    turn_ids = set()
    for i, t in enumerate(spec.comm_timeline):
        path = f"comm_timeline[{i}]"
        if t.turn_id in turn_ids:
            out.append(Violation(f"{path}.turn_id", f"duplicate turn_id {t.turn_id!r}"))
        turn_ids.add(t.turn_id)
        if t.at_ms < 0:
            out.append(Violation(f"{path}.at_ms", "must be >= 0"))
        if t.speaker not in ids:
            out.append(Violation(f"{path}.speaker", f"unknown actor {t.speaker!r}"))
        if t.frequency not in spec.geometry.frequencies:
            out.append(Violation(f"{path}.frequency", f"{t.frequency!r} not in frequency list"))

    if spec.geometry.advisory_frequency and spec.geometry.advisory_frequency not in spec.geometry.frequencies:
        out.append(
            Violation("geometry.advisory_frequency", "not in frequency list")
        )

    for i, c in enumerate(spec.cameras):
        path = f"cameras[{i}]"
        if c.mount not in CAMERA_MOUNTS:
            out.append(Violation(f"{path}.mount", f"unknown mount {c.mount!r}"))
        if c.mount in ("nose", "tail") and not c.mounted_on:
            out.append(Violation(f"{path}.mounted_on", f"{c.mount} cameras require mounted_on"))
        if c.mounted_on and c.mounted_on not in ids:
            out.append(Violation(f"{path}.mounted_on", f"unknown actor {c.mounted_on!r}"))
        if not (1.0 <= c.sample_hz <= 30.0):
            out.append(Violation(f"{path}.sample_hz", "must be in [1, 30] Hz"))

    if spec.fault.variant not in FAULT_VARIANTS:
        out.append(Violation("fault.variant", f"unknown variant {spec.fault.variant!r}"))
    if spec.fault.target_actor and spec.fault.target_actor not in ids:
        out.append(Violation("fault.target_actor", f"unknown actor {spec.fault.target_actor!r}"))
    if spec.fault.target_turn_id and spec.fault.target_turn_id not in turn_ids:
        out.append(Violation("fault.target_turn_id", f"unknown turn {spec.fault.target_turn_id!r}"))

    if spec.conflict_annotation is None and not spec.derivable:
        out.append(
            Violation(
                "conflict_annotation",
                "scenario without annotation must be tagged derivable",
            )
        )
    return out


# ---------------------------------------------------------------------------
# Seeded variants


def expand_variant(spec: ScenarioSpec, seed: int) -> ScenarioSpec:
    """Apply reproducible timing/position jitter; pure in (spec, seed)."""
    stream = derive_stream(seed, "geometry_jitter")
    out = copy.deepcopy(spec)
    out.seed = seed
    tb = spec.perturbations.timing_ms
    pb = spec.perturbations.position_m
    for t in out.comm_timeline:
        jitter = int(round(stream.uniform(-tb, tb)))
        t.at_ms = max(0, t.at_ms + jitter)
    for a in out.actors:
        dx = stream.uniform(-pb, pb)
        dy = stream.uniform(-pb, pb)
        a.initial_pose.x += dx
        a.initial_pose.y += dy
    return out


# ---------------------------------------------------------------------------
# Conflict-window derivation (ground truth)

NO_CONFLICT: Optional[int] = None


@dataclass
class ClearanceEvent:
    """Ground-truth authorization event extracted from the comm flow."""

    t_ms: int
    actor_id: str
    kind: str          # "granted" | "cancel_received"
    runway_end: Optional[str] = None


@dataclass
class TraceSample:
    t_ms: int
    positions: dict[str, tuple[float, float, float]] = field(default_factory=dict)
    velocities: dict[str, tuple[float, float, float]] = field(default_factory=dict)


@dataclass
class RunTrace:
    samples: list[TraceSample] = field(default_factory=list)
    clearances: list[ClearanceEvent] = field(default_factory=list)

    def end_ms(self) -> int:
        return self.samples[-1].t_ms if self.samples else 0


def _runway_for_end(spec: ScenarioSpec, end: str) -> Optional[str]:
    for r in spec.geometry.runways:
        if end in r.ident.split("/"):
            return r.ident
    return None


def _authorization_intervals(
    spec: ScenarioSpec, trace: RunTrace
) -> dict[str, list[tuple[str, int, int]]]:
    """Per runway ident: (actor_id, open_ms, close_ms) authorization intervals.

    An interval opens at clearance delivery and closes at cancellation receipt
    or observed vacation (the actor entered and then cleared the protected
    area, or climbed well above it).
    """
    end_ms = trace.end_ms() or spec.duration_ms
    runways = {r.ident: r.build() for r in spec.geometry.runways}
    margin = spec.geometry.protected_margin_m
    out: dict[str, list[tuple[str, int, int]]] = {ident: [] for ident in runways}

    granted: list[tuple[int, str, str]] = []
    cancels: dict[tuple[str, str], int] = {}
    for ev in sorted(trace.clearances, key=lambda e: (e.t_ms, e.actor_id)):
        if ev.runway_end is None:
            continue
        ident = _runway_for_end(spec, ev.runway_end)
        if ident is None:
            continue
        if ev.kind == "granted":
            granted.append((ev.t_ms, ev.actor_id, ident))
        elif ev.kind == "cancel_received":
            key = (ev.actor_id, ident)
            if key not in cancels:
                cancels[key] = ev.t_ms

    for t_open, actor_id, ident in granted:
        close = cancels.get((actor_id, ident))
        if close is not None and close >= t_open:
            out[ident].append((actor_id, t_open, close))
            continue
        close = end_ms
        rw = runways[ident]
        entered = False
        for s in trace.samples:
            if s.t_ms < t_open or actor_id not in s.positions:
                continue
            x, y, z = s.positions[actor_id]
            inside = rw.protected_contains(x, y, margin) and z < 150.0
            if inside:
                entered = True
            elif entered:
                close = s.t_ms
                break
        out[ident].append((actor_id, t_open, close))
    return out


def _occupancy_intervals(
    spec: ScenarioSpec, trace: RunTrace
) -> dict[str, list[tuple[str, int, int]]]:
    runways = {r.ident: r.build() for r in spec.geometry.runways}
    margin = spec.geometry.protected_margin_m
    out: dict[str, list[tuple[str, int, int]]] = {ident: [] for ident in runways}
    for ident, rw in runways.items():
        open_at: dict[str, int] = {}
        for s in trace.samples:
            for actor_id, (x, y, z) in s.positions.items():
                inside = rw.protected_contains(x, y, margin) and z < 150.0
                if inside and actor_id not in open_at:
                    open_at[actor_id] = s.t_ms
                elif not inside and actor_id in open_at:
                    out[ident].append((actor_id, open_at.pop(actor_id), s.t_ms))
        end = trace.end_ms()
        for actor_id, t0 in open_at.items():
            out[ident].append((actor_id, t0, end))
    return out


def _surface_conflict(spec: ScenarioSpec, trace: RunTrace) -> Optional[int]:
    auth = _authorization_intervals(spec, trace)
    occ = _occupancy_intervals(spec, trace)
    best: Optional[int] = None
    for ident in auth:
        intervals = auth[ident] + occ[ident]
        # Earliest instant at which two distinct actors hold the runway.
        for i, (a_id, a0, a1) in enumerate(intervals):
            for b_id, b0, b1 in intervals[i + 1 :]:
                if a_id == b_id:
                    continue
                lo = max(a0, b0)
                hi = min(a1, b1)
                if lo < hi and (best is None or lo < best):
                    best = lo
    return best


def _pairwise_violation_predicted(
    pa: tuple[float, float, float],
    va: tuple[float, float, float],
    pb: tuple[float, float, float],
    vb: tuple[float, float, float],
    min_h: float,
    min_v: float,
    horizon_s: float = 600.0,
) -> bool:
    """Linear extrapolation: do the horizontal and vertical violation windows overlap?"""
    dx, dy, dz = pa[0] - pb[0], pa[1] - pb[1], pa[2] - pb[2]
    dvx, dvy, dvz = va[0] - vb[0], va[1] - vb[1], va[2] - vb[2]

    # Horizontal window: |(dx,dy) + (dvx,dvy) t| < min_h
    a = dvx * dvx + dvy * dvy
    b = 2.0 * (dx * dvx + dy * dvy)
    c = dx * dx + dy * dy - min_h * min_h
    if a < 1e-12:
        if c >= 0:
            return False
        th = (0.0, horizon_s)
    else:
        disc = b * b - 4 * a * c
        if disc <= 0:
            return False
        root = disc ** 0.5
        th = ((-b - root) / (2 * a), (-b + root) / (2 * a))

    # Vertical window: |dz + dvz t| < min_v
    if abs(dvz) < 1e-12:
        if abs(dz) >= min_v:
            return False
        tv = (0.0, horizon_s)
    else:
        t1 = (-min_v - dz) / dvz
        t2 = (min_v - dz) / dvz
        tv = (min(t1, t2), max(t1, t2))

    lo = max(th[0], tv[0], 0.0)
    hi = min(th[1], tv[1], horizon_s)
    return lo < hi


def _enroute_conflict(spec: ScenarioSpec, trace: RunTrace) -> Optional[int]:
    min_h = spec.geometry.separation_min_horizontal_m
    min_v = spec.geometry.separation_min_vertical_m
    aircraft = sorted(a.actor_id for a in spec.actors if a.actor_class == "aircraft")
    for s in trace.samples:
        for i, a_id in enumerate(aircraft):
            for b_id in aircraft[i + 1 :]:
                if a_id not in s.positions or b_id not in s.positions:
                    continue
                if _pairwise_violation_predicted(
                    s.positions[a_id],
                    s.velocities.get(a_id, (0.0, 0.0, 0.0)),
                    s.positions[b_id],
                    s.velocities.get(b_id, (0.0, 0.0, 0.0)),
                    min_h,
                    min_v,
                ):
                    return s.t_ms
    return NO_CONFLICT


def derive_conflict_open(spec: ScenarioSpec, trace: RunTrace) -> Optional[int]:
    """Conflict-window opening time in ms, or None for nominal runs.

    An annotated scenario wins over anything observed in the trace. Surface
    scenes use overlapping authorization/occupancy intervals; enroute scenes
    use the earliest sample whose linear extrapolation violates the
    separation minima.
    """
    if spec.conflict_annotation is not None:
        return int(spec.conflict_annotation)
    if spec.scene == "enroute":
        return _enroute_conflict(spec, trace)
    return _surface_conflict(spec, trace)


# ---------------------------------------------------------------------------
# Shipped suite access


def _suite_root():
    return resources.files("skyloop.scenarios")


def list_scenarios() -> list[str]:
    """Scenario ids of the shipped suite."""
    out = []
    for family_dir in _suite_root().iterdir():
        if not family_dir.is_dir():
            continue
        for f in family_dir.iterdir():
            if f.name.endswith(".json"):
                out.append(f.name[: -len(".json")])
    return sorted(out)


def load_bundled(scenario_id: str) -> ScenarioSpec:
    for family_dir in _suite_root().iterdir():
        if not family_dir.is_dir():
            continue
        candidate = family_dir.joinpath(scenario_id + ".json")
        if candidate.is_file():
            return scenario_from_dict(json.loads(candidate.read_text("utf-8")))
    raise KeyError(f"no bundled scenario {scenario_id!r}")


def family_scenarios(family: str) -> list[ScenarioSpec]:
    out = []
    for sid in list_scenarios():
        if sid.startswith(family):
            out.append(load_bundled(sid))
    return out
