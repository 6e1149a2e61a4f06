"""Surveillance: ADS-B tracks, TTG/CPA math, simulated vision, corroboration.

The vision simulator is geometric: instead of rendered frames, each camera
tests field-of-view, range, and visibility against the world state, with a
range-dependent detection probability and confidence. Ground truth for
scoring comes from exact actor footprints, independent of this simulator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .geometry import Runway, unit_from_heading
from .kernel import RandomStream
from .radio import LatencyProfile
from .scenario import CameraSpec

ADSB_CADENCE_MS = 1000
ADSB_LATENCY_MS = 50
SPEED_EPSILON_MPS = 0.5

CLASS_LABELS = {"aircraft": "airplane", "vehicle": "truck", "wildlife": "bird"}
CLASS_RANGE_SCALE = {"airplane": 1.0, "truck": 0.8, "bird": 0.5}
CLASS_HALF_SIZE_M = {"airplane": 15.0, "truck": 2.5, "bird": 0.5}


@dataclass
class Track:
    actor_id: str
    callsign: Optional[str]
    t_adsb_out_ms: int
    x: float
    y: float
    z: float
    ground_speed: float
    vertical_speed: float
    heading_deg: float
    equipped: bool = True

    def position(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)

    def velocity(self) -> tuple[float, float, float]:
        ux, uy = unit_from_heading(self.heading_deg)
        return (ux * self.ground_speed, uy * self.ground_speed, self.vertical_speed)

    def as_record(self) -> dict:
        return {
            "actor_id": self.actor_id,
            "callsign": self.callsign,
            "t_adsb_out_ms": self.t_adsb_out_ms,
            "x": round(self.x, 3),
            "y": round(self.y, 3),
            "z": round(self.z, 3),
            "ground_speed": round(self.ground_speed, 3),
            "vertical_speed": round(self.vertical_speed, 3),
            "heading_deg": round(self.heading_deg, 3),
        }


@dataclass
class Detection:
    camera_id: str
    ts_ms: int                      # frame time
    class_label: str
    confidence: float
    bbox: tuple[float, float, float, float]   # normalized x, y, w, h
    actor_id_truth: str             # hidden ground-truth link, log only
    est_x: float = 0.0
    est_y: float = 0.0
    est_speed_mps: float = 0.0

    def as_record(self) -> dict:
        return {
            "camera_id": self.camera_id,
            "ts_ms": self.ts_ms,
            "class_label": self.class_label,
            "confidence": round(self.confidence, 6),
            "bbox": [round(v, 6) for v in self.bbox],
            "actor_id_truth": self.actor_id_truth,
        }


@dataclass
class OccupancyFlag:
    runway: str
    occupied: bool = False
    activity: bool = False
    since_ms: int = 0
    corroboration: int = 0
    source: str = "vision"

    def as_record(self) -> dict:
        return {
            "runway": self.runway,
            "occupied": self.occupied,
            "activity": self.activity,
            "since_ms": self.since_ms,
            "corroboration": self.corroboration,
            "source": self.source,
        }


@dataclass
class FlightContextSlice:
    ownship: Optional[Track] = None
    expected_runway: Optional[str] = None
    cleared_runway: Optional[str] = None
    ttg_s: Optional[float] = None
    nearby: list[Track] = field(default_factory=list)


# ---------------------------------------------------------------------------
# Kinematic analytics


def compute_ttg(track: Track, target_xy: tuple[float, float]) -> Optional[float]:
    """Seconds to reach the along-path projection of the target.

    None when effectively stationary; +inf when moving away.
    """
    if track.ground_speed <= SPEED_EPSILON_MPS:
        return None
    ux, uy = unit_from_heading(track.heading_deg)
    d_along = (target_xy[0] - track.x) * ux + (target_xy[1] - track.y) * uy
    if d_along < 0:
        return math.inf
    return d_along / track.ground_speed


def compute_cpa(a: Track, b: Track) -> tuple[float, float]:
    """Closed-form closest point of approach for straight-line extrapolation.

    Returns (t_cpa_s, d_cpa_m); t_cpa is 0 when the pair is diverging.
    """
    pa, pb = a.position(), b.position()
    va, vb = a.velocity(), b.velocity()
    dp = (pa[0] - pb[0], pa[1] - pb[1], pa[2] - pb[2])
    dv = (va[0] - vb[0], va[1] - vb[1], va[2] - vb[2])
    dv2 = dv[0] ** 2 + dv[1] ** 2 + dv[2] ** 2
    if dv2 < 1e-12:
        return (0.0, math.sqrt(dp[0] ** 2 + dp[1] ** 2 + dp[2] ** 2))
    t = -(dp[0] * dv[0] + dp[1] * dv[1] + dp[2] * dv[2]) / dv2
    t = max(0.0, t)
    cx = dp[0] + dv[0] * t
    cy = dp[1] + dv[1] * t
    cz = dp[2] + dv[2] * t
    return (t, math.sqrt(cx * cx + cy * cy + cz * cz))


# ---------------------------------------------------------------------------
# ADS-B


@dataclass
class WorldActor:
    """Minimal world-state view the sensors need for one actor."""

    actor_id: str
    actor_class: str
    callsign: Optional[str]
    x: float
    y: float
    z: float
    heading_deg: float
    ground_speed: float
    vertical_speed: float
    adsb_equipped: bool


def emit_tracks(
    world: list[WorldActor], t_adsb_in_ms: int, latency_ms: int = ADSB_LATENCY_MS
) -> list[Track]:
    """One track per equipped actor; t_adsb_out = t_adsb_in + processing latency."""
    out = []
    for a in world:
        if not a.adsb_equipped:
            continue
        out.append(
            Track(
                actor_id=a.actor_id,
                callsign=a.callsign,
                t_adsb_out_ms=t_adsb_in_ms + latency_ms,
                x=a.x,
                y=a.y,
                z=a.z,
                ground_speed=a.ground_speed,
                vertical_speed=a.vertical_speed,
                heading_deg=a.heading_deg,
            )
        )
    return out


# ---------------------------------------------------------------------------
# Vision


@dataclass
class VisionProfile:
    latency: LatencyProfile = field(default_factory=lambda: LatencyProfile.constant(415))
    first_detect_range_m: float = 125.0
    gamma: float = 1.0
    range_noise_frac: float = 0.02
    tau_vis: float = 0.7
    corroboration_k: int = 2
    persistence_frames: int = 5
    window_ms: int = 1000
    staleness_ms: int = 2000
    activity_speed_mps: float = 0.5


def detection_probability(range_m: float, effective_range_m: float, gamma: float = 1.0) -> float:
    """Monotone non-increasing in range; 0 at/after the effective range."""
    if effective_range_m <= 0:
        return 0.0
    p = 1.0 - range_m / effective_range_m
    return max(0.0, min(1.0, p)) ** gamma


def detection_confidence(range_m: float, effective_range_m: float) -> float:
    if effective_range_m <= 0:
        return 0.0
    return max(0.0, min(1.0, 1.0 - 0.5 * range_m / effective_range_m))


class Camera:
    """Pose resolution and geometric detection for one camera."""

    def __init__(self, spec: CameraSpec, profile: VisionProfile, visibility_m: float):
        self.spec = spec
        self.profile = profile
        self.visibility_m = visibility_m
        self.sample_period_ms = max(1, int(round(1000.0 / spec.sample_hz)))

    def pose(self, world_by_id: dict[str, WorldActor]) -> tuple[float, float, float, float]:
        s = self.spec.pose
        if self.spec.mounted_on:
            host = world_by_id[self.spec.mounted_on]
            ux, uy = unit_from_heading(host.heading_deg)
            nx, ny = -uy, ux
            x = host.x + ux * s.x + nx * s.y
            y = host.y + uy * s.x + ny * s.y
            return (x, y, host.z + s.z, (host.heading_deg + s.heading_deg) % 360.0)
        return (s.x, s.y, s.z, s.heading_deg)

    def simulate_frame(
        self, world: list[WorldActor], t_frame_ms: int, stream: RandomStream
    ) -> list[Detection]:
        world_by_id = {a.actor_id: a for a in world}
        cx, cy, cz, cam_heading = self.pose(world_by_id)
        fov = self.spec.fov_deg
        fov_rad = math.radians(fov)
        vfov_rad = fov_rad * 0.5625
        out: list[Detection] = []
        for a in world:
            label = CLASS_LABELS.get(a.actor_class)
            if label is None:
                continue
            if self.spec.ego_mask and self.spec.mounted_on == a.actor_id:
                continue
            dx, dy, dz = a.x - cx, a.y - cy, a.z - cz
            rng = math.sqrt(dx * dx + dy * dy + dz * dz)
            if rng < 1e-6 or rng > self.visibility_m:
                continue
            bearing = math.degrees(math.atan2(dx, dy))
            delta = (bearing - cam_heading + 180.0) % 360.0 - 180.0
            if abs(delta) > fov / 2.0:
                continue
            eff = min(
                self.profile.first_detect_range_m * CLASS_RANGE_SCALE[label],
                self.visibility_m,
            )
            p = detection_probability(rng, eff, self.profile.gamma)
            if p <= 0.0 or stream.random() >= p:
                continue
            conf = detection_confidence(rng, eff)
            half = CLASS_HALF_SIZE_M[label]
            ang_w = 2.0 * math.atan2(half, rng)
            ang_h = 2.0 * math.atan2(half * 0.5, rng)
            w = min(1.0, ang_w / fov_rad)
            h = min(1.0, ang_h / vfov_rad)
            horiz = math.hypot(dx, dy)
            elev = math.atan2(dz, horiz) if horiz > 1e-9 else 0.0
            bx = min(1.0 - w, max(0.0, 0.5 + delta / fov - w / 2.0))
            by = min(1.0 - h, max(0.0, 0.5 - elev / vfov_rad - h / 2.0))
            noise = self.profile.range_noise_frac * rng
            out.append(
                Detection(
                    camera_id=self.spec.camera_id,
                    ts_ms=t_frame_ms,
                    class_label=label,
                    confidence=conf,
                    bbox=(bx, by, w, h),
                    actor_id_truth=a.actor_id,
                    est_x=a.x + stream.normal(0.0, noise),
                    est_y=a.y + stream.normal(0.0, noise),
                    est_speed_mps=a.ground_speed,
                )
            )
        return out


# ---------------------------------------------------------------------------
# Corroboration


@dataclass
class _Observation:
    camera_id: str
    ts_ms: int
    confidence: float
    actor_id_truth: str
    speed_mps: float


class Corroborator:
    """Turns per-runway detection streams into latched occupancy flags.

    Occupancy asserts when K distinct cameras confirm within the window, or
    one camera stays above tau_vis for M consecutive frames. Once asserted
    it persists until no confirming detection arrives for staleness_ms.
    """

    def __init__(self, runways: list[Runway], margin_m: float, profile: VisionProfile):
        self.runways = runways
        self.margin_m = margin_m
        self.profile = profile
        self._obs: dict[str, list[_Observation]] = {r.ident: [] for r in runways}
        self._persist: dict[tuple[str, str], int] = {}
        self.flags: dict[str, OccupancyFlag] = {
            r.ident: OccupancyFlag(runway=r.ident) for r in runways
        }

    def ingest(self, detections: list[Detection], now_ms: int) -> list[OccupancyFlag]:
        """Feed one completed detection batch; returns flags that changed."""
        for det in detections:
            for rw in self.runways:
                if rw.protected_contains(det.est_x, det.est_y, self.margin_m):
                    self._obs[rw.ident].append(
                        _Observation(
                            camera_id=det.camera_id,
                            ts_ms=det.ts_ms,
                            confidence=det.confidence,
                            actor_id_truth=det.actor_id_truth,
                            speed_mps=det.est_speed_mps,
                        )
                    )
                    key = (rw.ident, det.camera_id)
                    if det.confidence >= self.profile.tau_vis:
                        self._persist[key] = self._persist.get(key, 0) + 1
                    else:
                        self._persist[key] = 0
        return self.refresh(now_ms)

    def refresh(self, now_ms: int) -> list[OccupancyFlag]:
        changed = []
        for ident, obs in self._obs.items():
            window_lo = now_ms - self.profile.window_ms
            recent = [o for o in obs if o.ts_ms >= window_lo]
            cameras = sorted({o.camera_id for o in recent})
            multi_cam = len(cameras) >= self.profile.corroboration_k
            persistent = any(
                self._persist.get((ident, cam), 0) >= self.profile.persistence_frames
                for cam in cameras
            )
            flag = self.flags[ident]
            prev = (flag.occupied, flag.activity, flag.corroboration)
            active = any(o.speed_mps >= self.profile.activity_speed_mps for o in recent)
            if multi_cam or persistent:
                if not flag.occupied:
                    flag.occupied = True
                    flag.since_ms = now_ms
                flag.corroboration = len(cameras)
                flag.activity = active
            elif flag.occupied:
                last = max((o.ts_ms for o in obs), default=-10**12)
                if now_ms - last >= self.profile.staleness_ms:
                    flag.occupied = False
                    flag.activity = False
                    flag.corroboration = 0
                    flag.since_ms = now_ms
                    for cam in list(self._persist):
                        if cam[0] == ident:
                            self._persist[cam] = 0
                else:
                    flag.corroboration = len(cameras)
                    flag.activity = active or flag.activity
            # Trim history beyond the staleness horizon.
            horizon = now_ms - max(self.profile.staleness_ms, self.profile.window_ms) - 1000
            if obs and obs[0].ts_ms < horizon:
                self._obs[ident] = [o for o in obs if o.ts_ms >= horizon]
            if (flag.occupied, flag.activity, flag.corroboration) != prev:
                changed.append(flag)
        return changed

    def mean_confirming_confidence(self, ident: str, now_ms: int) -> float:
        window_lo = now_ms - self.profile.window_ms
        recent = [o.confidence for o in self._obs[ident] if o.ts_ms >= window_lo]
        return sum(recent) / len(recent) if recent else 0.0
