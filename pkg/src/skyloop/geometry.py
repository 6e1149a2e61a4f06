"""Scene-frame geometry: runway centerlines, protected areas, token math.

The scene frame is local flat-earth Cartesian: meters, x east, y north,
z up. Runways are named centerline segments; a runway's protected area is
its rectangle dilated laterally by a configurable margin (60 m default).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Optional

PROTECTED_MARGIN_M = 60.0

_RUNWAY_TOKEN_RE = re.compile(r"^(0[1-9]|[12][0-9]|3[0-6])([LCR]?)$")


def is_canonical_runway(token: str) -> bool:
    """True for two-digit tokens "01".."36" with optional L/C/R suffix."""
    return bool(_RUNWAY_TOKEN_RE.match(token))


def runway_heading_deg(token: str) -> float:
    if not is_canonical_runway(token):
        raise ValueError(f"not a canonical runway token: {token!r}")
    return int(token[:2]) * 10.0


def reciprocal_runway(token: str) -> str:
    """Opposite-end token: number shifted by 18, L and R swapped."""
    m = _RUNWAY_TOKEN_RE.match(token)
    if not m:
        raise ValueError(f"not a canonical runway token: {token!r}")
    num = (int(m.group(1)) + 17) % 36 + 1
    suffix = {"L": "R", "R": "L", "C": "C", "": ""}[m.group(2)]
    return f"{num:02d}{suffix}"


def unit_from_heading(heading_deg: float) -> tuple[float, float]:
    """Unit vector (x east, y north) for a compass heading in degrees."""
    rad = math.radians(heading_deg)
    return (math.sin(rad), math.cos(rad))


def heading_from_vector(dx: float, dy: float) -> float:
    return math.degrees(math.atan2(dx, dy)) % 360.0


def dist2(ax: float, ay: float, bx: float, by: float) -> float:
    return math.hypot(bx - ax, by - ay)


def dist3(a: tuple[float, float, float], b: tuple[float, float, float]) -> float:
    return math.sqrt((b[0] - a[0]) ** 2 + (b[1] - a[1]) ** 2 + (b[2] - a[2]) ** 2)


@dataclass
class Runway:
    """A named runway: centerline segment between two reciprocal thresholds.

    ``threshold_lo`` is the threshold of the lower-numbered end; the
    centerline runs from there along that end's heading.
    """

    ident: str               # e.g. "01/19"
    threshold_lo: tuple[float, float]
    length_m: float
    width_m: float = 45.0

    def __post_init__(self) -> None:
        ends = self.ident.split("/")
        if len(ends) != 2 or not all(is_canonical_runway(e) for e in ends):
            raise ValueError(f"runway ident must be like '01/19', got {self.ident!r}")
        if reciprocal_runway(ends[0]) != ends[1]:
            raise ValueError(f"runway ends are not reciprocal: {self.ident!r}")
        self.ends = (ends[0], ends[1])
        self._dir = unit_from_heading(runway_heading_deg(ends[0]))

    def threshold(self, end: str) -> tuple[float, float]:
        if end == self.ends[0]:
            return self.threshold_lo
        if end == self.ends[1]:
            return (
                self.threshold_lo[0] + self._dir[0] * self.length_m,
                self.threshold_lo[1] + self._dir[1] * self.length_m,
            )
        raise KeyError(f"runway {self.ident} has no end {end!r}")

    def direction(self, end: str) -> tuple[float, float]:
        """Unit takeoff/landing direction when operating on the given end."""
        if end == self.ends[0]:
            return self._dir
        if end == self.ends[1]:
            return (-self._dir[0], -self._dir[1])
        raise KeyError(f"runway {self.ident} has no end {end!r}")

    def has_end(self, end: str) -> bool:
        return end in self.ends

    def along_cross(self, x: float, y: float) -> tuple[float, float]:
        """Coordinates in the runway frame: along from threshold_lo, signed cross."""
        rx = x - self.threshold_lo[0]
        ry = y - self.threshold_lo[1]
        along = rx * self._dir[0] + ry * self._dir[1]
        cross = rx * -self._dir[1] + ry * self._dir[0]
        return (along, cross)

    def protected_contains(self, x: float, y: float, margin_m: float = PROTECTED_MARGIN_M) -> bool:
        """Inside the runway rectangle dilated laterally by margin_m."""
        along, cross = self.along_cross(x, y)
        half = self.width_m / 2.0 + margin_m
        return 0.0 <= along <= self.length_m and abs(cross) <= half

    def corners(self, margin_m: float = 0.0) -> list[tuple[float, float]]:
        """Rectangle corners, optionally laterally dilated (for rendering)."""
        half = self.width_m / 2.0 + margin_m
        nx, ny = -self._dir[1], self._dir[0]
        lo, hi = self.threshold_lo, self.threshold(self.ends[1])
        return [
            (lo[0] + nx * half, lo[1] + ny * half),
            (hi[0] + nx * half, hi[1] + ny * half),
            (hi[0] - nx * half, hi[1] - ny * half),
            (lo[0] - nx * half, lo[1] - ny * half),
        ]


def find_runway(runways: list[Runway], end_token: str) -> Optional[Runway]:
    for rw in runways:
        if rw.has_end(end_token):
            return rw
    return None
