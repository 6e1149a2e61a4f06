"""Append-only event log, latency ledger, per-run metrics, batch aggregation.

The JSONL event log is the single source of truth: the latency ledger and
all metrics are derived from its records, so live and replayed computation
agree bit-exactly. All timestamps are integer milliseconds on the shared
simulation clock.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Optional


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


@dataclass
class EventRecord:
    ts_ms: int
    kind: str
    payload: dict

    def line(self) -> str:
        return canonical_json({"ts_ms": self.ts_ms, "kind": self.kind, "payload": self.payload})


class EventLog:
    """Ordered, append-only run log; one JSON object per line."""

    def __init__(self) -> None:
        self.records: list[EventRecord] = []

    def append(self, ts_ms: int, kind: str, payload: dict) -> None:
        self.records.append(EventRecord(ts_ms=int(ts_ms), kind=kind, payload=payload))

    def lines(self) -> list[str]:
        return [r.line() for r in self.records]

    def dump(self) -> str:
        return "\n".join(self.lines()) + ("\n" if self.records else "")


def parse_event_log(text: str) -> tuple[list[EventRecord], list[str]]:
    """Parse JSONL; returns (records, diagnostics). Truncation is diagnosed,
    not fatal, so partial logs can still be inspected."""
    records: list[EventRecord] = []
    diagnostics: list[str] = []
    for i, line in enumerate(text.splitlines()):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            records.append(EventRecord(int(obj["ts_ms"]), str(obj["kind"]), obj["payload"]))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            diagnostics.append(f"line {i + 1}: unreadable record ({exc})")
    kinds = {r.kind for r in records}
    if "run_start" not in kinds:
        diagnostics.append("missing terminal event: run_start")
    if "run_end" not in kinds:
        diagnostics.append("missing terminal event: run_end")
    return records, diagnostics


# ---------------------------------------------------------------------------
# Ledger


@dataclass
class LatencyLedger:
    """Per-run timestamp store from which all latency metrics are computed."""

    turns: dict[str, int] = field(default_factory=dict)             # turn_id -> t_tx
    asr: list[tuple[str, int]] = field(default_factory=list)        # (turn_id, t_asr_out)
    frames: list[tuple[int, int]] = field(default_factory=list)     # (t_frame, t_vision)
    adsb: list[tuple[int, int]] = field(default_factory=list)       # (t_in, t_out)
    advisories: list[dict] = field(default_factory=list)            # t_ready/t_dec/t_tts/severity/spoken
    t_conflict_ms: Optional[int] = None
    first_detection_range_m: Optional[float] = None
    scenario_id: str = ""
    seed: int = 0
    family: str = ""


def build_ledger(records: list[EventRecord]) -> LatencyLedger:
    led = LatencyLedger()
    for r in records:
        p = r.payload
        if r.kind == "run_start":
            led.scenario_id = p.get("scenario_id", "")
            led.seed = int(p.get("seed", 0))
            led.family = p.get("family", "")
        elif r.kind == "radio_turn":
            led.turns[p["turn_id"]] = int(p["t_tx_ms"])
        elif r.kind == "asr_result":
            led.asr.append((p["turn_id"], int(p["t_asr_out_ms"])))
        elif r.kind == "detection":
            led.frames.append((int(p["t_frame_ms"]), int(p["t_vision_ms"])))
        elif r.kind == "track":
            led.adsb.append((int(p["t_adsb_in_ms"]), int(p["t_adsb_out_ms"])))
        elif r.kind == "advisory":
            led.advisories.append(
                {
                    "advisory_id": p["advisory_id"],
                    "severity": p["severity"],
                    "t_ready_ms": int(p["t_ready_ms"]),
                    "t_dec_ms": int(p["t_dec_ms"]),
                    "t_tts_ms": p.get("t_tts_ms"),
                    "spoken": bool(p.get("spoken", False)),
                }
            )
        elif r.kind == "conflict_open":
            led.t_conflict_ms = int(p["t_ms"])
        elif r.kind == "first_detection":
            if led.first_detection_range_m is None:
                led.first_detection_range_m = float(p["range_m"])
    return led


# ---------------------------------------------------------------------------
# Metrics


@dataclass
class Stats:
    count: int = 0
    mean: float = 0.0
    minimum: float = 0.0
    maximum: float = 0.0
    p95: float = 0.0

    @classmethod
    def of(cls, values: list[float]) -> "Stats":
        if not values:
            return cls()
        ordered = sorted(values)
        n = len(ordered)
        idx = max(0, math.ceil(0.95 * n) - 1)
        return cls(
            count=n,
            mean=sum(ordered) / n,
            minimum=ordered[0],
            maximum=ordered[-1],
            p95=ordered[idx],
        )

    def as_dict(self) -> dict:
        return {
            "count": self.count,
            "mean": self.mean,
            "min": self.minimum,
            "max": self.maximum,
            "p95": self.p95,
        }


SEVERITY_NAMES = ("INFO", "ADVISORY", "CAUTION", "WARNING")


@dataclass
class RunMetrics:
    scenario_id: str = ""
    family: str = ""
    seed: int = 0
    asr_latency_ms: Stats = field(default_factory=Stats)
    vision_latency_ms: Stats = field(default_factory=Stats)
    adsb_latency_ms: Stats = field(default_factory=Stats)
    decision_latency_ms: Stats = field(default_factory=Stats)
    tts_latency_ms: Stats = field(default_factory=Stats)
    ttfw_ms: Optional[int] = None
    early_warning: bool = False
    t_conflict_ms: Optional[int] = None
    first_detection_range_m: Optional[float] = None
    warned: bool = False
    advisory_count: dict[str, int] = field(default_factory=dict)
    diagnostics: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "family": self.family,
            "seed": self.seed,
            "asr_latency_ms": self.asr_latency_ms.as_dict(),
            "vision_latency_ms": self.vision_latency_ms.as_dict(),
            "adsb_latency_ms": self.adsb_latency_ms.as_dict(),
            "decision_latency_ms": self.decision_latency_ms.as_dict(),
            "tts_latency_ms": self.tts_latency_ms.as_dict(),
            "ttfw_ms": self.ttfw_ms,
            "early_warning": self.early_warning,
            "t_conflict_ms": self.t_conflict_ms,
            "first_detection_range_m": self.first_detection_range_m,
            "warned": self.warned,
            "advisory_count": self.advisory_count,
            "diagnostics": self.diagnostics,
        }


def compute_latencies(ledger: LatencyLedger) -> RunMetrics:
    """Pure function of the ledger: per-module latencies and end-to-end TTFW."""
    m = RunMetrics(scenario_id=ledger.scenario_id, family=ledger.family, seed=ledger.seed)

    asr_vals = [float(t_out - ledger.turns[tid]) for tid, t_out in ledger.asr if tid in ledger.turns]
    m.asr_latency_ms = Stats.of(asr_vals)
    m.vision_latency_ms = Stats.of([float(tv - tf) for tf, tv in ledger.frames])
    m.adsb_latency_ms = Stats.of([float(to - ti) for ti, to in ledger.adsb])
    m.decision_latency_ms = Stats.of(
        [float(a["t_dec_ms"] - a["t_ready_ms"]) for a in ledger.advisories]
    )
    m.tts_latency_ms = Stats.of(
        [
            float(a["t_tts_ms"] - a["t_dec_ms"])
            for a in ledger.advisories
            if a.get("t_tts_ms") is not None
        ]
    )

    counts = {name: 0 for name in SEVERITY_NAMES}
    for a in ledger.advisories:
        counts[a["severity"]] = counts.get(a["severity"], 0) + 1
    m.advisory_count = counts

    spoken = [a for a in ledger.advisories if a["spoken"] and a.get("t_tts_ms") is not None]
    m.warned = any(
        SEVERITY_NAMES.index(a["severity"]) >= SEVERITY_NAMES.index("CAUTION") for a in spoken
    )
    m.t_conflict_ms = ledger.t_conflict_ms
    m.first_detection_range_m = ledger.first_detection_range_m

    if spoken:
        first = min(spoken, key=lambda a: a["t_tts_ms"])
        if ledger.t_conflict_ms is not None:
            m.ttfw_ms = int(first["t_tts_ms"]) - int(ledger.t_conflict_ms)
            m.early_warning = m.ttfw_ms < 0
        else:
            m.diagnostics.append("spoken advisory without t_conflict: TTFW undefined")
    return m


def metrics_from_log_text(text: str) -> RunMetrics:
    records, diagnostics = parse_event_log(text)
    metrics = compute_latencies(build_ledger(records))
    metrics.diagnostics.extend(diagnostics)
    return metrics


# ---------------------------------------------------------------------------
# Batch aggregation


def _mean_std(values: list[float]) -> tuple[Optional[float], Optional[float]]:
    if not values:
        return (None, None)
    mean = sum(values) / len(values)
    var = sum((v - mean) ** 2 for v in values) / len(values)
    return (mean, math.sqrt(var))


def aggregate(batch: list[RunMetrics]) -> dict:
    """Per-family means/stddevs, warn rate, and mean TTFW across runs."""
    if not batch:
        raise ValueError("aggregate requires at least one run")
    families: dict[str, list[RunMetrics]] = {}
    for m in batch:
        families.setdefault(m.family or m.scenario_id, []).append(m)

    def summarize(runs: list[RunMetrics]) -> dict:
        ttfw = [float(m.ttfw_ms) for m in runs if m.ttfw_ms is not None]
        ttfw_mean, ttfw_std = _mean_std(ttfw)
        conflict_runs = [m for m in runs if m.t_conflict_ms is not None]
        warn_base = conflict_runs if conflict_runs else runs
        return {
            "runs": len(runs),
            "warn_rate": sum(1 for m in warn_base if m.warned) / len(warn_base),
            "ttfw_mean_ms": ttfw_mean,
            "ttfw_std_ms": ttfw_std,
            "asr_latency_mean_ms": _mean_std(
                [m.asr_latency_ms.mean for m in runs if m.asr_latency_ms.count]
            )[0],
            "vision_latency_mean_ms": _mean_std(
                [m.vision_latency_ms.mean for m in runs if m.vision_latency_ms.count]
            )[0],
            "adsb_latency_mean_ms": _mean_std(
                [m.adsb_latency_ms.mean for m in runs if m.adsb_latency_ms.count]
            )[0],
            "tts_latency_mean_ms": _mean_std(
                [m.tts_latency_ms.mean for m in runs if m.tts_latency_ms.count]
            )[0],
            "decision_latency_mean_ms": _mean_std(
                [m.decision_latency_ms.mean for m in runs if m.decision_latency_ms.count]
            )[0],
        }

    return {
        "families": {fam: summarize(runs) for fam, runs in sorted(families.items())},
        "overall": summarize(batch),
    }
