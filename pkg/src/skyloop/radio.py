"""Frequency-addressed radio bus, channel degradation, simulated ASR and TTS.

Audio is represented as text plus timing metadata. The SNR knob drives a
word-level noise model: each word is independently corrupted with
probability p_err, where digits substitute within confusion sets so that
runway-token confusions stay reachable under noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from .kernel import RandomStream

SNR_CLEAN_DB = 20.0
SNR_SPAN_DB = 25.0
P_ERR_MAX = 0.45
ASR_CONFIDENCE_K = 1.5

GARBLE_TOKEN = "static"

# Substitution sets chosen so runway digits can flip under noise.
DIGIT_CONFUSIONS = [
    ("one", "nine"),
    ("five", "nine"),
    ("two", "three"),
    ("zero", "four"),
]
_CONFUSABLE: dict[str, list[str]] = {}
for _pair in DIGIT_CONFUSIONS:
    for _w in _pair:
        _CONFUSABLE.setdefault(_w, []).extend(x for x in _pair if x != _w)
_CONFUSABLE["niner"] = list(_CONFUSABLE["nine"])


def word_error_probability(
    snr_db: float,
    snr_clean: float = SNR_CLEAN_DB,
    snr_span: float = SNR_SPAN_DB,
    p_max: float = P_ERR_MAX,
) -> float:
    """Per-word corruption probability; 0 at/above snr_clean, p_max at the floor."""
    ratio = (snr_clean - snr_db) / snr_span
    return min(max(ratio, 0.0), 1.0) * p_max


def degrade_text(
    text: str, snr_db: float, stream: RandomStream, p_err: Optional[float] = None
) -> tuple[str, int, float]:
    """Word-level substitution/deletion; returns (text, corrupted count, p_err)."""
    if p_err is None:
        p_err = word_error_probability(snr_db)
    if p_err <= 0.0:
        return (text, 0, 0.0)
    out: list[str] = []
    corrupted = 0
    for word in text.split():
        if stream.random() >= p_err:
            out.append(word)
            continue
        corrupted += 1
        bare = word.strip(".,;:!?").lower()
        if bare in _CONFUSABLE:
            out.append(stream.choice(_CONFUSABLE[bare]))
        elif stream.random() < 0.5:
            continue  # deletion
        else:
            out.append(GARBLE_TOKEN)
    return (" ".join(out), corrupted, p_err)


@dataclass
class LatencyProfile:
    """Injected latency distribution: constant by default so latency
    accounting reproduces configured values exactly."""

    distribution: str = "constant"   # constant | uniform | normal
    mean_ms: int = 0
    low_ms: int = 0
    high_ms: int = 0
    sigma_ms: int = 0

    def draw(self, stream: RandomStream) -> int:
        if self.distribution == "constant":
            return int(self.mean_ms)
        if self.distribution == "uniform":
            return max(0, int(round(stream.uniform(self.low_ms, self.high_ms))))
        if self.distribution == "normal":
            return max(0, int(round(stream.normal(self.mean_ms, self.sigma_ms))))
        raise ValueError(f"unknown latency distribution {self.distribution!r}")

    @classmethod
    def constant(cls, mean_ms: int) -> "LatencyProfile":
        return cls(distribution="constant", mean_ms=mean_ms)


@dataclass
class AsrProfile:
    latency: LatencyProfile = field(default_factory=lambda: LatencyProfile.constant(5880))
    word_error_rate: float = 0.02
    confidence_k: float = ASR_CONFIDENCE_K


@dataclass
class RadioTurn:
    turn_id: str
    t_tx_ms: int
    frequency: str
    speaker: str
    clean_text: str
    degraded_text: str = ""
    snr_db: float = SNR_CLEAN_DB
    addressed_to: Optional[str] = None
    overheard_by: list[str] = field(default_factory=list)
    provenance: str = "scripted"     # scripted | actor | human | assistant
    channel_p_err: float = 0.0

    def as_record(self) -> dict:
        return {
            "turn_id": self.turn_id,
            "t_tx_ms": self.t_tx_ms,
            "frequency": self.frequency,
            "speaker": self.speaker,
            "addressed_to": self.addressed_to,
            "clean_text": self.clean_text,
            "degraded_text": self.degraded_text,
            "snr_db": self.snr_db,
            "overheard_by": sorted(self.overheard_by),
            "provenance": self.provenance,
        }


@dataclass
class AsrResult:
    turn_id: str
    transcript: str
    t_asr_out_ms: int
    confidence: float

    def as_record(self) -> dict:
        return {
            "turn_id": self.turn_id,
            "transcript": self.transcript,
            "t_asr_out_ms": self.t_asr_out_ms,
            "confidence": round(self.confidence, 6),
        }


def simulate_asr(
    turn: RadioTurn, profile: AsrProfile, stream: RandomStream, latency_stream: RandomStream
) -> AsrResult:
    """Re-sample the degraded text with the recognizer's own error rate.

    Confidence falls linearly with the combined corruption probability:
    max(0, 1 - k * p_total) where p_total pools channel and ASR errors.
    """
    transcript, _, _ = degrade_text(
        turn.degraded_text, snr_db=SNR_CLEAN_DB, stream=stream, p_err=profile.word_error_rate
    )
    p_total = 1.0 - (1.0 - turn.channel_p_err) * (1.0 - profile.word_error_rate)
    confidence = max(0.0, 1.0 - profile.confidence_k * p_total)
    latency = profile.latency.draw(latency_stream)
    return AsrResult(
        turn_id=turn.turn_id,
        transcript=transcript,
        t_asr_out_ms=turn.t_tx_ms + latency,
        confidence=confidence,
    )


class RadioBus:
    """Per-frequency fan-out with stable ordering.

    Delivery order is driven by the kernel's (fire_at, seq) event order;
    the bus performs synchronous fan-out to listeners in registration
    order, so every receiver observes the same per-frequency FIFO.
    """

    def __init__(self, frequencies: list[str]):
        self.frequencies = list(frequencies)
        self._tuned: dict[str, list[tuple[str, Callable[[RadioTurn, bool], None]]]] = {
            f: [] for f in frequencies
        }
        self._overhearers: list[tuple[str, Optional[set[str]], Callable[[RadioTurn, bool], None]]] = []
        self.history: dict[str, list[RadioTurn]] = {f: [] for f in frequencies}

    def tune(self, listener_id: str, frequency: str, callback: Callable[[RadioTurn, bool], None]) -> None:
        if frequency not in self._tuned:
            raise KeyError(f"unknown frequency {frequency!r}")
        self._tuned[frequency].append((listener_id, callback))

    def subscribe_overhearer(
        self,
        listener_id: str,
        callback: Callable[[RadioTurn, bool], None],
        frequencies: Optional[list[str]] = None,
    ) -> None:
        freq_set = set(frequencies) if frequencies is not None else None
        self._overhearers.append((listener_id, freq_set, callback))

    def transmit(self, turn: RadioTurn, exclude: Optional[set[str]] = None) -> list[str]:
        """Fan out one turn; returns receiver ids in delivery order."""
        if turn.frequency not in self._tuned:
            raise KeyError(f"unknown frequency {turn.frequency!r}")
        history = self.history[turn.frequency]
        if history and turn.t_tx_ms < history[-1].t_tx_ms:
            raise ValueError("per-frequency emission timestamps must be non-decreasing")
        history.append(turn)
        delivered = []
        for listener_id, cb in self._tuned[turn.frequency]:
            if exclude and listener_id in exclude:
                continue
            if listener_id == turn.speaker:
                continue
            cb(turn, False)
            delivered.append(listener_id)
        for listener_id, freq_set, cb in self._overhearers:
            if freq_set is not None and turn.frequency not in freq_set:
                continue
            if exclude and listener_id in exclude:
                continue
            cb(turn, True)
            turn.overheard_by.append(listener_id)
            delivered.append(listener_id)
        return delivered
