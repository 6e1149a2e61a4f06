"""Decision engine: guard, rule ladder, fallback score, debounce, plugins."""

import itertools
import math

import pytest
from hypothesis import given, strategies as st

from skyloop.assistant import (
    Advisory,
    DecisionConfig,
    DecisionEngine,
    EvidenceState,
    Severity,
    compose_message,
    evaluate_ladder,
    evidence_fallback,
    guard,
    validate_plugin_advisory,
)
from skyloop.geometry import Runway
from skyloop.phraseology import ParsedSlots
from skyloop.radio import AsrResult
from skyloop.surveillance import OccupancyFlag, Track


class TestGuard:
    def test_below_threshold_fires(self):
        assert guard(ParsedSlots(action="hold_short", slot_conf=0.79))

    def test_boundary_is_strict(self):
        assert not guard(ParsedSlots(action="hold_short", slot_conf=0.8))

    def test_full_confidence_passes(self):
        assert not guard(ParsedSlots(action="hold_short", slot_conf=1.0))


class TestLadder:
    def test_gate_a_mismatch_plus_activity(self):
        e = EvidenceState(readback_mismatch=True, activity=True)
        r = evaluate_ladder(e)
        assert r.type == "readback_mismatch"
        assert r.severity == Severity.CAUTION

    def test_gate_b_ttg_boundary_inclusive(self):
        e = EvidenceState(occupancy=True, ttg_s=8.0)
        r = evaluate_ladder(e)
        assert r.type == "occupancy_conflict"
        assert r.severity == Severity.WARNING

    def test_gate_b_ttg_above_boundary_blocked(self):
        e = EvidenceState(occupancy=True, ttg_s=8.001)
        assert evaluate_ladder(e) is None

    def test_gate_b_arrival_context_alone_suffices(self):
        e = EvidenceState(occupancy=True, arrival_context=True)
        assert evaluate_ladder(e).severity == Severity.WARNING

    def test_gate_c_ambiguity_plus_activity(self):
        e = EvidenceState(recipient_ambiguous=True, activity=True)
        r = evaluate_ladder(e)
        assert r.type == "recipient_ambiguity"
        assert r.severity == Severity.CAUTION

    def test_all_false_fires_nothing(self):
        assert evaluate_ladder(EvidenceState()) is None

    def test_highest_severity_wins_when_multiple_fire(self):
        e = EvidenceState(readback_mismatch=True, activity=True, occupancy=True, ttg_s=5.0)
        r = evaluate_ladder(e)
        assert r.severity == Severity.WARNING
        assert r.type == "occupancy_conflict"
        assert set(r.rules_triggered) == {"gate_a:readback_mismatch", "gate_b:occupancy_conflict"}

    def test_tie_broken_by_gate_order(self):
        e = EvidenceState(readback_mismatch=True, activity=True, recipient_ambiguous=True)
        r = evaluate_ladder(e)
        assert r.type == "readback_mismatch"   # gate a ahead of gate c


class TestFallback:
    def test_all_ones_caution(self):
        out = evidence_fallback(EvidenceState(W_V=1.0, W_A=1.0, W_C=1.0))
        assert out[0] == Severity.CAUTION
        assert out[1] == pytest.approx(1.0)

    def test_all_zeros_nothing(self):
        assert evidence_fallback(EvidenceState()) is None

    def test_weighted_advisory_example(self):
        out = evidence_fallback(EvidenceState(W_V=0.9, W_A=0.4, W_C=0.2))
        assert out[0] == Severity.ADVISORY
        assert out[1] == pytest.approx(0.62)

    def test_weighted_caution_example(self):
        out = evidence_fallback(EvidenceState(W_V=1.0, W_A=0.8, W_C=0.6))
        assert out[0] == Severity.CAUTION
        assert out[1] == pytest.approx(0.87)

    @given(
        st.floats(min_value=0, max_value=1),
        st.floats(min_value=0, max_value=1),
        st.floats(min_value=0, max_value=1),
        st.floats(min_value=0, max_value=0.2),
    )
    def test_score_monotone_in_each_weight(self, wv, wa, wc, bump):
        tier = {None: 0, Severity.ADVISORY: 1, Severity.CAUTION: 2}

        def run(e):
            out = evidence_fallback(e)
            return (0.0, None) if out is None else (out[1], out[0])

        base_score, base_sev = run(EvidenceState(W_V=wv, W_A=wa, W_C=wc))
        for field in ("W_V", "W_A", "W_C"):
            kwargs = {"W_V": wv, "W_A": wa, "W_C": wc}
            kwargs[field] = min(1.0, kwargs[field] + bump)
            score, sev = run(EvidenceState(**kwargs))
            assert score >= base_score - 1e-12
            assert tier[sev] >= tier[base_sev]


class TestMessageTemplates:
    def test_warning_template_contains_runway_and_callsigns(self):
        msg = compose_message(
            "occupancy_conflict",
            {"runway": "01", "callsigns": ["N123AB", "N456CD"], "ttg_s": 7.0},
        )
        assert "01" in msg
        assert "N123AB" in msg and "N456CD" in msg

    def test_mismatch_template_has_both_runways(self):
        msg = compose_message(
            "readback_mismatch",
            {"callsign": "N123AB", "readback_runway": "19", "cleared_runway": "01"},
        )
        assert "19" in msg and "01" in msg and "N123AB" in msg


def make_engine(emitted, **cfg_kwargs):
    runways = [Runway("01/19", (0.0, 0.0), 2800.0)]
    cfg = DecisionConfig(**cfg_kwargs)
    return DecisionEngine(
        runways=runways,
        roster={"N123AB": "aircraft", "N456CD": "aircraft", "TWR1": "atc"},
        atc_callsigns={"TWR1"},
        config=cfg,
        emit=emitted.append,
    )


def asr(turn_id, transcript, t=1000, conf=0.97):
    return AsrResult(turn_id=turn_id, transcript=transcript, t_asr_out_ms=t, confidence=conf)


def occupied_flag(activity=True, corroboration=2):
    return OccupancyFlag(
        runway="01/19", occupied=True, activity=activity, since_ms=0, corroboration=corroboration
    )


class FakeCorroborator:
    def mean_confirming_confidence(self, ident, now_ms):
        return 0.9


class TestEngine:
    def test_update_evidence_maps_mismatch_and_occupancy(self):
        emitted = []
        eng = make_engine(emitted)
        eng.on_asr(asr("T1", "N123AB, cleared to land runway zero one"), "TWR1", 1000)
        eng.on_asr(asr("R1", "cleared to land runway one niner, N123AB", t=2500), "N123AB", 2500)
        eng.on_occupancy([occupied_flag()], FakeCorroborator(), 3000)
        e, _ctx = eng.current_evidence(3000)
        assert e.readback_mismatch
        assert e.occupancy
        assert e.activity

    def test_consistent_readback_no_mismatch(self):
        emitted = []
        eng = make_engine(emitted)
        eng.on_asr(asr("T1", "N123AB, cleared to land runway zero one"), "TWR1", 1000)
        eng.on_asr(asr("R1", "cleared to land runway zero one, N123AB", t=2500), "N123AB", 2500)
        e, _ = eng.current_evidence(2500)
        assert not e.readback_mismatch

    def test_no_inputs_all_zero(self):
        eng = make_engine([])
        e, _ = eng.current_evidence(0)
        assert (e.W_V, e.W_A, e.W_C) == (0.0, 0.0, 0.0)
        assert not (e.readback_mismatch or e.activity or e.occupancy or e.arrival_context)
        assert e.ttg_s is None

    def test_guard_emits_single_clarification_per_turn(self):
        emitted = []
        eng = make_engine(emitted)
        garbled = "N123AB, cleared static runway"   # action missing -> ignored
        eng.on_asr(asr("T1", garbled), "TWR1", 1000)
        assert emitted == []
        weak = "N123AB, cleared to land runway"     # action present, runway missing
        eng.on_asr(asr("T2", weak), "TWR1", 2000)
        eng.on_asr(asr("T2", weak), "TWR1", 2100)
        clar = [a for a in emitted if a.type == "clarification_request"]
        assert len(clar) == 1
        assert clar[0].severity == Severity.INFO
        assert clar[0].evidence["turn_ids"] == ["T2"]

    def test_mismatch_with_activity_emits_caution(self):
        emitted = []
        eng = make_engine(emitted)
        eng.on_asr(asr("T1", "N123AB, cleared to land runway zero one"), "TWR1", 1000)
        eng.on_asr(asr("R1", "cleared to land runway one niner, N123AB", t=2500), "N123AB", 2500)
        eng.on_occupancy([occupied_flag()], FakeCorroborator(), 9000)
        cautions = [a for a in emitted if a.type == "readback_mismatch"]
        assert cautions
        adv = cautions[0]
        assert adv.severity == Severity.CAUTION
        assert "T1" in adv.evidence["turn_ids"] and "R1" in adv.evidence["turn_ids"]
        assert adv.evidence["rules_triggered"]

    def test_debounce_suppresses_identical_advisory_within_10s(self):
        emitted = []
        eng = make_engine(emitted)
        eng.on_asr(asr("T1", "N123AB, cleared to land runway zero one"), "TWR1", 1000)
        eng.on_asr(asr("R1", "cleared to land runway one niner, N123AB", t=2500), "N123AB", 2500)
        eng.on_occupancy([occupied_flag()], FakeCorroborator(), 9000)
        n = len(emitted)
        eng.on_occupancy([occupied_flag()], FakeCorroborator(), 12000)
        assert len(emitted) == n
        eng.on_occupancy([occupied_flag()], FakeCorroborator(), 19100)
        assert len(emitted) == n + 1

    def test_debounce_allows_escalation(self):
        emitted = []
        eng = make_engine(emitted)
        # CAUTION first (mismatch + activity), then WARNING (occupancy + ttg).
        eng.on_asr(asr("T1", "N123AB, cleared to land runway zero one"), "TWR1", 1000)
        eng.on_asr(asr("R1", "cleared to land runway one niner, N123AB", t=2500), "N123AB", 2500)
        eng.on_occupancy([occupied_flag()], FakeCorroborator(), 9000)
        eng.tracks["N456CD"] = Track(
            actor_id="N456CD", callsign="N456CD", t_adsb_out_ms=9500,
            x=0.0, y=-400.0, z=50.0, ground_speed=60.0, vertical_speed=-3.0,
            heading_deg=0.0,
        )
        eng.on_occupancy([occupied_flag()], FakeCorroborator(), 9600)
        warnings = [a for a in emitted if a.severity == Severity.WARNING]
        assert warnings

    def test_ladder_fallback_exclusivity(self):
        emitted = []
        eng = make_engine(emitted)
        eng._wv_history = [(900, 0.95)]
        eng.on_asr(asr("T1", "N123AB, cleared to land runway zero one"), "TWR1", 1000)
        eng.on_asr(asr("R1", "cleared to land runway one niner, N123AB", t=2500), "N123AB", 2500)
        # W_A from the mismatch + W_V: fallback would score, but occupancy
        # and activity are false so only the fallback path may speak.
        adv = eng.evaluate(2600)
        if adv is not None:
            assert adv.type == "evidence_fallback"

    def test_every_advisory_lists_evidence_sources(self):
        emitted = []
        eng = make_engine(emitted)
        eng.on_asr(asr("T1", "N123AB, cleared to land runway zero one"), "TWR1", 1000)
        eng.on_asr(asr("R1", "cleared to land runway one niner, N123AB", t=2500), "N123AB", 2500)
        eng.on_occupancy([occupied_flag()], FakeCorroborator(), 9000)
        for adv in emitted:
            assert adv.evidence["rules_triggered"]
            assert adv.evidence["turn_ids"] or adv.evidence["camera_ids"]

    def test_cancel_clears_clearance_book(self):
        emitted = []
        eng = make_engine(emitted)
        eng.on_asr(asr("T1", "N456CD, cleared for takeoff runway zero one"), "TWR1", 1000)
        assert "N456CD" in eng.clearances
        eng.on_asr(asr("T2", "N456CD, cancel takeoff clearance", t=3000), "TWR1", 3000)
        assert "N456CD" not in eng.clearances

    def test_readback_infers_missing_clearance(self):
        emitted = []
        eng = make_engine(emitted)
        eng.on_asr(asr("R1", "cleared to land runway zero one, N123AB"), "N123AB", 1000)
        assert eng.clearances["N123AB"].runway_end == "01"


class TestPluginValidation:
    def test_echo_advisory_passes_through(self):
        raw = {"severity": "CAUTION", "message": "from plugin", "recipients": ["N123AB"]}
        adv = validate_plugin_advisory(raw, 5000, 0, "adv-0001")
        assert adv is not None
        assert adv.severity == Severity.CAUTION
        assert adv.provenance == "plugin"
        assert adv.message == "from plugin"

    def test_unknown_severity_rejected(self):
        raw = {"severity": "PANIC", "message": "boom"}
        assert validate_plugin_advisory(raw, 5000, 0, "adv-0001") is None

    def test_missing_message_rejected(self):
        assert validate_plugin_advisory({"severity": "INFO"}, 0, 0, "a") is None

    def test_engine_falls_back_when_plugin_declines(self):
        emitted = []
        eng = make_engine(emitted)
        eng.decision_plugin = lambda bundle: None
        eng.on_asr(asr("T1", "N123AB, cleared to land runway zero one"), "TWR1", 1000)
        eng.on_asr(asr("R1", "cleared to land runway one niner, N123AB", t=2500), "N123AB", 2500)
        eng.on_occupancy([occupied_flag()], FakeCorroborator(), 9000)
        assert any(a.provenance == "builtin" for a in emitted)

    def test_engine_uses_plugin_advisory_when_valid(self):
        emitted = []
        eng = make_engine(emitted)
        eng.decision_plugin = lambda bundle: {
            "severity": "CAUTION",
            "message": "plugin caution",
            "recipients": [],
        }
        eng.on_asr(asr("T1", "N123AB, cleared to land runway zero one"), "TWR1", 1000)
        assert any(a.provenance == "plugin" for a in emitted)

    def test_nlg_rewrites_text_only(self):
        emitted = []
        eng = make_engine(emitted)
        eng.nlg_plugin = lambda payload: "rephrased " + payload["message"]
        eng.on_asr(asr("T1", "N123AB, cleared to land runway zero one"), "TWR1", 1000)
        eng.on_asr(asr("R1", "cleared to land runway one niner, N123AB", t=2500), "N123AB", 2500)
        eng.on_occupancy([occupied_flag()], FakeCorroborator(), 9000)
        adv = next(a for a in emitted if a.type == "readback_mismatch")
        assert adv.message.startswith("rephrased ")
        assert adv.severity == Severity.CAUTION


class TestSeverityOrdering:
    def test_integer_levels(self):
        assert Severity.INFO == 1
        assert Severity.ADVISORY == 2
        assert Severity.CAUTION == 3
        assert Severity.WARNING == 4
        assert Severity.INFO < Severity.ADVISORY < Severity.CAUTION < Severity.WARNING

    def test_parse_round_trip(self):
        for s in Severity:
            assert Severity.parse(s.name) is s
        with pytest.raises(ValueError):
            Severity.parse("PANIC")
