"""Channel degradation model, simulated ASR, latency profiles, radio bus."""

import math

import pytest
from hypothesis import given, strategies as st

from skyloop.kernel import derive_stream
from skyloop.radio import (
    AsrProfile,
    DIGIT_CONFUSIONS,
    LatencyProfile,
    RadioBus,
    RadioTurn,
    degrade_text,
    simulate_asr,
    word_error_probability,
)

CLEARANCE = "N123AB, cleared for takeoff runway one niner"


def turn(text=CLEARANCE, t_tx=1000, snr=20.0, p_err=0.0, freq="118.30"):
    return RadioTurn(
        turn_id="T1",
        t_tx_ms=t_tx,
        frequency=freq,
        speaker="tower",
        clean_text=text,
        degraded_text=text,
        snr_db=snr,
        channel_p_err=p_err,
    )


class TestErrorProbability:
    def test_clean_channel_zero(self):
        assert word_error_probability(20.0) == 0.0
        assert word_error_probability(35.0) == 0.0

    def test_floor_saturates_at_p_max(self):
        assert word_error_probability(-5.0) == pytest.approx(0.45)
        assert word_error_probability(-100.0) == pytest.approx(0.45)

    def test_snr_10_gives_0_18(self):
        # (20-10)/25 = 0.4 of the way to the floor: 0.4 * 0.45 = 0.18
        assert word_error_probability(10.0) == pytest.approx(0.18)

    def test_monotone_in_snr(self):
        probs = [word_error_probability(snr) for snr in range(-10, 25)]
        assert all(b <= a for a, b in zip(probs, probs[1:]))


class TestDegrade:
    def test_identity_on_clean_channel(self):
        text, corrupted, p = degrade_text(CLEARANCE, 20.0, derive_stream(1, "radio_channel"))
        assert text == CLEARANCE
        assert corrupted == 0
        assert p == 0.0

    def test_deterministic_given_stream(self):
        a = degrade_text(CLEARANCE, 5.0, derive_stream(3, "radio_channel"))
        b = degrade_text(CLEARANCE, 5.0, derive_stream(3, "radio_channel"))
        assert a == b

    def test_empirical_word_error_rate_at_0_18(self):
        # Measured corruption fraction over >= 10^4 words within +/- 0.02.
        stream = derive_stream(11, "radio_channel")
        total = 0
        corrupted = 0
        for _ in range(1500):
            _, c, _ = degrade_text(CLEARANCE, 10.0, stream)
            total += len(CLEARANCE.split())
            corrupted += c
        assert total >= 10_000
        assert abs(corrupted / total - 0.18) <= 0.02

    def test_digit_words_substitute_within_confusion_sets(self):
        confusable = {w for pair in DIGIT_CONFUSIONS for w in pair} | {"niner"}
        stream = derive_stream(5, "radio_channel")
        for _ in range(400):
            out, _, _ = degrade_text("one nine five two zero four three", -50.0, stream)
            for w in out.split():
                assert w in confusable or w == "static"

    def test_deletions_shorten_text(self):
        stream = derive_stream(9, "radio_channel")
        lengths = set()
        for _ in range(200):
            out, _, _ = degrade_text("alpha bravo charlie delta echo", -50.0, stream)
            lengths.add(len(out.split()))
        assert min(lengths) < 5


class TestLatencyProfiles:
    def test_constant(self):
        p = LatencyProfile.constant(5880)
        assert p.draw(derive_stream(1, "asr_latency")) == 5880

    def test_uniform_within_bounds(self):
        p = LatencyProfile(distribution="uniform", low_ms=100, high_ms=200)
        s = derive_stream(2, "asr_latency")
        for _ in range(100):
            assert 100 <= p.draw(s) <= 200

    def test_normal_truncated_at_zero(self):
        p = LatencyProfile(distribution="normal", mean_ms=10, sigma_ms=500)
        s = derive_stream(3, "asr_latency")
        assert all(p.draw(s) >= 0 for _ in range(100))

    def test_unknown_distribution_rejected(self):
        with pytest.raises(ValueError):
            LatencyProfile(distribution="exotic").draw(derive_stream(1, "x"))


class TestSimulatedAsr:
    def test_clean_zero_latency_profile(self):
        profile = AsrProfile(latency=LatencyProfile.constant(0), word_error_rate=0.0)
        result = simulate_asr(turn(), profile, derive_stream(1, "asr"), derive_stream(1, "lat"))
        assert result.transcript == CLEARANCE
        assert result.t_asr_out_ms == 1000

    def test_default_latency_is_5880(self):
        result = simulate_asr(
            turn(), AsrProfile(word_error_rate=0.0), derive_stream(1, "asr"), derive_stream(1, "lat")
        )
        assert result.t_asr_out_ms - 1000 == 5880

    def test_confidence_formula(self):
        # p_total 0.2 with k=1.5 -> confidence 0.7 (below the 0.8 guard).
        profile = AsrProfile(latency=LatencyProfile.constant(0), word_error_rate=0.0)
        result = simulate_asr(
            turn(p_err=0.2), profile, derive_stream(1, "asr"), derive_stream(1, "lat")
        )
        assert result.confidence == pytest.approx(0.7)

    @given(st.floats(min_value=0.0, max_value=1.0), st.floats(min_value=0.0, max_value=1.0))
    def test_confidence_monotone_in_error(self, p1, p2):
        profile = AsrProfile(latency=LatencyProfile.constant(0), word_error_rate=0.0)
        c1 = simulate_asr(turn(p_err=p1), profile, derive_stream(1, "a"), derive_stream(1, "l")).confidence
        c2 = simulate_asr(turn(p_err=p2), profile, derive_stream(1, "a"), derive_stream(1, "l")).confidence
        if p1 <= p2:
            assert c1 >= c2
        else:
            assert c1 <= c2


class TestRadioBus:
    def make(self):
        return RadioBus(["118.30", "121.90"])

    def test_tuned_listeners_receive_in_order(self):
        bus = self.make()
        heard = []
        bus.tune("a", "118.30", lambda t, o: heard.append(("a", t.turn_id)))
        bus.tune("b", "118.30", lambda t, o: heard.append(("b", t.turn_id)))
        bus.transmit(turn())
        assert heard == [("a", "T1"), ("b", "T1")]

    def test_speaker_does_not_hear_itself(self):
        bus = self.make()
        heard = []
        bus.tune("tower", "118.30", lambda t, o: heard.append("tower"))
        bus.tune("b", "118.30", lambda t, o: heard.append("b"))
        bus.transmit(turn())
        assert heard == ["b"]

    def test_other_frequency_not_delivered(self):
        bus = self.make()
        heard = []
        bus.tune("a", "121.90", lambda t, o: heard.append("a"))
        bus.transmit(turn())
        assert heard == []

    def test_overhearer_receives_all_frequencies(self):
        bus = self.make()
        heard = []
        bus.subscribe_overhearer("assistant", lambda t, o: heard.append((t.frequency, o)))
        t1 = turn()
        bus.transmit(t1)
        bus.transmit(turn(freq="121.90", t_tx=1500))
        assert heard == [("118.30", True), ("121.90", True)]
        assert "assistant" in t1.overheard_by

    def test_per_frequency_fifo_enforced(self):
        bus = self.make()
        bus.transmit(turn(t_tx=1000))
        bus.transmit(turn(t_tx=1000))
        bus.transmit(turn(t_tx=2000))
        with pytest.raises(ValueError):
            bus.transmit(turn(t_tx=1999))

    def test_unknown_frequency_rejected(self):
        bus = self.make()
        with pytest.raises(KeyError):
            bus.transmit(turn(freq="999.99"))

    def test_exclusion_models_missed_reception(self):
        bus = self.make()
        heard = []
        bus.tune("a", "118.30", lambda t, o: heard.append("a"))
        bus.tune("b", "118.30", lambda t, o: heard.append("b"))
        bus.transmit(turn(), exclude={"a"})
        assert heard == ["b"]
