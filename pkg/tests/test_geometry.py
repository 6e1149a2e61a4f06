"""Runway token math and protected-area geometry."""

import math

import pytest
from hypothesis import given, strategies as st

from skyloop.geometry import (
    Runway,
    find_runway,
    heading_from_vector,
    is_canonical_runway,
    reciprocal_runway,
    runway_heading_deg,
    unit_from_heading,
)

ALL_TOKENS = [f"{n:02d}" for n in range(1, 37)]


class TestTokens:
    def test_canonical_accepts_all_36(self):
        for t in ALL_TOKENS:
            assert is_canonical_runway(t)

    @pytest.mark.parametrize("bad", ["1", "00", "37", "01X", "L01", "010", ""])
    def test_canonical_rejects_malformed(self, bad):
        assert not is_canonical_runway(bad)

    def test_suffixes(self):
        assert is_canonical_runway("01L")
        assert is_canonical_runway("36R")
        assert is_canonical_runway("18C")

    def test_reciprocal_examples(self):
        assert reciprocal_runway("01") == "19"
        assert reciprocal_runway("19") == "01"
        assert reciprocal_runway("15") == "33"
        assert reciprocal_runway("36") == "18"

    def test_reciprocal_swaps_sides(self):
        assert reciprocal_runway("01L") == "19R"
        assert reciprocal_runway("19R") == "01L"
        assert reciprocal_runway("18C") == "36C"

    def test_reciprocal_is_involution_for_all_tokens(self):
        for t in ALL_TOKENS:
            assert reciprocal_runway(reciprocal_runway(t)) == t
        for t in ALL_TOKENS:
            for s in ("L", "C", "R"):
                assert reciprocal_runway(reciprocal_runway(t + s)) == t + s

    def test_heading(self):
        assert runway_heading_deg("01") == 10.0
        assert runway_heading_deg("36") == 360.0


class TestVectors:
    @given(st.floats(min_value=0, max_value=360, allow_nan=False))
    def test_heading_round_trip(self, heading):
        dx, dy = unit_from_heading(heading)
        assert math.isclose(math.hypot(dx, dy), 1.0, abs_tol=1e-9)
        back = heading_from_vector(dx, dy)
        assert math.isclose(back % 360.0, heading % 360.0, abs_tol=1e-6)


class TestRunwayGeometry:
    def make(self):
        return Runway("09/27", (0.0, 0.0), 2000.0, width_m=45.0)

    def test_ends_and_thresholds(self):
        rw = self.make()
        assert rw.ends == ("09", "27")
        x, y = rw.threshold("27")
        # heading 090: due east
        assert math.isclose(x, 2000.0, abs_tol=1e-6)
        assert math.isclose(y, 0.0, abs_tol=1e-6)

    def test_non_reciprocal_ident_rejected(self):
        with pytest.raises(ValueError):
            Runway("09/18", (0.0, 0.0), 1000.0)

    def test_along_cross(self):
        rw = self.make()
        along, cross = rw.along_cross(500.0, 30.0)
        assert math.isclose(along, 500.0, abs_tol=1e-6)
        assert math.isclose(abs(cross), 30.0, abs_tol=1e-6)

    def test_protected_area_lateral_dilation(self):
        rw = self.make()
        # width/2 + 60 = 82.5 m laterally
        assert rw.protected_contains(1000.0, 82.4)
        assert not rw.protected_contains(1000.0, 82.6)
        assert rw.protected_contains(0.0, 0.0)
        assert not rw.protected_contains(-1.0, 0.0)
        assert not rw.protected_contains(2001.0, 0.0)

    def test_direction_per_end(self):
        rw = self.make()
        dx, dy = rw.direction("09")
        assert dx > 0.999
        dx27, _ = rw.direction("27")
        assert dx27 < -0.999

    def test_find_runway(self):
        rw = self.make()
        assert find_runway([rw], "09") is rw
        assert find_runway([rw], "27") is rw
        assert find_runway([rw], "01") is None
