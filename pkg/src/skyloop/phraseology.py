"""Slot-based radio phraseology: parser, renderer, digit lexicon.

The grammar lives in ``data/phraseology.json``. Parsing extracts callsign,
action, runway token, and altitude from a transcript; rendering produces the
canonical spoken form so that render -> parse round-trips exactly on clean
text. Runway tokens are canonicalized to "01".."36" with optional L/C/R.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

from .geometry import is_canonical_runway

_CALLSIGN_RE = re.compile(r"^[A-Z]{1,4}[0-9]{1,5}[A-Z]{0,2}$")
_WORD_SPLIT_RE = re.compile(r"[ \t]+")


def _load_grammar() -> dict:
    text = resources.files("skyloop.data").joinpath("phraseology.json").read_text("utf-8")
    return json.loads(text)


GRAMMAR = _load_grammar()
DIGIT_WORDS: dict[str, str] = GRAMMAR["digit_words"]
DIGIT_RENDER: dict[str, str] = GRAMMAR["digit_render"]
_SUFFIX_WORDS: dict[str, str] = GRAMMAR["runway_suffix_words"]
_SUFFIX_RENDER: dict[str, str] = GRAMMAR["runway_suffix_render"]
ACTIONS: dict[str, dict] = GRAMMAR["actions"]


@dataclass
class ParsedSlots:
    """Intent slots extracted from one transmission."""

    callsign: Optional[str] = None
    action: Optional[str] = None
    runway: Optional[str] = None
    altitude_ft: Optional[int] = None
    slot_conf: float = 0.0
    ambiguous_recipient: bool = False

    def as_dict(self) -> dict:
        return {
            "callsign": self.callsign,
            "action": self.action,
            "runway": self.runway,
            "altitude_ft": self.altitude_ft,
            "slot_conf": round(self.slot_conf, 6),
            "ambiguous_recipient": self.ambiguous_recipient,
        }


def normalize(text: str) -> list[str]:
    """Lowercased word tokens with punctuation stripped."""
    cleaned = re.sub(r"[.,;:!?]", " ", text)
    return [w for w in _WORD_SPLIT_RE.split(cleaned.strip().lower()) if w]


def _callsign_candidates(words: list[str]) -> list[tuple[int, str]]:
    out = []
    for i, w in enumerate(words):
        token = w.upper()
        if _CALLSIGN_RE.match(token):
            out.append((i, token))
    return out


def _find_phrase(words: list[str], phrase: str) -> Optional[int]:
    """Index where the multi-word phrase starts, or None."""
    parts = phrase.split()
    n = len(parts)
    for i in range(len(words) - n + 1):
        if words[i : i + n] == parts:
            return i
    return None


def _parse_runway(words: list[str], start: int) -> Optional[str]:
    """Parse digits (words or single-digit tokens) after a 'runway' keyword."""
    digits = ""
    j = start
    while j < len(words) and len(digits) < 2:
        w = words[j]
        if w in DIGIT_WORDS:
            digits += DIGIT_WORDS[w]
        elif len(w) == 1 and w.isdigit():
            digits += w
        elif len(w) == 2 and w.isdigit() and not digits:
            digits = w
        else:
            break
        j += 1
    if len(digits) != 2:
        return None
    suffix = ""
    if j < len(words) and words[j] in _SUFFIX_WORDS:
        suffix = _SUFFIX_WORDS[words[j]]
    token = digits + suffix
    return token if is_canonical_runway(token) else None


def _parse_altitude(words: list[str], start: int) -> Optional[int]:
    """Parse '<digits> thousand [<digits> hundred]' or a bare number."""
    j = start
    digits = ""
    while j < len(words) and (words[j] in DIGIT_WORDS or (len(words[j]) == 1 and words[j].isdigit())):
        digits += DIGIT_WORDS.get(words[j], words[j])
        j += 1
    if digits and j < len(words) and words[j] == "thousand":
        alt = int(digits) * 1000
        j += 1
        hdigits = ""
        k = j
        while k < len(words) and (words[k] in DIGIT_WORDS or (len(words[k]) == 1 and words[k].isdigit())):
            hdigits += DIGIT_WORDS.get(words[k], words[k])
            k += 1
        if hdigits and k < len(words) and words[k] == "hundred":
            alt += int(hdigits) * 100
        return alt
    if digits and j < len(words) and words[j] == "hundred":
        return int(digits) * 100
    if not digits and j < len(words) and words[j].isdigit():
        return int(words[j])
    return None


def parse_phraseology(transcript: str) -> ParsedSlots:
    """Extract intent slots from a transcript; unparseable text gives slot_conf 0."""
    words = normalize(transcript)
    slots = ParsedSlots()
    if not words:
        return slots

    candidates = _callsign_candidates(words)
    if candidates:
        slots.callsign = candidates[0][1]
        distinct = {c for _, c in candidates}
        if len(distinct) > 1:
            slots.ambiguous_recipient = True

    action = None
    action_pos = -1
    matched_len = 0
    for name, entry in ACTIONS.items():
        for phrase in entry["phrases"]:
            pos = _find_phrase(words, phrase)
            if pos is not None and len(phrase.split()) > matched_len:
                action, action_pos, matched_len = name, pos, len(phrase.split())
    if action is None:
        return slots
    slots.action = action

    expected = ACTIONS[action]["slots"]
    if "runway" in expected:
        kw = _find_phrase(words, "runway")
        if kw is not None:
            slots.runway = _parse_runway(words, kw + 1)
    if "altitude" in expected:
        slots.altitude_ft = _parse_altitude(words, action_pos + matched_len)

    quality = 0.0
    for slot in expected:
        if slot == "callsign" and slots.callsign is not None:
            quality += 1.0
        elif slot == "runway" and slots.runway is not None:
            quality += 1.0
        elif slot == "altitude" and slots.altitude_ft is not None:
            quality += 1.0
    slots.slot_conf = quality / len(expected) if expected else 1.0
    return slots


def classify_meta(transcript: str) -> Optional[str]:
    """Detect non-command phrases ('say_again', 'roger'); None otherwise."""
    words = normalize(transcript)
    for name, phrases in GRAMMAR["meta_phrases"].items():
        for phrase in phrases:
            if _find_phrase(words, phrase) is not None:
                return name
    return None


def runway_words(token: str) -> str:
    """Spoken form of a canonical runway token, e.g. '19' -> 'one niner'."""
    if not is_canonical_runway(token):
        raise ValueError(f"not a canonical runway token: {token!r}")
    spoken = " ".join(DIGIT_RENDER[d] for d in token[:2])
    if len(token) == 3:
        spoken += " " + _SUFFIX_RENDER[token[2]]
    return spoken


def altitude_words(altitude_ft: int) -> str:
    """Spoken altitude, e.g. 3500 -> 'three thousand five hundred'."""
    if altitude_ft <= 0 or altitude_ft % 100 != 0:
        raise ValueError("altitude must be a positive multiple of 100 ft")
    thousands, rem = divmod(altitude_ft, 1000)
    parts = []
    if thousands:
        parts.append(" ".join(DIGIT_RENDER[d] for d in str(thousands)) + " thousand")
    if rem:
        parts.append(" ".join(DIGIT_RENDER[d] for d in str(rem // 100)) + " hundred")
    return " ".join(parts)


def _slot_suffix(action: str, runway: Optional[str], altitude_ft: Optional[int]) -> str:
    expected = ACTIONS[action]["slots"]
    extra = ""
    if "runway" in expected:
        if runway is None:
            raise ValueError(f"action {action} requires a runway")
        extra += f" runway {runway_words(runway)}"
    if "altitude" in expected:
        if altitude_ft is None:
            raise ValueError(f"action {action} requires an altitude")
        extra += f" {altitude_words(altitude_ft)}"
    return extra


def render_instruction(
    callsign: str,
    action: str,
    runway: Optional[str] = None,
    altitude_ft: Optional[int] = None,
) -> str:
    """Canonical controller phrasing: callsign first."""
    phrase = ACTIONS[action]["phrases"][0]
    return f"{callsign}, {phrase}{_slot_suffix(action, runway, altitude_ft)}"


def render_readback(
    callsign: str,
    action: str,
    runway: Optional[str] = None,
    altitude_ft: Optional[int] = None,
) -> str:
    """Canonical pilot readback: instruction restated, callsign last."""
    phrase = ACTIONS[action]["phrases"][0]
    return f"{phrase}{_slot_suffix(action, runway, altitude_ft)}, {callsign}"


def resolve_recipient(
    slots: ParsedSlots, roster_callsigns: list[str]
) -> tuple[Optional[str], bool]:
    """Match the parsed callsign against the roster.

    Returns (matched callsign or None, ambiguous). Ambiguous covers parser-level
    ambiguity and near-miss matches (edit distance 1 to exactly one roster entry,
    which models a misaddressed clearance a crew might still accept).
    """
    if slots.callsign is None:
        return (None, slots.ambiguous_recipient)
    if slots.callsign in roster_callsigns:
        return (slots.callsign, slots.ambiguous_recipient)
    near = [c for c in roster_callsigns if _edit_distance_le1(slots.callsign, c)]
    if len(near) == 1:
        return (near[0], True)
    return (None, slots.ambiguous_recipient or len(near) > 1)


def _edit_distance_le1(a: str, b: str) -> bool:
    if a == b:
        return True
    la, lb = len(a), len(b)
    if abs(la - lb) > 1:
        return False
    if la == lb:
        return sum(x != y for x, y in zip(a, b)) == 1
    if la > lb:
        a, b, la, lb = b, a, lb, la
    # one insertion turns a into b
    i = j = edits = 0
    while i < la and j < lb:
        if a[i] == b[j]:
            i += 1
            j += 1
        else:
            edits += 1
            if edits > 1:
                return False
            j += 1
    return True
