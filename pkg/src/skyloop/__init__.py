"""Deterministic headless testbed for multimodal ATC conflict detection.

Scenario-driven simulation of aircraft, vehicles, and wildlife; a
frequency-addressed radio loop with slot-based phraseology parsing;
simulated ASR, vision, and ADS-B perception; a rule-ladder decision
engine with graded advisories; end-to-end latency accounting; and a
gateway for human-in-the-loop radio sessions.
"""

__version__ = "0.1.0"
