"""Two-stage signal heads with min/max-green gating and 3 s transitions.

Each intersection cycles between two conflict-free stages: stage 0 greens
the eastbound approach (through + right), stage 1 the southbound approach
(through + left). Stage-change requests arrive at 5 s decision boundaries
and pass through a gate: held while the running green is under the minimum,
forced to the other stage once holding would overshoot the maximum. Every
change inserts 3 s of yellow/all-red at the head of the following slot, so
the incoming green starts 3 s into it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import IO

N_STAGES = 2

HOLD = "hold"
SWITCH = "switch"
FORCED = "forced"
TRANSITION = "transition"


@dataclass
class SignalControllerState:
    """Per-node signal state.

    ``elapsed_green_s`` counts completed green seconds of the active stage;
    ``transition_remaining_s`` counts down the 3 s non-green window after a
    change. During the transition ``active_stage`` already names the
    incoming stage.
    """

    active_stage: int = 0
    elapsed_green_s: int = 0
    transition_remaining_s: int = 0
    min_green_s: int = 10
    max_green_s: int = 60
    transition_s: int = 3
    decision_interval_s: int = 5

    def green_approach(self) -> int | None:
        """The approach index with a green display, or None in transition."""
        return None if self.transition_remaining_s > 0 else self.active_stage

    def is_green(self, approach: int) -> bool:
        return self.green_approach() == approach

    def tick(self) -> None:
        """Advance one second, after vehicles moved under the old display."""
        if self.transition_remaining_s > 0:
            self.transition_remaining_s -= 1
        else:
            self.elapsed_green_s += 1


def apply_decision(state: SignalControllerState, requested_stage: int, now_s: int) -> str:
    """Run the action-trigger gate at a decision boundary; returns the event.

    Force to the other stage when holding through the next slot would push
    the green past the maximum; otherwise honor a change request only once
    the minimum green has elapsed. The green timer resets only on a stage
    change.
    """
    if requested_stage not in range(N_STAGES):
        raise ValueError(f"invalid stage index {requested_stage}")
    if state.transition_remaining_s > 0:
        raise RuntimeError("decision boundary inside a transition window")

    if state.elapsed_green_s + state.decision_interval_s > state.max_green_s:
        new_stage = (state.active_stage + 1) % N_STAGES
        state.active_stage = new_stage
        state.elapsed_green_s = 0
        state.transition_remaining_s = state.transition_s
        return FORCED
    if state.elapsed_green_s < state.min_green_s:
        return HOLD
    if requested_stage != state.active_stage:
        state.active_stage = requested_stage
        state.elapsed_green_s = 0
        state.transition_remaining_s = state.transition_s
        return SWITCH
    return HOLD


def one_hot_stage(state: SignalControllerState) -> list[float]:
    """One-hot indicator of the active (or incoming) stage."""
    h = [0.0] * N_STAGES
    h[state.active_stage] = 1.0
    return h


def elapsed_ratio(state: SignalControllerState) -> float:
    """Elapsed green as a fraction of the maximum, clamped to [0, 1]."""
    return min(1.0, state.elapsed_green_s / state.max_green_s)


@dataclass
class SignalEventLog:
    """JSON-lines episode log: node, time, stage, event."""

    sink: IO[str] | None = None
    records: list[dict] = field(default_factory=list)
    keep_records: bool = False

    def emit(self, node: str, time_s: int, stage: int, event: str) -> None:
        rec = {"node": node, "time_s": time_s, "stage": stage, "event": event}
        if self.keep_records:
            self.records.append(rec)
        if self.sink is not None:
            self.sink.write(json.dumps(rec) + "\n")

    def log_decision(self, node: str, time_s: int, state: SignalControllerState, event: str) -> None:
        self.emit(node, time_s, state.active_stage, event)
        if event in (SWITCH, FORCED):
            self.emit(node, time_s, state.active_stage, TRANSITION)
