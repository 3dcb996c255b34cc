"""Max Pressure signal control and its Longest-Queue-First reduction.

A movement's weight is its upstream queue minus the split-weighted average
queue on its downstream link; a stage's pressure is the saturation-flow
weighted sum of its movements' weights; the controller requests the stage
with the highest pressure, holding the current stage on ties.

On this one-way grid both stages feed the same two outgoing links, once
each, so the downstream terms cancel from the pressure difference and Max
Pressure reduces exactly to Longest Queue First whenever the two stages
see the same per-link downstream profiles and equal saturation flows.
``lqf_select`` implements that reduction directly and the test suite sweeps
queue vectors exhaustively to confirm the equivalence.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

from .grid_scenario import THROUGH, TURN

if TYPE_CHECKING:  # pragma: no cover
    from .microsim import GridSim

__all__ = [
    "DEFAULT_SATURATION_VPS",
    "Movement",
    "MovementState",
    "movement_weight",
    "stage_pressure",
    "select_stage",
    "lqf_select",
    "grid_movement_state",
    "movement_state_for_node",
    "max_pressure_requests",
]

DEFAULT_SATURATION_VPS = 0.5
"""Uniform saturation flow (veh/s per movement) assumed for the grid."""

_SPLIT_SUM_TOL = 1e-9


@dataclass(frozen=True)
class Movement:
    """One signalized turning movement and its downstream context.

    ``downstream`` holds (split proportion, downstream movement queue)
    pairs covering the downstream link's outgoing movements; empty means
    the movement discharges off the network and contributes no downstream
    term.
    """

    queue: float
    downstream: tuple[tuple[float, float], ...] = ()
    saturation: float = DEFAULT_SATURATION_VPS

    def __post_init__(self) -> None:
        if self.queue < 0:
            raise ValueError(f"movement queue must be >= 0, got {self.queue}")
        if self.saturation <= 0:
            raise ValueError(f"saturation flow must be > 0, got {self.saturation}")
        if self.downstream:
            total = 0.0
            for split, queue in self.downstream:
                if not 0.0 <= split <= 1.0:
                    raise ValueError(f"split proportion {split} outside [0, 1]")
                if queue < 0:
                    raise ValueError(f"downstream queue must be >= 0, got {queue}")
                total += split
            if abs(total - 1.0) > _SPLIT_SUM_TOL:
                raise ValueError(f"split proportions sum to {total}, expected 1")


@dataclass(frozen=True)
class MovementState:
    """Per-stage movement lists for one intersection."""

    stages: tuple[tuple[Movement, ...], ...]

    def __post_init__(self) -> None:
        if not self.stages:
            raise ValueError("at least one stage required")


def movement_weight(movement: Movement) -> float:
    """Upstream queue minus the split-weighted downstream queue."""
    downstream_avg = sum(split * queue for split, queue in movement.downstream)
    return movement.queue - downstream_avg


def stage_pressure(state: MovementState, stage: int) -> float:
    """Saturation-flow weighted sum of the stage's movement weights."""
    return sum(movement_weight(m) * m.saturation for m in state.stages[stage])


def _argmax_hold(values: Sequence[float], current: int) -> int:
    """Index of the maximum; the current index wins any tie at the top."""
    best = max(values)
    if values[current] == best:
        return current
    return max(range(len(values)), key=lambda i: (values[i], -i))


def select_stage(state: MovementState, current_stage: int) -> int:
    """Request the stage with the highest pressure; ties hold the current.

    The result is a request only: the caller feeds it through the same
    min/max-green action gate that learned policies use.
    """
    pressures = [stage_pressure(state, s) for s in range(len(state.stages))]
    return _argmax_hold(pressures, current_stage)


def lqf_select(approach_queues: Sequence[Sequence[float]], current_stage: int) -> int:
    """Longest Queue First: the approach with the larger total queue wins.

    Ties hold the current stage, matching ``select_stage``.
    """
    totals = [float(sum(lanes)) for lanes in approach_queues]
    return _argmax_hold(totals, current_stage)


def grid_movement_state(
    upstream_queues: Sequence[float],
    east_profile: tuple[tuple[float, float], ...] = (),
    south_profile: tuple[tuple[float, float], ...] = (),
    saturation: float = DEFAULT_SATURATION_VPS,
) -> MovementState:
    """Movement state for one grid intersection from raw queue counts.

    ``upstream_queues`` orders the entrance lanes [EB through, EB turn,
    SB through, SB turn]. The through movement of the eastbound stage and
    the turn movement of the southbound stage share the east outgoing link
    (and symmetrically for the south link), so both receive the same
    downstream profile.
    """
    eb_th, eb_turn, sb_th, sb_turn = (float(q) for q in upstream_queues)
    stage_eb = (
        Movement(eb_th, east_profile, saturation),
        Movement(eb_turn, south_profile, saturation),
    )
    stage_sb = (
        Movement(sb_th, south_profile, saturation),
        Movement(sb_turn, east_profile, saturation),
    )
    return MovementState(stages=(stage_eb, stage_sb))


def _downstream_profile(
    sim: "GridSim", in_link: int, lane: int, target: int
) -> tuple[tuple[float, float], ...]:
    """Split/queue pairs on the target link's outgoing movements.

    Splits come from the realized routes of the vehicles currently queued
    on the upstream lane (who else would the green serve?), falling back
    to a uniform split when none are queued. A target link that leaves the
    network has no downstream term.
    """
    net = sim.net
    dst = net.links[target].dst
    if dst not in net.approach_links:
        return ()
    d_approach = net.approach_links[dst].index(target)
    options = [net.movement_targets[dst][(d_approach, m)] for m in (THROUGH, TURN)]
    counts = sim.queued_movement_split(in_link, lane)
    total = sum(counts.get(n, 0) for n in options)
    profile = []
    for movement, n in enumerate(options):
        split = counts.get(n, 0) / total if total > 0 else 1.0 / len(options)
        queue = float(sim.lane_queued_count(target, movement))
        profile.append((split, queue))
    return tuple(profile)


def movement_state_for_node(
    sim: "GridSim", node: str, saturation: float = DEFAULT_SATURATION_VPS
) -> MovementState:
    """Read one intersection's movement state off the simulator."""
    net = sim.net
    stages = []
    for approach in range(len(net.approach_links[node])):
        in_link = net.approach_links[node][approach]
        movements = []
        for mv in (THROUGH, TURN):
            target = net.movement_targets[node][(approach, mv)]
            movements.append(
                Movement(
                    queue=float(sim.lane_queued_count(in_link, mv)),
                    downstream=_downstream_profile(sim, in_link, mv, target),
                    saturation=saturation,
                )
            )
        stages.append(tuple(movements))
    return MovementState(stages=tuple(stages))


def max_pressure_requests(
    sim: "GridSim", saturation: float = DEFAULT_SATURATION_VPS
) -> dict[str, int]:
    """Stage requests for every intersection at the current instant.

    This is also the warm-up controller: every run's first stretch is
    driven by these requests regardless of the scheme under test.
    """
    return {
        node: select_stage(
            movement_state_for_node(sim, node, saturation),
            sim.controllers[node].active_stage,
        )
        for node in sim.net.nodes
    }
