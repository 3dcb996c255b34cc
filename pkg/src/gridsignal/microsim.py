"""Discrete-time (1 s) microscopic traffic simulation on the one-way grid.

Krauss collision-free car following, signalized node crossing, FIFO entry
insertion, loop-detector style readings, waiting/delay accounting, and a
polynomial fuel surrogate. The per-lane inner loop lives in a swappable
kernel (compiled or pure Python, see ``kernels``); everything here is
driver logic: lane bookkeeping, transfers, spawning, metrics.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import IO, Iterator, Mapping

import numpy as np

from gridsignal import seeds
from gridsignal.grid_scenario import (
    DemandSchedule,
    OdTable,
    RoadNetwork,
    THROUGH,
    TURN,
    Trip,
    route_trip,
    spawn_trips,
)
from gridsignal.kernels import update_lane
from gridsignal.signal_exec import SignalControllerState, SignalEventLog, apply_decision

INF = float("inf")
QUEUE_SPEED_MPS = 0.1


@dataclass(frozen=True)
class KraussParams:
    """Car-following parameters (defaults give deterministic driving)."""

    accel_a_mps2: float = 2.6
    decel_b_mps2: float = 4.5
    reaction_time_tau_s: float = 1.0
    driver_imperfection_sigma: float = 0.0

    def __post_init__(self) -> None:
        if self.accel_a_mps2 <= 0 or self.decel_b_mps2 <= 0 or self.reaction_time_tau_s <= 0:
            raise ValueError("a, b and tau must be positive")
        if not 0.0 <= self.driver_imperfection_sigma <= 1.0:
            raise ValueError("sigma must lie in [0, 1]")


def krauss_safe_speed(
    follower_speed: float, leader_speed: float, gap_m: float, params: KraussParams
) -> float:
    """Safe following speed, floored at zero.

    v_safe = v_l + (gap − v_l·τ) / ((v_f + v_l) / (2b) + τ)
    """
    denom = (follower_speed + leader_speed) / (2.0 * params.decel_b_mps2) + params.reaction_time_tau_s
    v_safe = leader_speed + (gap_m - leader_speed * params.reaction_time_tau_s) / denom
    return v_safe if v_safe > 0.0 else 0.0


@dataclass(frozen=True)
class FuelCoeffs:
    """Fuel-rate surrogate coefficients (ml/s); not calibrated to any fleet."""

    c0: float = 0.2
    c1: float = 0.03
    c2: float = 1.5e-5
    c3: float = 0.06


def fuel_rate(speed: float, accel: float, coeffs: FuelCoeffs = FuelCoeffs()) -> float:
    """Instantaneous fuel use: c0 + c1·v + c2·v³ + c3·max(a,0)·v."""
    a_pos = accel if accel > 0.0 else 0.0
    return coeffs.c0 + coeffs.c1 * speed + coeffs.c2 * speed**3 + coeffs.c3 * a_pos * speed


@dataclass
class Vehicle:
    """Read-only view of one simulated vehicle."""

    id: int
    route: list[int]
    route_pos: int
    lane: int
    position_m: float
    speed_mps: float
    entered_network_at_s: int
    cumulative_delay_s: float
    current_wait_spell_s: float
    length_m: float = 5.0
    min_gap_m: float = 2.0

    @property
    def link(self) -> int:
        return self.route[self.route_pos]


@dataclass
class DetectorReading:
    """Entrance-lane sensing for one node.

    ``h`` and ``q`` follow the lane order [EB through, EB turn, SB through,
    SB turn]. ``interval_waiting_s`` and ``interval_vehicle_seconds`` cover
    the window since the previous reading of the same node.
    """

    node: str
    h: list[float]
    q: list[float]
    interval_waiting_s: float
    interval_vehicle_seconds: float


@dataclass
class MetricsRecord:
    """Network-wide snapshot taken every control step."""

    time_s: int
    avg_delay_s_per_veh: float
    queued_vehicles: int
    fuel_rate_ml_per_s: float
    inserted: int
    exited: int
    pending: int
    empty_network: bool = False


METRICS_HEADER = "time_s,avg_delay_s_per_veh,queued_vehicles,fuel_rate_ml_per_s,inserted,exited,pending"


def metrics_to_csv(records: list[MetricsRecord]) -> str:
    """Render records with round-trip-exact float formatting."""
    lines = [METRICS_HEADER]
    for r in records:
        lines.append(
            f"{r.time_s},{float(r.avg_delay_s_per_veh)!r},{r.queued_vehicles},"
            f"{float(r.fuel_rate_ml_per_s)!r},{r.inserted},{r.exited},{r.pending}"
        )
    return "\n".join(lines) + "\n"


def parse_metrics_csv(text: str) -> list[MetricsRecord]:
    records = []
    lines = text.strip().split("\n")
    if lines and lines[0] == METRICS_HEADER:
        lines = lines[1:]
    for line in lines:
        t, d, qv, f, ins, ex, pen = line.split(",")
        records.append(
            MetricsRecord(int(t), float(d), int(qv), float(f), int(ins), int(ex), int(pen))
        )
    return records


@dataclass(frozen=True)
class SimConfig:
    krauss: KraussParams = field(default_factory=KraussParams)
    fuel: FuelCoeffs = field(default_factory=FuelCoeffs)
    vehicle_length_m: float = 5.0
    min_gap_m: float = 2.0
    insert_gap_m: float = 7.0
    dt_s: float = 1.0
    detector_range_m: float = 150.0


class GridSim:
    """One episode's simulation state.

    Deterministic given (network, schedule, master_seed, episode_index):
    demand, routing and driver noise each draw from their own named stream.
    """

    def __init__(
        self,
        net: RoadNetwork,
        od: OdTable,
        schedule: DemandSchedule,
        master_seed: int,
        episode_index: int = 0,
        config: SimConfig | None = None,
        signal_log: SignalEventLog | None = None,
        trace_sink: IO[str] | None = None,
    ) -> None:
        self.net = net
        self.od = od
        self.schedule = schedule
        self.config = config or SimConfig()
        self.time_s = 0
        self.signal_log = signal_log
        self.trace_sink = trace_sink

        self._demand_rng = seeds.stream(master_seed, seeds.DEMAND, episode_index)
        self._route_rng = seeds.stream(master_seed, seeds.ROUTE, episode_index)
        self._driver_rng = seeds.stream(master_seed, seeds.DRIVER, episode_index)

        cap = 256
        self._pos = np.zeros(cap)
        self._speed = np.zeros(cap)
        self._prev_speed = np.zeros(cap)
        self._delay = np.zeros(cap)
        self._wait = np.zeros(cap)
        self._route: list[list[int] | None] = [None] * cap
        self._route_pos = [0] * cap
        self._trip_id = [0] * cap
        self._entered_s = [0] * cap
        self._free: list[int] = list(range(cap - 1, -1, -1))

        self.lanes: dict[tuple[int, int], list[int]] = {
            (lk.index, lane): [] for lk in net.links for lane in range(lk.lane_count)
        }
        self.pending: dict[tuple[int, int], deque] = {
            (lk.index, lane): deque() for lk in net.links if lk.kind == "entry" for lane in (0, 1)
        }
        self.controllers: dict[str, SignalControllerState] = {
            n: SignalControllerState() for n in net.nodes
        }

        # Cumulative per-node accounting on entrance lanes.
        self.node_wait_acc: dict[str, float] = {n: 0.0 for n in net.nodes}
        self.node_presence_acc: dict[str, float] = {n: 0.0 for n in net.nodes}
        self.node_arrivals: dict[str, int] = {n: 0 for n in net.nodes}
        self._last_wait_read: dict[str, float] = {n: 0.0 for n in net.nodes}
        self._last_presence_read: dict[str, float] = {n: 0.0 for n in net.nodes}
        self._lane_node: dict[tuple[int, int], str | None] = {}
        for lk in net.links:
            owner = lk.dst if lk.dst in self.controllers else None
            for lane in range(lk.lane_count):
                self._lane_node[(lk.index, lane)] = owner

        self._link_queued = [0] * len(net.links)
        self.spawned_total = 0
        self.exited_total = 0
        self.in_network = 0
        self._entry_lane_keys = sorted(self.pending.keys())

    # ------------------------------------------------------------------ slots
    def _grow(self) -> None:
        old = len(self._pos)
        new = old * 2
        for name in ("_pos", "_speed", "_prev_speed", "_delay", "_wait"):
            arr = np.zeros(new)
            arr[:old] = getattr(self, name)
            setattr(self, name, arr)
        self._route.extend([None] * old)
        self._route_pos.extend([0] * old)
        self._trip_id.extend([0] * old)
        self._entered_s.extend([0] * old)
        self._free.extend(range(new - 1, old - 1, -1))

    def _new_slot(self, trip: Trip, route: list[int], pos: float, speed: float) -> int:
        if not self._free:
            self._grow()
        vid = self._free.pop()
        self._pos[vid] = pos
        self._speed[vid] = speed
        self._prev_speed[vid] = speed
        self._delay[vid] = 0.0
        self._wait[vid] = 0.0
        self._route[vid] = route
        self._route_pos[vid] = 0
        self._trip_id[vid] = trip.trip_id
        self._entered_s[vid] = self.time_s
        return vid

    # ------------------------------------------------------------- lane logic
    def lane_for(self, route: list[int], route_pos: int) -> int:
        """Lane a vehicle occupies on route[route_pos]: 0 through, 1 turn."""
        link = self.net.links[route[route_pos]]
        if route_pos + 1 >= len(route):
            return 0  # exit stub: no further movement
        approach = 0 if link.direction == "E" else 1
        through_target = self.net.movement_targets[link.dst][(approach, THROUGH)]
        return THROUGH if route[route_pos + 1] == through_target else TURN

    def _approach_index(self, link_idx: int) -> int:
        return 0 if self.net.links[link_idx].direction == "E" else 1

    def _display_green(self, link_idx: int) -> bool:
        lk = self.net.links[link_idx]
        if lk.kind == "exit":
            return True
        ctrl = self.controllers[lk.dst]
        return ctrl.is_green(self._approach_index(link_idx))

    # ------------------------------------------------------------------- tick
    def tick(self) -> None:
        """Advance one second: move, transfer, spawn, insert, advance signals."""
        cfg = self.config
        net = self.net
        L = net.link_length_m
        self._link_queued = [0] * len(net.links)

        for li in net.link_update_order:
            lk = net.links[li]
            green = self._display_green(li)
            for lane in range(lk.lane_count):
                ids = self.lanes[(li, lane)]
                if not ids:
                    continue
                x_rear = INF
                x_speed = 0.0
                if green and lk.kind != "exit":
                    front = ids[0]
                    froute = self._route[front]
                    frp = self._route_pos[front]
                    tgt = froute[frp + 1]
                    tgt_lane = self.lane_for(froute, frp + 1)
                    tgt_ids = self.lanes[(tgt, tgt_lane)]
                    if tgt_ids:
                        rear = tgt_ids[-1]
                        x_rear = L + self._pos[rear] - cfg.vehicle_length_m
                        x_speed = self._speed[rear]
                u = None
                if cfg.krauss.driver_imperfection_sigma > 0.0:
                    u = self._driver_rng.random(len(ids))
                queued = update_lane(
                    ids,
                    self._pos,
                    self._speed,
                    self._prev_speed,
                    self._delay,
                    self._wait,
                    L,
                    lk.speed_limit_mps,
                    cfg.krauss.accel_a_mps2,
                    cfg.krauss.decel_b_mps2,
                    cfg.krauss.reaction_time_tau_s,
                    cfg.krauss.driver_imperfection_sigma,
                    cfg.dt_s,
                    cfg.min_gap_m,
                    cfg.vehicle_length_m,
                    green,
                    x_rear,
                    x_speed,
                    u,
                )
                self._link_queued[li] += queued
                node = self._lane_node[(li, lane)]
                if node is not None:
                    self.node_wait_acc[node] += queued * cfg.dt_s
                # Transfers: only the lane leader can sit at/past the end.
                while ids and self._pos[ids[0]] >= L:
                    vid = ids.pop(0)
                    if lk.kind == "exit":
                        self._exit_vehicle(vid)
                    else:
                        self._pos[vid] -= L
                        self._route_pos[vid] += 1
                        nroute = self._route[vid]
                        nrp = self._route_pos[vid]
                        nlane = self.lane_for(nroute, nrp)
                        self.lanes[(nroute[nrp], nlane)].append(vid)
                        owner = self._lane_node[(nroute[nrp], nlane)]
                        if owner is not None:
                            self.node_arrivals[owner] += 1

        for node in net.nodes:
            eb, sb = net.approach_links[node]
            self.node_presence_acc[node] += cfg.dt_s * (
                len(self.lanes[(eb, 0)])
                + len(self.lanes[(eb, 1)])
                + len(self.lanes[(sb, 0)])
                + len(self.lanes[(sb, 1)])
            )

        if self.time_s < self.schedule.horizon_s:
            cache: dict = {}
            trips = spawn_trips(self.od, self.schedule, self.time_s, self._demand_rng, self.spawned_total)
            for trip in trips:
                route = route_trip(net, trip, self._route_cost, self._route_rng, cache)
                lane = self.lane_for(route, 0)
                self.pending[(route[0], lane)].append((trip, route))
            self.spawned_total += len(trips)

        for key in self._entry_lane_keys:
            buf = self.pending[key]
            if not buf:
                continue
            ids = self.lanes[key]
            vmax = net.links[key[0]].speed_limit_mps
            if ids:
                rear = ids[-1]
                rear_pos = self._pos[rear]
                if rear_pos < cfg.vehicle_length_m + cfg.insert_gap_m:
                    continue
                gap_eff = rear_pos - cfg.vehicle_length_m - cfg.min_gap_m
                v_ins = min(vmax, krauss_safe_speed(vmax, self._speed[rear], gap_eff, cfg.krauss))
            else:
                v_ins = vmax
            trip, route = buf.popleft()
            vid = self._new_slot(trip, route, 0.0, v_ins)
            ids.append(vid)
            self.in_network += 1
            owner = self._lane_node[key]
            if owner is not None:
                self.node_arrivals[owner] += 1

        for node in net.nodes:
            self.controllers[node].tick()
        self.time_s += 1

        if self.trace_sink is not None:
            self._write_trace()

    def _exit_vehicle(self, vid: int) -> None:
        self.exited_total += 1
        self.in_network -= 1
        self._route[vid] = None
        self._free.append(vid)

    def _route_cost(self, link) -> float:
        return link.length_m / link.speed_limit_mps + 2.0 * self._link_queued[link.index]

    # -------------------------------------------------------------- decisions
    def apply_decisions(self, requests: Mapping[str, int]) -> dict[str, str]:
        """Run every node's action-trigger gate at a 5 s boundary."""
        events: dict[str, str] = {}
        for node in self.net.nodes:
            ctrl = self.controllers[node]
            event = apply_decision(ctrl, requests.get(node, ctrl.active_stage), self.time_s)
            events[node] = event
            if self.signal_log is not None:
                self.signal_log.log_decision(node, self.time_s, ctrl, event)
        return events

    # ---------------------------------------------------------------- sensing
    def lane_vehicle_count(self, link_idx: int, lane: int) -> int:
        L = self.net.link_length_m
        lo = L - self.config.detector_range_m
        ids = self.lanes[(link_idx, lane)]
        if lo <= 0.0:
            return len(ids)
        return sum(1 for vid in ids if self._pos[vid] > lo)

    def lane_queued_count(self, link_idx: int, lane: int) -> int:
        L = self.net.link_length_m
        lo = L - self.config.detector_range_m
        ids = self.lanes[(link_idx, lane)]
        return sum(
            1
            for vid in ids
            if self._speed[vid] < QUEUE_SPEED_MPS and (lo <= 0.0 or self._pos[vid] > lo)
        )

    def queued_movement_split(self, link_idx: int, lane: int) -> dict[int | None, int]:
        """Realized next-link counts of the queued vehicles on one lane.

        Keys are the link the vehicle will take after crossing the node at
        the end of its next link (None when that next link is its last).
        """
        counts: dict[int | None, int] = {}
        for vid in self.lanes[(link_idx, lane)]:
            if self._speed[vid] >= QUEUE_SPEED_MPS:
                continue
            route = self._route[vid]
            rp = self._route_pos[vid]
            nxt = route[rp + 2] if rp + 2 < len(route) else None
            counts[nxt] = counts.get(nxt, 0) + 1
        return counts

    def read_detectors(self, node: str) -> DetectorReading:
        """Entrance-lane H/Q plus interval waiting since the last reading."""
        h: list[float] = []
        q: list[float] = []
        for link_idx, lane in self.net.entrance_lanes(node):
            n_all = self.lane_vehicle_count(link_idx, lane)
            n_queued = self.lane_queued_count(link_idx, lane)
            h.append(min(1.0, 7.0 * n_all / 150.0))
            q.append(min(1.0, 7.0 * n_queued / 150.0))
        w = self.node_wait_acc[node] - self._last_wait_read[node]
        veh_s = self.node_presence_acc[node] - self._last_presence_read[node]
        self._last_wait_read[node] = self.node_wait_acc[node]
        self._last_presence_read[node] = self.node_presence_acc[node]
        return DetectorReading(node, h, q, w, veh_s)

    # ---------------------------------------------------------------- metrics
    def snapshot_metrics(self) -> MetricsRecord:
        total_delay = 0.0
        queued = 0
        fuel = 0.0
        count = 0
        coeffs = self.config.fuel
        for ids in self.lanes.values():
            for vid in ids:
                v = self._speed[vid]
                total_delay += self._delay[vid]
                if v < QUEUE_SPEED_MPS:
                    queued += 1
                fuel += fuel_rate(v, v - self._prev_speed[vid], coeffs)
                count += 1
        pending = sum(len(d) for d in self.pending.values())
        empty = count == 0
        avg = 0.0 if empty else float(total_delay) / count
        return MetricsRecord(
            time_s=self.time_s,
            avg_delay_s_per_veh=avg,
            queued_vehicles=queued,
            fuel_rate_ml_per_s=float(fuel),
            inserted=self.spawned_total,
            exited=self.exited_total,
            pending=pending,
            empty_network=empty,
        )

    def pending_total(self) -> int:
        return sum(len(d) for d in self.pending.values())

    # ------------------------------------------------------------------ views
    def iter_vehicles(self) -> Iterator[Vehicle]:
        for (li, lane), ids in self.lanes.items():
            for vid in ids:
                yield Vehicle(
                    id=self._trip_id[vid],
                    route=self._route[vid],
                    route_pos=self._route_pos[vid],
                    lane=lane,
                    position_m=float(self._pos[vid]),
                    speed_mps=float(self._speed[vid]),
                    entered_network_at_s=self._entered_s[vid],
                    cumulative_delay_s=float(self._delay[vid]),
                    current_wait_spell_s=float(self._wait[vid]),
                    length_m=self.config.vehicle_length_m,
                    min_gap_m=self.config.min_gap_m,
                )

    def lane_positions(self, link_idx: int, lane: int) -> list[float]:
        return [float(self._pos[vid]) for vid in self.lanes[(link_idx, lane)]]

    def _write_trace(self) -> None:
        for (li, lane), ids in self.lanes.items():
            for vid in ids:
                self.trace_sink.write(
                    json.dumps(
                        {
                            "t": self.time_s,
                            "id": self._trip_id[vid],
                            "link": self.net.links[li].link_id,
                            "lane": lane,
                            "pos": round(float(self._pos[vid]), 3),
                            "speed": round(float(self._speed[vid]), 3),
                        }
                    )
                    + "\n"
                )
