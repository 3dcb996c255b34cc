"""One-way grid network, demand tables, and shortest-time routing.

The network is a rows×cols Manhattan grid in which every horizontal street
runs eastbound and every vertical street runs southbound. Row entries
(``In01``..) sit 150 m west of the first column; column entries (``In11``..)
sit 150 m north of the first row; exits mirror them on the east/south sides.
Every link has two lanes: lane 0 serves the through movement at the link's
end node, lane 1 the turning movement.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import yaml

EAST = "E"
SOUTH = "S"

THROUGH = 0
TURN = 1


@dataclass(frozen=True)
class Link:
    """A directed road segment with uniform lanes."""

    index: int
    link_id: str
    src: str
    dst: str
    length_m: float
    lane_count: int
    speed_limit_mps: float
    kind: str  # "entry" | "interior" | "exit"
    direction: str  # EAST | SOUTH


@dataclass
class RoadNetwork:
    """Directed one-way grid with entry/exit stubs and per-node structure.

    ``approach_links[n]`` orders a node's incoming links [eastbound,
    southbound]; ``movement_targets[n]`` maps (approach, movement) to the
    outgoing link index, where movement 0 is through and 1 is the turn.
    ``neighbors[n]`` lists adjacent intersections in north, south, west, east
    order (absent ones skipped).
    """

    rows: int
    cols: int
    link_length_m: float
    speed_limit_mps: float
    nodes: list[str]
    node_rc: dict[str, tuple[int, int]]
    entries: list[str]
    exits: list[str]
    links: list[Link]
    link_by_id: dict[str, int]
    out_links: dict[str, list[int]]
    in_links: dict[str, list[int]]
    approach_links: dict[str, list[int]]
    movement_targets: dict[str, dict[tuple[int, int], int]]
    neighbors: dict[str, list[str]]
    link_update_order: list[int] = field(default_factory=list)

    def node_id(self, r: int, c: int) -> str:
        return f"X{r}{c}"

    def entrance_lanes(self, node: str) -> list[tuple[int, int]]:
        """The node's four entrance lanes as (link_index, lane), ordered
        [EB through, EB turn, SB through, SB turn]."""
        eb, sb = self.approach_links[node]
        return [(eb, THROUGH), (eb, TURN), (sb, THROUGH), (sb, TURN)]

    def exit_links(self, node: str) -> list[int]:
        """The node's outgoing links, ordered [east, south]."""
        return self.out_links[node]


def build_grid(
    rows: int,
    cols: int,
    link_length_m: float = 150.0,
    speed_limit_mps: float = 11.111,
) -> RoadNetwork:
    """Build the one-way grid network.

    Raises ValueError unless rows >= 2, cols >= 2 and link_length_m > 0.
    """
    if rows < 2 or cols < 2:
        raise ValueError(f"grid must be at least 2x2, got {rows}x{cols}")
    if link_length_m <= 0:
        raise ValueError("link_length_m must be positive")

    nodes = [f"X{r}{c}" for r in range(1, rows + 1) for c in range(1, cols + 1)]
    node_rc = {f"X{r}{c}": (r, c) for r in range(1, rows + 1) for c in range(1, cols + 1)}
    entries = [f"In0{r}" for r in range(1, rows + 1)] + [f"In1{c}" for c in range(1, cols + 1)]
    exits = [f"Out0{r}" for r in range(1, rows + 1)] + [f"Out1{c}" for c in range(1, cols + 1)]

    links: list[Link] = []

    def add_link(src: str, dst: str, kind: str, direction: str) -> int:
        idx = len(links)
        links.append(
            Link(
                index=idx,
                link_id=f"{src}->{dst}",
                src=src,
                dst=dst,
                length_m=link_length_m,
                lane_count=2,
                speed_limit_mps=speed_limit_mps,
                kind=kind,
                direction=direction,
            )
        )
        return idx

    # Eastbound rows: entry stub, interior links, exit stub.
    for r in range(1, rows + 1):
        add_link(f"In0{r}", f"X{r}1", "entry", EAST)
        for c in range(1, cols):
            add_link(f"X{r}{c}", f"X{r}{c + 1}", "interior", EAST)
        add_link(f"X{r}{cols}", f"Out0{r}", "exit", EAST)
    # Southbound columns.
    for c in range(1, cols + 1):
        add_link(f"In1{c}", f"X1{c}", "entry", SOUTH)
        for r in range(1, rows):
            add_link(f"X{r}{c}", f"X{r + 1}{c}", "interior", SOUTH)
        add_link(f"X{rows}{c}", f"Out1{c}", "exit", SOUTH)

    link_by_id = {lk.link_id: lk.index for lk in links}
    out_links: dict[str, list[int]] = {n: [] for n in nodes}
    in_links: dict[str, list[int]] = {n: [] for n in nodes}
    for lk in links:
        if lk.src in out_links:
            out_links[lk.src].append(lk.index)
        if lk.dst in in_links:
            in_links[lk.dst].append(lk.index)

    # Order out-links [east, south] and in-links [eastbound, southbound].
    for n in nodes:
        out_links[n].sort(key=lambda i: links[i].direction)  # "E" < "S"
        in_links[n].sort(key=lambda i: links[i].direction)

    approach_links = {n: list(in_links[n]) for n in nodes}
    movement_targets: dict[str, dict[tuple[int, int], int]] = {}
    for n in nodes:
        east_out, south_out = out_links[n]
        movement_targets[n] = {
            (0, THROUGH): east_out,  # eastbound approach, through
            (0, TURN): south_out,  # eastbound approach, right turn
            (1, THROUGH): south_out,  # southbound approach, through
            (1, TURN): east_out,  # southbound approach, left turn
        }

    neighbors: dict[str, list[str]] = {}
    for n in nodes:
        r, c = node_rc[n]
        cand = [(r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)]  # N, S, W, E
        neighbors[n] = [f"X{rr}{cc}" for rr, cc in cand if 1 <= rr <= rows and 1 <= cc <= cols]

    net = RoadNetwork(
        rows=rows,
        cols=cols,
        link_length_m=link_length_m,
        speed_limit_mps=speed_limit_mps,
        nodes=nodes,
        node_rc=node_rc,
        entries=entries,
        exits=exits,
        links=links,
        link_by_id=link_by_id,
        out_links=out_links,
        in_links=in_links,
        approach_links=approach_links,
        movement_targets=movement_targets,
        neighbors=neighbors,
    )
    net.link_update_order = _link_update_order(net)
    return net


def _link_update_order(net: RoadNetwork) -> list[int]:
    """Links ordered so that every link's possible target links come first.

    The one-way grid is a DAG, so a reverse topological order over link end
    nodes exists; the simulator relies on it to update leaders before
    followers across node boundaries.
    """
    order_pos: dict[str, int] = {}
    all_nodes = net.entries + net.nodes + net.exits
    indeg = {n: 0 for n in all_nodes}
    succ: dict[str, list[str]] = {n: [] for n in all_nodes}
    for lk in net.links:
        succ[lk.src].append(lk.dst)
        indeg[lk.dst] += 1
    ready = sorted(n for n in all_nodes if indeg[n] == 0)
    pos = 0
    while ready:
        n = ready.pop(0)
        order_pos[n] = pos
        pos += 1
        added = []
        for m in succ[n]:
            indeg[m] -= 1
            if indeg[m] == 0:
                added.append(m)
        ready.extend(sorted(added))
        ready.sort()
    return sorted(range(len(net.links)), key=lambda i: (-order_pos[net.links[i].dst], i))


@dataclass(frozen=True)
class Trip:
    """One vehicle's demand record: where and when it enters, where it exits."""

    trip_id: int
    entry: str
    exit: str
    created_s: int


@dataclass
class OdTable:
    """Permitted (entry, exit) pairs in a fixed enumeration order."""

    pairs: list[tuple[str, str]]
    permitted: dict[tuple[str, str], bool]

    def is_permitted(self, entry: str, exit_: str) -> bool:
        return self.permitted.get((entry, exit_), False)


def build_od_table(net: RoadNetwork) -> OdTable:
    """Enumerate permitted OD pairs.

    Same-side pairs (row->row, column->column) are permitted only when the
    destination index is >= the origin index; all cross pairs are permitted.
    On the default 4x4 grid this yields 52 pairs.
    """
    pairs: list[tuple[str, str]] = []
    permitted: dict[tuple[str, str], bool] = {}
    for e in net.entries:
        e_row = e.startswith("In0")
        e_idx = int(e[3:])
        for x in net.exits:
            x_row = x.startswith("Out0")
            x_idx = int(x[4:])
            ok = x_idx >= e_idx if e_row == x_row else True
            permitted[(e, x)] = ok
            if ok:
                pairs.append((e, x))
    return OdTable(pairs=pairs, permitted=permitted)


@dataclass
class DemandSchedule:
    """Ordered (duration_s, probability) segments covering one episode."""

    segments: list[tuple[int, float]]

    def __post_init__(self) -> None:
        for dur, p in self.segments:
            if dur <= 0:
                raise ValueError("segment durations must be positive")
            if not 0.0 <= p <= 1.0:
                raise ValueError("segment probabilities must be in [0, 1]")

    @property
    def horizon_s(self) -> int:
        return sum(d for d, _ in self.segments)

    def probability_at(self, sim_time_s: int) -> float:
        t = 0
        for dur, p in self.segments:
            t += dur
            if sim_time_s < t:
                return p
        raise ValueError(f"time {sim_time_s} outside schedule horizon {self.horizon_s}")

    def scaled(self, factor: float) -> "DemandSchedule":
        """Same probabilities, every duration multiplied by ``factor``."""
        return DemandSchedule([(max(1, int(round(d * factor))), p) for d, p in self.segments])


# Default schedules: four demand levels, 5000 s each (low/medium/high shifts).
TRAINING_SEGMENTS = [(5000, 0.10), (5000, 0.05), (5000, 0.20), (5000, 0.15)]
TESTING_SEGMENTS = [(5000, 0.15), (5000, 0.03), (5000, 0.25), (5000, 0.18)]


def spawn_trips(
    od: OdTable,
    schedule: DemandSchedule,
    sim_time_s: int,
    rng: np.random.Generator,
    next_trip_id: int = 0,
) -> list[Trip]:
    """Bernoulli trip generation for one second of simulated time.

    Each permitted pair independently emits one trip with the active
    segment's probability. Exactly one uniform draw is consumed per pair
    regardless of p, so demand streams with different probabilities stay
    aligned.
    """
    p = schedule.probability_at(sim_time_s)
    trips: list[Trip] = []
    for entry, exit_ in od.pairs:
        if rng.random() < p:
            trips.append(Trip(next_trip_id + len(trips), entry, exit_, sim_time_s))
    return trips


def free_flow_cost(link: Link) -> float:
    return link.length_m / link.speed_limit_mps


def route_trip(
    net: RoadNetwork,
    trip: Trip,
    travel_time_estimate: Callable[[Link], float],
    rng: np.random.Generator,
    cache: dict | None = None,
) -> list[int]:
    """Minimal-cost path from the trip's entry to its exit, as link indices.

    Ties are broken uniformly at random over ALL minimal-cost paths (path
    counting over the tight-edge DAG), consuming the trip's RNG stream.
    ``cache`` (optional) memoizes per-call invariants — costs, per-entry
    distance maps, per-pair path counts — so batches of trips routed against
    one cost snapshot share the graph work without changing any draw.
    """
    if not net.link_by_id:
        raise ValueError("empty network")
    if trip.entry not in net.entries or trip.exit not in net.exits:
        raise ValueError(f"unknown endpoints ({trip.entry}, {trip.exit})")
    if cache is None:
        cache = {}

    cost = cache.get("cost")
    if cost is None:
        cost = {lk.index: float(travel_time_estimate(lk)) for lk in net.links}
        cache["cost"] = cost
    succ = cache.get("succ")
    if succ is None:
        succ = {}
        for lk in net.links:
            succ.setdefault(lk.src, []).append(lk.index)
        cache["succ"] = succ

    dist = cache.get(("dist", trip.entry))
    if dist is None:
        # Dijkstra over the (acyclic, non-negative) node graph.
        dist = {trip.entry: 0.0}
        heap: list[tuple[float, str]] = [(0.0, trip.entry)]
        visited: set[str] = set()
        while heap:
            d, n = heapq.heappop(heap)
            if n in visited:
                continue
            visited.add(n)
            for li in succ.get(n, ()):
                lk = net.links[li]
                nd = d + cost[li]
                if nd < dist.get(lk.dst, float("inf")):
                    dist[lk.dst] = nd
                    heapq.heappush(heap, (nd, lk.dst))
        cache[("dist", trip.entry)] = dist
    if trip.exit not in dist:
        raise ValueError(f"exit {trip.exit} unreachable from {trip.entry}")

    def tight(n: str, li: int) -> bool:
        lk = net.links[li]
        return lk.dst in dist and dist[n] + cost[li] == dist[lk.dst]

    n_paths = cache.get(("npaths", trip.entry, trip.exit))
    if n_paths is None:
        # Count minimal-cost paths from each node to the exit over tight edges.
        n_paths = {trip.exit: 1.0}
        order = sorted(dist, key=lambda n: -dist[n])
        for n in order:
            if n == trip.exit:
                continue
            total = 0.0
            for li in succ.get(n, ()):
                if tight(n, li):
                    total += n_paths.get(net.links[li].dst, 0.0)
            n_paths[n] = total
        cache[("npaths", trip.entry, trip.exit)] = n_paths
    if n_paths.get(trip.entry, 0.0) <= 0:
        raise ValueError(f"no path from {trip.entry} to {trip.exit}")

    # Sample one path uniformly by weighting each tight edge by the number of
    # minimal paths through it.
    route: list[int] = []
    n = trip.entry
    while n != trip.exit:
        choices = [
            (li, n_paths.get(net.links[li].dst, 0.0))
            for li in succ.get(n, ())
            if tight(n, li) and n_paths.get(net.links[li].dst, 0.0) > 0
        ]
        if len(choices) == 1:
            li = choices[0][0]
        else:
            weights = np.array([w for _, w in choices], dtype=np.float64)
            u = rng.random() * float(weights.sum())
            acc = 0.0
            li = choices[-1][0]
            for cand, w in choices:
                acc += w
                if u < acc:
                    li = cand
                    break
        route.append(li)
        n = net.links[li].dst
    return route


@dataclass
class Scenario:
    """Everything needed to reproduce a network + demand setup."""

    rows: int = 4
    cols: int = 4
    link_length_m: float = 150.0
    speed_limit_mps: float = 11.111
    segments: list[tuple[int, float]] = field(default_factory=lambda: list(TESTING_SEGMENTS))
    seed: int = 0

    def build(self) -> tuple[RoadNetwork, OdTable, DemandSchedule]:
        net = build_grid(self.rows, self.cols, self.link_length_m, self.speed_limit_mps)
        return net, build_od_table(net), DemandSchedule(list(self.segments))


def save_scenario(path: str, sc: Scenario) -> None:
    doc = {
        "grid": {
            "rows": sc.rows,
            "cols": sc.cols,
            "link_length_m": sc.link_length_m,
            "speed_limit_mps": sc.speed_limit_mps,
        },
        "demand": {"segments": [[int(d), float(p)] for d, p in sc.segments]},
        "seed": sc.seed,
    }
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(doc, fh, sort_keys=False)


def load_scenario(path: str) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    grid = doc.get("grid", {})
    demand = doc.get("demand", {})
    return Scenario(
        rows=int(grid.get("rows", 4)),
        cols=int(grid.get("cols", 4)),
        link_length_m=float(grid.get("link_length_m", 150.0)),
        speed_limit_mps=float(grid.get("speed_limit_mps", 11.111)),
        segments=[(int(d), float(p)) for d, p in demand.get("segments", TESTING_SEGMENTS)],
        seed=int(doc.get("seed", 0)),
    )
