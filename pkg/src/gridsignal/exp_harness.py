"""Experiment orchestration: configs, training/testing loops, sweeps, outputs.

A run is a (scheme, demand schedule, seed set) triple driven episode by
episode. Every episode starts with a Max-Pressure-controlled warm-up while
vehicles load, regardless of the scheme under test; metrics are recorded at
each post-warm-up control step. Training runs keep one persistent agent
fleet per seed — exploration schedules and replay memories carry across
episodes — and checkpoint every agent every episode. Testing runs act
greedily (ε = 0) with learning off.

Per-seed output directory layout::

    out/seed<seed>/
        metrics.csv       per-control-step stream (episode column first)
        summary.csv       per-episode aggregates (means of the stream)
        report_nodes.csv  per-intersection delay/queue table + Network row
        signals.jsonl     signal decisions and transitions
        agents/           final per-agent checkpoints (training runs)
        agents/ep<k>/     per-episode checkpoints
        agents/<node>_training.csv  per-agent episode log

Two profiles bundle the headline parameter sets: ``paper`` (50 episodes of
20 000 s) and ``desk`` (10 episodes of 4 000 s with the demand schedule
compressed fivefold and a faster learning cadence) for runs that finish on
a desktop.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import yaml

from . import seeds
from .deep_q import DqnLearnerConfig
from .grid_scenario import (
    TESTING_SEGMENTS,
    TRAINING_SEGMENTS,
    DemandSchedule,
    OdTable,
    RoadNetwork,
    build_grid,
    build_od_table,
    load_scenario,
)
from .marl_agents import MARL_SCHEMES, S2R2L, AgentFleet, TRAINING_LOG_HEADER
from .max_pressure import max_pressure_requests
from .microsim import METRICS_HEADER, GridSim, MetricsRecord
from .signal_exec import SignalEventLog

__all__ = [
    "MAX_PRESSURE",
    "RANDOM_BASELINE",
    "SCHEMES",
    "WEIGHT_CANDIDATES",
    "MAX_GREEN_VALUES",
    "ConfigError",
    "RunConfig",
    "EpisodeAggregate",
    "NodeReport",
    "RunResult",
    "apply_profile",
    "config_from_mapping",
    "load_config_file",
    "compress_schedule",
    "schedule_for",
    "run_training",
    "run_testing",
    "sweep_reward_weight",
    "sweep_max_green",
    "read_summary_csv",
    "read_metrics_csv",
]

MAX_PRESSURE = "max_pressure"
RANDOM_BASELINE = "random_baseline"
SCHEMES = MARL_SCHEMES + (MAX_PRESSURE, RANDOM_BASELINE)

WEIGHT_CANDIDATES = (0.0, 0.5, 1.0, 2.0, 3.0, 5.0, 10.0, 100.0, 1000.0)
MAX_GREEN_VALUES = (30, 40, 50, 60)

HARNESS_METRICS_HEADER = "episode," + METRICS_HEADER
SUMMARY_HEADER = (
    "seed,episode,mean_delay_s_per_veh,mean_queued_veh,mean_fuel_ml_per_s,"
    "inserted,exited,pending"
)
NODE_REPORT_HEADER = "node,avg_delay_s_per_veh,avg_queue_veh"


class ConfigError(ValueError):
    """Invalid run configuration; the message lists the offending keys."""


@dataclass(frozen=True)
class RunConfig:
    """Everything one experiment run depends on.

    ``schedule`` picks the demand distribution family ("training" or
    "testing"); ``schedule_compression`` divides each segment's duration
    (the desk profile compresses 5 000 s segments to 1 000 s);
    ``demand_scale`` multiplies every segment's arrival probability.
    """

    scheme: str = S2R2L
    schedule: str = "training"
    episodes: int = 50
    episode_length_s: int = 20_000
    warmup_s: int = 300
    control_step_s: int = 5
    learn_every: int = 16
    min_green_s: int = 10
    max_green_s: int = 60
    self_weight_n: float = 2.0
    literal_reward_sign: bool = False
    seeds: tuple[int, ...] = (1,)
    out_dir: str = "runs/latest"
    demand_scale: float = 1.0
    schedule_compression: int = 1
    grid_rows: int = 4
    grid_cols: int = 4
    scenario_path: str | None = None
    dqn: DqnLearnerConfig = field(default_factory=DqnLearnerConfig)

    def validate(self) -> "RunConfig":
        problems: list[str] = []
        if self.scheme not in SCHEMES:
            problems.append(f"scheme: {self.scheme!r} not one of {SCHEMES}")
        if self.schedule not in ("training", "testing"):
            problems.append(f"schedule: {self.schedule!r} not training/testing")
        if self.episodes < 1:
            problems.append(f"episodes: must be >= 1, got {self.episodes}")
        if self.control_step_s < 1:
            problems.append(f"control_step_s: must be >= 1, got {self.control_step_s}")
        if self.warmup_s < 0 or self.warmup_s % self.control_step_s:
            problems.append(
                f"warmup_s: must be a non-negative multiple of control_step_s, "
                f"got {self.warmup_s}"
            )
        if (
            self.episode_length_s <= self.warmup_s
            or self.episode_length_s % self.control_step_s
        ):
            problems.append(
                f"episode_length_s: must exceed warmup_s and divide into control "
                f"steps, got {self.episode_length_s}"
            )
        if self.learn_every < 1:
            problems.append(f"learn_every: must be >= 1, got {self.learn_every}")
        if self.min_green_s < 0 or self.max_green_s < self.min_green_s:
            problems.append(
                f"max_green_s: green bounds invalid ({self.min_green_s}, "
                f"{self.max_green_s})"
            )
        if not self.seeds:
            problems.append("seeds: at least one seed required")
        if self.demand_scale <= 0:
            problems.append(f"demand_scale: must be > 0, got {self.demand_scale}")
        if self.schedule_compression < 1:
            problems.append(
                f"schedule_compression: must be >= 1, got {self.schedule_compression}"
            )
        if self.self_weight_n < 0:
            problems.append(f"self_weight_n: must be >= 0, got {self.self_weight_n}")
        if problems:
            raise ConfigError("invalid config — " + "; ".join(problems))
        return self


PROFILES = ("desk", "paper")


def apply_profile(config: RunConfig, profile: str) -> RunConfig:
    """Overlay a named parameter bundle onto the config.

    ``paper`` restores the headline training scale and learner defaults;
    ``desk`` shrinks the run to desktop scale: fewer, shorter episodes over
    a fivefold-compressed schedule, with a denser learning cadence, a hotter
    step size, and a shorter credit horizon (calibrated so the learned
    schemes converge within the shortened budget without diverging).
    """
    if profile == "paper":
        return replace(
            config,
            episodes=50,
            episode_length_s=20_000,
            schedule_compression=1,
            learn_every=16,
            dqn=replace(config.dqn, eta=1e-4, gamma=0.99),
        )
    if profile == "desk":
        return replace(
            config,
            episodes=10,
            episode_length_s=4_000,
            schedule_compression=5,
            learn_every=2,
            seeds=config.seeds if len(config.seeds) >= 3 else (1, 2, 3),
            dqn=replace(config.dqn, eta=3e-4, gamma=0.9),
        )
    raise ConfigError(f"invalid config — profile: {profile!r} not one of {PROFILES}")


def config_from_mapping(mapping: Mapping, base: RunConfig | None = None) -> RunConfig:
    """Build a config from plain keys (e.g. a parsed config file).

    Unknown keys are rejected with every offender named. The ``dqn`` key
    takes a nested mapping of learner fields.
    """
    base = base or RunConfig()
    run_fields = {f.name for f in dataclasses.fields(RunConfig)}
    dqn_fields = {f.name for f in dataclasses.fields(DqnLearnerConfig)}
    unknown = [k for k in mapping if k not in run_fields]
    dqn_map = mapping.get("dqn") or {}
    if not isinstance(dqn_map, Mapping):
        raise ConfigError("invalid config — dqn: expected a mapping of learner keys")
    unknown += [f"dqn.{k}" for k in dqn_map if k not in dqn_fields]
    if unknown:
        raise ConfigError(
            "invalid config — unknown keys: " + ", ".join(sorted(unknown))
        )
    updates = {k: v for k, v in mapping.items() if k != "dqn"}
    if "seeds" in updates:
        updates["seeds"] = tuple(int(s) for s in updates["seeds"])
    if "hidden_dims" in dqn_map:
        dqn_map = dict(dqn_map)
        dqn_map["hidden_dims"] = tuple(int(d) for d in dqn_map["hidden_dims"])
    dqn = replace(base.dqn, **dqn_map) if dqn_map else base.dqn
    return replace(base, dqn=dqn, **updates)


def load_config_file(path: str, base: RunConfig | None = None) -> RunConfig:
    with open(path) as fh:
        raw = yaml.safe_load(fh) or {}
    if not isinstance(raw, Mapping):
        raise ConfigError(f"invalid config — {path}: expected a mapping at top level")
    return config_from_mapping(raw, base)


# --------------------------------------------------------------------- demand
def compress_schedule(schedule: DemandSchedule, factor: int) -> DemandSchedule:
    """Divide every segment's duration by ``factor`` (must divide evenly)."""
    if factor == 1:
        return schedule
    segments = []
    for duration, p in schedule.segments:
        if duration % factor:
            raise ConfigError(
                f"invalid config — schedule_compression: {factor} does not divide "
                f"segment duration {duration}"
            )
        segments.append((duration // factor, p))
    return DemandSchedule(segments=segments)


def schedule_for(config: RunConfig) -> DemandSchedule:
    base = TRAINING_SEGMENTS if config.schedule == "training" else TESTING_SEGMENTS
    schedule = DemandSchedule(segments=list(base))
    schedule = compress_schedule(schedule, config.schedule_compression)
    if config.demand_scale != 1.0:
        schedule = DemandSchedule(
            segments=[
                (d, min(1.0, p * config.demand_scale)) for d, p in schedule.segments
            ]
        )
    return schedule


def _build_network(config: RunConfig) -> tuple[RoadNetwork, OdTable]:
    if config.scenario_path:
        net, od, _ = load_scenario(config.scenario_path).build()
        return net, od
    net = build_grid(config.grid_rows, config.grid_cols)
    return net, build_od_table(net)


# -------------------------------------------------------------------- results
@dataclass(frozen=True)
class EpisodeAggregate:
    """Per-episode means of the metric stream plus final counters."""

    seed: int
    episode: int
    mean_delay_s_per_veh: float
    mean_queued_veh: float
    mean_fuel_ml_per_s: float
    inserted: int
    exited: int
    pending: int

    def csv_row(self) -> str:
        return (
            f"{self.seed},{self.episode},{float(self.mean_delay_s_per_veh)!r},"
            f"{float(self.mean_queued_veh)!r},{float(self.mean_fuel_ml_per_s)!r},"
            f"{self.inserted},{self.exited},{self.pending}"
        )


@dataclass(frozen=True)
class NodeReport:
    """One intersection's (or the network's) delay/queue summary."""

    node: str
    avg_delay_s_per_veh: float
    avg_queue_veh: float

    def csv_row(self) -> str:
        return (
            f"{self.node},{float(self.avg_delay_s_per_veh)!r},"
            f"{float(self.avg_queue_veh)!r}"
        )


@dataclass
class RunResult:
    """Everything a run produced, with the streams kept for re-aggregation."""

    config: RunConfig
    out_dir: Path
    aggregates: list[EpisodeAggregate]
    metrics: dict[int, list[tuple[int, MetricsRecord]]]  # seed -> (episode, record)
    node_reports: dict[int, list[NodeReport]]  # seed -> last episode's table

    def mean_delay(self, seed: int | None = None) -> float:
        rows = [
            a.mean_delay_s_per_veh
            for a in self.aggregates
            if seed is None or a.seed == seed
        ]
        return float(np.mean(rows))

    def mean_delay_in_window(self, seed: int, t_lo: int, t_hi: int) -> float:
        """Mean per-step network delay over sim times in [t_lo, t_hi)."""
        values = [
            rec.avg_delay_s_per_veh
            for _, rec in self.metrics[seed]
            if t_lo <= rec.time_s < t_hi
        ]
        if not values:
            raise ValueError(f"no metric rows in window [{t_lo}, {t_hi})")
        return float(np.mean(values))


# -------------------------------------------------------------- episode loop
def _aggregate(
    records: Sequence[MetricsRecord], seed: int, episode: int
) -> EpisodeAggregate:
    last = records[-1]
    return EpisodeAggregate(
        seed=seed,
        episode=episode,
        mean_delay_s_per_veh=float(np.mean([r.avg_delay_s_per_veh for r in records])),
        mean_queued_veh=float(np.mean([r.queued_vehicles for r in records])),
        mean_fuel_ml_per_s=float(np.mean([r.fuel_rate_ml_per_s for r in records])),
        inserted=last.inserted,
        exited=last.exited,
        pending=last.pending,
    )


def _drive_episode(
    sim: GridSim,
    config: RunConfig,
    *,
    fleet: AgentFleet | None = None,
    ctrl_rng: np.random.Generator | None = None,
    learning: bool = False,
) -> tuple[list[MetricsRecord], list[NodeReport]]:
    """One episode: warm-up under Max Pressure, then the scheme's controller.

    Returns the post-warm-up metric stream and the per-intersection report
    (waiting seconds per arriving vehicle and mean entrance queue over the
    measured window, plus a Network total row).
    """
    nodes = sim.net.nodes
    records: list[MetricsRecord] = []
    queue_sums = {n: 0 for n in nodes}
    boundaries = 0
    wait_start: dict[str, float] | None = None
    arrivals_start: dict[str, int] | None = None

    for _ in range(config.episode_length_s):
        t = sim.time_s
        if t % config.control_step_s == 0:
            in_warmup = t < config.warmup_s
            if fleet is not None:
                fleet_actions = fleet.control_step(
                    sim, act=not in_warmup, learning=learning
                )
            if in_warmup:
                requests = max_pressure_requests(sim)
            elif fleet is not None:
                requests = fleet_actions
            elif config.scheme == MAX_PRESSURE:
                requests = max_pressure_requests(sim)
            else:
                assert ctrl_rng is not None
                requests = {n: int(ctrl_rng.integers(2)) for n in nodes}
            sim.apply_decisions(requests)
            if not in_warmup:
                if wait_start is None:
                    wait_start = dict(sim.node_wait_acc)
                    arrivals_start = dict(sim.node_arrivals)
                records.append(sim.snapshot_metrics())
                for n in nodes:
                    queue_sums[n] += sum(
                        sim.lane_queued_count(link, lane)
                        for link, lane in sim.net.entrance_lanes(n)
                    )
                boundaries += 1
        sim.tick()

    assert wait_start is not None and arrivals_start is not None
    node_rows: list[NodeReport] = []
    total_wait = 0.0
    total_arrivals = 0
    total_queue = 0.0
    for n in nodes:
        wait = sim.node_wait_acc[n] - wait_start[n]
        arrivals = sim.node_arrivals[n] - arrivals_start[n]
        queue = queue_sums[n] / boundaries
        node_rows.append(NodeReport(n, wait / max(1, arrivals), queue))
        total_wait += wait
        total_arrivals += arrivals
        total_queue += queue
    node_rows.append(
        NodeReport("Network", total_wait / max(1, total_arrivals), total_queue)
    )
    return records, node_rows


def _make_sim(
    net: RoadNetwork,
    od: OdTable,
    schedule: DemandSchedule,
    config: RunConfig,
    seed: int,
    episode: int,
    signal_log: SignalEventLog | None,
) -> GridSim:
    sim = GridSim(
        net, od, schedule, master_seed=seed, episode_index=episode, signal_log=signal_log
    )
    for ctrl in sim.controllers.values():
        ctrl.min_green_s = config.min_green_s
        ctrl.max_green_s = config.max_green_s
    return sim


# ------------------------------------------------------------------- writers
def _write_lines(path: Path, header: str, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(row + "\n")


def _metrics_row(episode: int, r: MetricsRecord) -> str:
    return (
        f"{episode},{r.time_s},{float(r.avg_delay_s_per_veh)!r},{r.queued_vehicles},"
        f"{float(r.fuel_rate_ml_per_s)!r},{r.inserted},{r.exited},{r.pending}"
    )


def read_metrics_csv(path) -> list[tuple[int, MetricsRecord]]:
    """Parse a harness metrics.csv back into (episode, record) pairs."""
    out = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != HARNESS_METRICS_HEADER:
            raise ValueError(f"unexpected metrics header: {header}")
        for line in fh:
            ep, t, d, qv, f, ins, ex, pen = line.strip().split(",")
            out.append(
                (
                    int(ep),
                    MetricsRecord(
                        int(t), float(d), int(qv), float(f), int(ins), int(ex), int(pen)
                    ),
                )
            )
    return out


def read_summary_csv(path) -> list[EpisodeAggregate]:
    out = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != SUMMARY_HEADER:
            raise ValueError(f"unexpected summary header: {header}")
        for line in fh:
            seed, ep, d, q, f, ins, ex, pen = line.strip().split(",")
            out.append(
                EpisodeAggregate(
                    int(seed), int(ep), float(d), float(q), float(f),
                    int(ins), int(ex), int(pen),
                )
            )
    return out


def _write_seed_outputs(
    seed_dir: Path,
    seed: int,
    metric_rows: list[tuple[int, MetricsRecord]],
    aggregates: list[EpisodeAggregate],
    node_rows: list[NodeReport],
) -> None:
    _write_lines(
        seed_dir / "metrics.csv",
        HARNESS_METRICS_HEADER,
        (_metrics_row(ep, rec) for ep, rec in metric_rows),
    )
    _write_lines(
        seed_dir / "summary.csv", SUMMARY_HEADER, (a.csv_row() for a in aggregates)
    )
    _write_lines(
        seed_dir / "report_nodes.csv",
        NODE_REPORT_HEADER,
        (row.csv_row() for row in node_rows),
    )


# ---------------------------------------------------------------------- runs
def _resolve_checkpoints(checkpoint_root, seed: int) -> Path:
    """Per-seed agents directory under the root, or the root itself."""
    root = Path(checkpoint_root)
    per_seed = root / f"seed{seed}" / "agents"
    if per_seed.is_dir():
        return per_seed
    if next(root.glob("*.ckpt"), None) is not None:
        return root
    raise FileNotFoundError(
        f"no checkpoints under {root} (looked for {per_seed} and {root}/*.ckpt)"
    )


def run_training(config: RunConfig) -> RunResult:
    """Train one fleet per seed across the configured episodes.

    Exploration and replay persist across episodes within a seed. Every
    episode checkpoints all sixteen agents; the final nets land flat in
    ``agents/``.
    """
    config.validate()
    if config.scheme not in MARL_SCHEMES:
        raise ConfigError(
            f"invalid config — scheme: training needs one of {MARL_SCHEMES}, "
            f"got {config.scheme!r}"
        )
    net, od = _build_network(config)
    schedule = schedule_for(config)
    out_root = Path(config.out_dir)
    result = RunResult(config, out_root, [], {}, {})

    for seed in config.seeds:
        seed_dir = out_root / f"seed{seed}"
        seed_dir.mkdir(parents=True, exist_ok=True)
        fleet = AgentFleet(
            net,
            config.scheme,
            config.dqn,
            master_seed=seed,
            self_weight_n=config.self_weight_n,
            literal_reward_sign=config.literal_reward_sign,
            learn_every=config.learn_every,
        )
        metric_rows: list[tuple[int, MetricsRecord]] = []
        aggregates: list[EpisodeAggregate] = []
        agent_logs: dict[str, list[str]] = {n: [] for n in fleet.nodes}
        node_rows: list[NodeReport] = []
        with open(seed_dir / "signals.jsonl", "w") as signal_sink:
            log = SignalEventLog(sink=signal_sink)
            for episode in range(config.episodes):
                sim = _make_sim(net, od, schedule, config, seed, episode, log)
                records, node_rows = _drive_episode(
                    sim, config, fleet=fleet, learning=True
                )
                aggregates.append(_aggregate(records, seed, episode))
                metric_rows.extend((episode, r) for r in records)
                for node, row in fleet.end_episode(episode).items():
                    agent_logs[node].append(row.csv_row())
                fleet.save_checkpoints(seed_dir / "agents" / f"ep{episode:03d}")
        fleet.save_checkpoints(seed_dir / "agents")
        for node, rows in agent_logs.items():
            _write_lines(
                seed_dir / "agents" / f"{node}_training.csv",
                TRAINING_LOG_HEADER,
                rows,
            )
        _write_seed_outputs(seed_dir, seed, metric_rows, aggregates, node_rows)
        result.aggregates.extend(aggregates)
        result.metrics[seed] = metric_rows
        result.node_reports[seed] = node_rows
    return result


def run_testing(config: RunConfig, checkpoint_root=None) -> RunResult:
    """One greedy evaluation episode per seed on the testing demand.

    Learned schemes load per-agent checkpoints when ``checkpoint_root`` is
    given (per-seed ``seed<k>/agents`` directories or one flat directory);
    without it they evaluate their freshly initialized nets, which is the
    honest untrained baseline.
    """
    config = replace(config, schedule="testing", episodes=1)
    config.validate()
    net, od = _build_network(config)
    schedule = schedule_for(config)
    out_root = Path(config.out_dir)
    result = RunResult(config, out_root, [], {}, {})

    for seed in config.seeds:
        seed_dir = out_root / f"seed{seed}"
        seed_dir.mkdir(parents=True, exist_ok=True)
        fleet = None
        ctrl_rng = None
        if config.scheme in MARL_SCHEMES:
            fleet = AgentFleet(
                net,
                config.scheme,
                config.dqn,
                master_seed=seed,
                self_weight_n=config.self_weight_n,
                literal_reward_sign=config.literal_reward_sign,
                learn_every=config.learn_every,
            )
            if checkpoint_root is not None:
                fleet.load_checkpoints(_resolve_checkpoints(checkpoint_root, seed))
        elif config.scheme == RANDOM_BASELINE:
            ctrl_rng = seeds.stream(seed, seeds.CTRL_RANDOM, 0)
        with open(seed_dir / "signals.jsonl", "w") as signal_sink:
            log = SignalEventLog(sink=signal_sink)
            sim = _make_sim(net, od, schedule, config, seed, 0, log)
            records, node_rows = _drive_episode(
                sim, config, fleet=fleet, ctrl_rng=ctrl_rng, learning=False
            )
        aggregates = [_aggregate(records, seed, 0)]
        metric_rows = [(0, r) for r in records]
        _write_seed_outputs(seed_dir, seed, metric_rows, aggregates, node_rows)
        result.aggregates.extend(aggregates)
        result.metrics[seed] = metric_rows
        result.node_reports[seed] = node_rows
    return result


# -------------------------------------------------------------------- sweeps
def sweep_reward_weight(
    config: RunConfig, candidates: Sequence[float] = WEIGHT_CANDIDATES
) -> list[dict]:
    """Train-then-test the reward blend at each candidate self-weight.

    Emits one summary row per candidate; the per-candidate metrics.csv
    streams are the box-plot-ready distributions. The 0 candidate is the
    neighbor-only degenerate and is flagged as such (flag only — its
    outcome is an experimental question, not an assertion).
    """
    config.validate()
    if config.scheme != S2R2L:
        raise ConfigError(
            f"invalid config — scheme: the reward-weight sweep varies the "
            f"{S2R2L} blend, got {config.scheme!r}"
        )
    out_root = Path(config.out_dir)
    rows: list[dict] = []
    for candidate in candidates:
        label = f"{candidate:g}"
        base = replace(config, self_weight_n=float(candidate))
        train = run_training(
            replace(base, out_dir=str(out_root / f"weight_{label}" / "train"))
        )
        test = run_testing(
            replace(base, out_dir=str(out_root / f"weight_{label}" / "test")),
            checkpoint_root=train.out_dir,
        )
        rows.append(
            {
                "self_weight_n": float(candidate),
                "mean_delay_s_per_veh": test.mean_delay(),
                "mean_queued_veh": float(
                    np.mean([a.mean_queued_veh for a in test.aggregates])
                ),
                "mean_fuel_ml_per_s": float(
                    np.mean([a.mean_fuel_ml_per_s for a in test.aggregates])
                ),
                "neighbor_only_degenerate": candidate == 0,
            }
        )
    _write_lines(
        out_root / "sweep_weight.csv",
        "self_weight_n,mean_delay_s_per_veh,mean_queued_veh,mean_fuel_ml_per_s,"
        "neighbor_only_degenerate",
        (
            f"{r['self_weight_n']!r},{r['mean_delay_s_per_veh']!r},"
            f"{r['mean_queued_veh']!r},{r['mean_fuel_ml_per_s']!r},"
            f"{str(r['neighbor_only_degenerate']).lower()}"
            for r in rows
        ),
    )
    return rows


def sweep_max_green(
    config: RunConfig,
    checkpoint_root,
    values: Sequence[int] = MAX_GREEN_VALUES,
) -> list[dict]:
    """Re-test a fixed trained fleet and Max Pressure at each green cap.

    No retraining: the same checkpoints are evaluated under every cap.
    """
    config.validate()
    bad = [v for v in values if v < config.min_green_s]
    if bad:
        raise ConfigError(
            f"invalid config — max_green_s: values {bad} below the "
            f"{config.min_green_s} s minimum green"
        )
    out_root = Path(config.out_dir)
    rows: list[dict] = []
    for value in values:
        for scheme, ckpt in ((S2R2L, checkpoint_root), (MAX_PRESSURE, None)):
            sub = replace(
                config,
                scheme=scheme,
                max_green_s=int(value),
                out_dir=str(out_root / f"maxgreen_{value}" / scheme),
            )
            test = run_testing(sub, checkpoint_root=ckpt)
            rows.append(
                {
                    "scheme": scheme,
                    "max_green_s": int(value),
                    "mean_delay_s_per_veh": test.mean_delay(),
                    "mean_queued_veh": float(
                        np.mean([a.mean_queued_veh for a in test.aggregates])
                    ),
                }
            )
    _write_lines(
        out_root / "sweep_maxgreen.csv",
        "scheme,max_green_s,mean_delay_s_per_veh,mean_queued_veh",
        (
            f"{r['scheme']},{r['max_green_s']},{r['mean_delay_s_per_veh']!r},"
            f"{r['mean_queued_veh']!r}"
            for r in rows
        ),
    )
    return rows
