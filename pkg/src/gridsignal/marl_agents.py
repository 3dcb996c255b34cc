"""Decentralized learning controllers for the grid's sixteen intersections.

Three schemes share one agent fleet:

- ``idql``  — each agent sees only its own intersection (11-component
  observation) and its own reward.
- ``s2rl``  — the agent's network input concatenates its neighbors'
  observations (in north, south, west, east order) after its own; rewards
  stay local.
- ``s2r2l`` — like ``s2rl``, plus rewards blend the agent's own reward
  with its neighbors' through a self-weight ``n``:
  φ = (n·r_self + Σ r_j) / (n + |J|).

Each intersection owns an independent deep Q learner — no parameter or
memory sharing. Observations are built from the entrance-lane detectors
(occupancy and queue ratios), the active-stage one-hot, and the elapsed
green ratio, every component in [0, 1].

Rewards compare consecutive control intervals' accrued waiting time. The
default sign rewards a *decrease* in waiting (r = −(w_now − w_prev)) so
that maximizing return shortens queues; the literal opposite sign is kept
behind a flag for fidelity experiments.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import IO, TYPE_CHECKING, Iterable, Mapping, Sequence

import numpy as np

from . import seeds
from .deep_q import DqnLearner, DqnLearnerConfig
from .neuralnet import clone_params, forward, load_checkpoint, save_checkpoint
from .signal_exec import SignalControllerState, elapsed_ratio, one_hot_stage

if TYPE_CHECKING:  # pragma: no cover
    from .grid_scenario import RoadNetwork
    from .microsim import DetectorReading, GridSim

__all__ = [
    "IDQL",
    "S2RL",
    "S2R2L",
    "MARL_SCHEMES",
    "OBSERVATION_LEN",
    "assemble_observation",
    "assemble_shared_state",
    "local_reward",
    "shared_reward",
    "state_width",
    "AgentEpisodeLog",
    "AgentFleet",
    "TRAINING_LOG_HEADER",
]

IDQL = "idql"
S2RL = "s2rl"
S2R2L = "s2r2l"
MARL_SCHEMES = (IDQL, S2RL, S2R2L)

OBSERVATION_LEN = 11

TRAINING_LOG_HEADER = "episode,learn_steps,mean_abs_td,epsilon,reward_sum"


def assemble_observation(
    detector: "DetectorReading", signal: SignalControllerState
) -> np.ndarray:
    """One intersection's 11-component state vector.

    Component order: occupancy ratios for the four entrance lanes, queue
    ratios for the same lanes, the active (or incoming) stage one-hot,
    and the elapsed green ratio. Lane order follows the detector reading:
    [EB through, EB turn, SB through, SB turn].
    """
    if len(detector.h) != 4 or len(detector.q) != 4:
        raise ValueError(
            f"expected 4 entrance lanes, got {len(detector.h)}/{len(detector.q)}"
        )
    return np.array(
        detector.h + detector.q + one_hot_stage(signal) + [elapsed_ratio(signal)],
        dtype=np.float64,
    )


def assemble_shared_state(
    own: np.ndarray, neighbor_obs: Sequence[np.ndarray]
) -> np.ndarray:
    """Own observation first, then neighbors' in their fixed order."""
    return np.concatenate([own, *neighbor_obs]) if neighbor_obs else own.copy()


def local_reward(w_now: float, w_prev: float, literal_sign: bool = False) -> float:
    """Difference of consecutive intervals' accrued waiting time.

    Default sign is negative-of-increase, so less added waiting means a
    larger reward; ``literal_sign`` flips to the raw difference.
    """
    delta = w_now - w_prev
    return delta if literal_sign else -delta


def shared_reward(
    r_self: float, neighbor_rewards: Iterable[float], n: float = 2.0
) -> float:
    """Self-weighted blend of own and neighbor rewards.

    φ = (n·r_self + Σ r_j) / (n + |J|). At n = 0 this is the plain
    neighbor mean; as n grows it approaches r_self.
    """
    if n < 0:
        raise ValueError(f"self-weight must be >= 0, got {n}")
    rewards = list(neighbor_rewards)
    if n + len(rewards) == 0:
        raise ValueError("self-weight 0 with no neighbors leaves the blend undefined")
    return (n * r_self + sum(rewards)) / (n + len(rewards))


def state_width(scheme: str, n_neighbors: int) -> int:
    """Network input width for one agent under the given scheme."""
    if scheme not in MARL_SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {MARL_SCHEMES}")
    if scheme == IDQL:
        return OBSERVATION_LEN
    return (n_neighbors + 1) * OBSERVATION_LEN


@dataclass
class AgentEpisodeLog:
    """One agent's per-episode training log row."""

    episode: int
    learn_steps: int
    mean_abs_td: float
    epsilon: float
    reward_sum: float

    def csv_row(self) -> str:
        return (
            f"{self.episode},{self.learn_steps},{float(self.mean_abs_td)!r},"
            f"{float(self.epsilon)!r},{float(self.reward_sum)!r}"
        )


class AgentFleet:
    """Sixteen independent agents acting synchronously at control steps.

    The fleet owns one learner per intersection, seeded from the master
    seed through the per-agent named streams (init / explore / replay /
    dropout, indexed by node order). ``explore_seed`` may be overridden to
    perturb exploration alone, leaving demand and every other stream
    untouched.
    """

    def __init__(
        self,
        net: "RoadNetwork",
        scheme: str,
        config: DqnLearnerConfig | None = None,
        master_seed: int = 0,
        *,
        self_weight_n: float = 2.0,
        literal_reward_sign: bool = False,
        learn_every: int = 16,
        explore_seed: int | None = None,
        state_action_sink: IO[str] | None = None,
    ) -> None:
        if scheme not in MARL_SCHEMES:
            raise ValueError(
                f"unknown scheme {scheme!r}; expected one of {MARL_SCHEMES}"
            )
        if learn_every < 1:
            raise ValueError(f"learn_every must be >= 1, got {learn_every}")
        if self_weight_n < 0:
            raise ValueError(f"self-weight must be >= 0, got {self_weight_n}")
        self.net = net
        self.scheme = scheme
        self.config = config or DqnLearnerConfig()
        self.self_weight_n = float(self_weight_n)
        self.literal_reward_sign = literal_reward_sign
        self.learn_every = learn_every
        self.state_action_sink = state_action_sink

        self.nodes: list[str] = list(net.nodes)
        self.neighbors: dict[str, list[str]] = {
            n: list(net.neighbors[n]) for n in self.nodes
        }
        explore_master = master_seed if explore_seed is None else explore_seed
        self.learners: dict[str, DqnLearner] = {}
        for index, node in enumerate(self.nodes):
            width = state_width(scheme, len(self.neighbors[node]))
            self.learners[node] = DqnLearner(
                width,
                self.config,
                init_rng=seeds.stream(master_seed, seeds.INIT, index),
                explore_rng=seeds.stream(explore_master, seeds.EXPLORE, index),
                per_rng=seeds.stream(master_seed, seeds.PER, index),
                dropout_rng=seeds.stream(master_seed, seeds.DROPOUT, index),
            )

        self.reward_log: list[dict[str, float]] = []
        self._w_prev: dict[str, float] | None = None
        self._pending: tuple[dict[str, np.ndarray], dict[str, int]] | None = None
        self._acting_steps = 0
        self._episode_reward_sum: dict[str, float] = {n: 0.0 for n in self.nodes}
        self._episode_td: dict[str, list[float]] = {n: [] for n in self.nodes}

    # ------------------------------------------------------------- stepping
    def _observations(self, sim: "GridSim") -> tuple[dict, dict]:
        obs: dict[str, np.ndarray] = {}
        w_now: dict[str, float] = {}
        for node in self.nodes:
            reading = sim.read_detectors(node)
            obs[node] = assemble_observation(reading, sim.controllers[node])
            w_now[node] = reading.interval_waiting_s
        return obs, w_now

    def _states(self, obs: Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
        if self.scheme == IDQL:
            return {n: obs[n] for n in self.nodes}
        return {
            n: assemble_shared_state(obs[n], [obs[j] for j in self.neighbors[n]])
            for n in self.nodes
        }

    def _scheme_rewards(self, local: Mapping[str, float]) -> dict[str, float]:
        if self.scheme != S2R2L:
            return dict(local)
        return {
            n: shared_reward(
                local[n], (local[j] for j in self.neighbors[n]), self.self_weight_n
            )
            for n in self.nodes
        }

    def control_step(
        self, sim: "GridSim", *, act: bool = True, learning: bool = True
    ) -> dict[str, int]:
        """One synchronous fleet step at a control boundary.

        Reads every intersection's detectors (keeping the waiting-time
        intervals aligned even while another controller is driving, e.g.
        during warm-up), completes the pending experiences with this
        interval's rewards, optionally runs a learning step, and — when
        ``act`` — picks each agent's next stage request.
        """
        obs, w_now = self._observations(sim)
        states = self._states(obs)

        rewards: dict[str, float] | None = None
        if self._w_prev is not None:
            local = {
                n: local_reward(w_now[n], self._w_prev[n], self.literal_reward_sign)
                for n in self.nodes
            }
            rewards = self._scheme_rewards(local)
            self.reward_log.append(rewards)

        if self._pending is not None and rewards is not None:
            prev_states, prev_actions = self._pending
            for node in self.nodes:
                self._episode_reward_sum[node] += rewards[node]
                if learning:
                    self.learners[node].observe(
                        prev_states[node],
                        prev_actions[node],
                        rewards[node],
                        states[node],
                        done=False,
                    )

        actions: dict[str, int] = {}
        if act:
            if learning and self._acting_steps % self.learn_every == 0:
                for node in self.nodes:
                    result = self.learners[node].learn_step()
                    if result is not None:
                        self._episode_td[node].append(result.mean_abs_td)
            epsilon = None if learning else 0.0
            for node in self.nodes:
                action = self.learners[node].select_action(states[node], epsilon)
                actions[node] = action
                if self.state_action_sink is not None:
                    self.state_action_sink.write(
                        json.dumps(
                            {
                                "t": sim.time_s,
                                "node": node,
                                "state": states[node].tolist(),
                                "action": action,
                            }
                        )
                        + "\n"
                    )
            self._pending = (states, actions)
            self._acting_steps += 1
        else:
            self._pending = None

        self._w_prev = w_now
        return actions

    def end_episode(self, episode: int) -> dict[str, AgentEpisodeLog]:
        """Close the episode: flush n-step windows, emit per-agent log rows.

        Exploration schedules and replay memories persist into the next
        episode; only the per-episode bookkeeping resets.
        """
        logs: dict[str, AgentEpisodeLog] = {}
        for node in self.nodes:
            learner = self.learners[node]
            learner.end_episode()
            td = self._episode_td[node]
            logs[node] = AgentEpisodeLog(
                episode=episode,
                learn_steps=learner.learn_steps,
                mean_abs_td=float(np.mean(td)) if td else 0.0,
                epsilon=learner.epsilon(),
                reward_sum=self._episode_reward_sum[node],
            )
        self._w_prev = None
        self._pending = None
        self.reward_log = []
        self._episode_reward_sum = {n: 0.0 for n in self.nodes}
        self._episode_td = {n: [] for n in self.nodes}
        return logs

    # ---------------------------------------------------------- checkpoints
    def save_checkpoints(self, directory) -> None:
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        for node in self.nodes:
            save_checkpoint(
                self.learners[node].local,
                out / f"{node}.ckpt",
                extra_text=f"scheme={self.scheme}\nnode={node}\n",
            )

    def load_checkpoints(self, directory) -> None:
        src = Path(directory)
        for node in self.nodes:
            path = src / f"{node}.ckpt"
            if not path.exists():
                raise FileNotFoundError(f"missing checkpoint for {node}: {path}")
            params, _ = load_checkpoint(path)
            expected = state_width(self.scheme, len(self.neighbors[node]))
            if params.in_dim != expected:
                raise ValueError(
                    f"checkpoint width mismatch for {node}: file has input "
                    f"{params.in_dim}, scheme {self.scheme!r} needs {expected}"
                )
            learner = self.learners[node]
            learner.local = params
            learner.target = clone_params(params)

    # ----------------------------------------------------------- inspection
    def q_values(self, node: str, state: np.ndarray) -> np.ndarray:
        """Greedy-evaluation forward pass of one agent's current net."""
        return forward(self.learners[node].local, state)
