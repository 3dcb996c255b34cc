"""Deep Q-learning with prioritized replay, n-step returns, and a target net.

The learner owns two parameter records (local and target), a ring-buffer
replay memory with a cumulative-weight tree for proportional sampling, and
a sliding n-step window assembler.  One ``learn_step`` samples a batch,
builds bootstrapped targets with the local net selecting and the target net
evaluating, applies one mean-squared-error SGD step on the taken actions
only, refreshes the sampled priorities from the new TD errors, and copies
local into target every ``target_sync_every`` learn steps.

Exploration follows epsilon = max(decay^t, floor) where t counts executed
learn steps.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .neuralnet import (
    MlpCache,
    MlpParams,
    backward_batch,
    clone_params,
    copy_into,
    forward,
    forward_batch,
    mlp_init,
    sgd_step,
)

__all__ = [
    "SumTree",
    "Experience",
    "OneStepRecord",
    "ReplayMemory",
    "NStepAssembler",
    "DqnLearnerConfig",
    "DqnLearner",
    "LearnResult",
    "epsilon_schedule",
    "select_action",
    "push_nstep",
    "double_dqn_target",
]


class SumTree:
    """Binary tree of cumulative weights over a fixed number of leaf slots.

    Setting a leaf recomputes every ancestor as the exact sum of its two
    children (no incremental deltas), so the root never drifts from the
    true total by more than ordinary summation rounding.  ``find_prefix``
    descends from the root in O(log capacity): left when the remaining
    value is below the left child's sum, otherwise right with the value
    reduced — the same index ``searchsorted(cumsum(w), v, side="right")``
    would give.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be at least 1")
        self.capacity = capacity
        size = 1
        while size < capacity:
            size *= 2
        self._leaf_base = size
        self._nodes = [0.0] * (2 * size)

    @property
    def total(self) -> float:
        return self._nodes[1]

    def weight(self, index: int) -> float:
        if not (0 <= index < self.capacity):
            raise IndexError(f"leaf index {index} out of range")
        return self._nodes[self._leaf_base + index]

    def set_weight(self, index: int, weight: float) -> None:
        if not (0 <= index < self.capacity):
            raise IndexError(f"leaf index {index} out of range")
        if not (weight >= 0.0):
            raise ValueError(f"weight must be non-negative, got {weight}")
        i = self._leaf_base + index
        self._nodes[i] = weight
        i //= 2
        while i >= 1:
            self._nodes[i] = self._nodes[2 * i] + self._nodes[2 * i + 1]
            i //= 2

    def find_prefix(self, value: float) -> int:
        """Leaf index whose cumulative-weight interval contains ``value``."""
        i = 1
        nodes = self._nodes
        while i < self._leaf_base:
            left = nodes[2 * i]
            if value < left:
                i = 2 * i
            else:
                value -= left
                i = 2 * i + 1
        return i - self._leaf_base


@dataclass
class Experience:
    """One stored n-step transition.

    ``n_reward`` is the discounted sum over ``steps`` one-step rewards,
    ``bootstrap_state`` the state ``steps`` ticks after ``state`` (unused
    when ``done``), and ``priority`` the raw (pre-exponent) priority the
    memory maintains.
    """

    state: np.ndarray
    action: int
    n_reward: float
    bootstrap_state: np.ndarray
    done: bool
    steps: int
    priority: float = 1.0


class OneStepRecord(NamedTuple):
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    done: bool


class ReplayMemory:
    """Ring buffer with proportional prioritized sampling.

    Each entry's sampling weight is priority**alpha_per; alpha_per = 0
    gives uniform sampling.  New entries enter at the running maximum raw
    priority so everything gets sampled at least once; the oldest entry is
    overwritten first when full.
    """

    def __init__(self, capacity: int, alpha_per: float = 1.0,
                 epsilon_priority: float = 1e-6):
        if capacity < 1:
            raise ValueError("capacity must be at least 1")
        if alpha_per < 0.0:
            raise ValueError("alpha_per must be non-negative")
        if not (epsilon_priority > 0.0):
            raise ValueError("epsilon_priority must be positive")
        self.capacity = capacity
        self.alpha_per = alpha_per
        self.epsilon_priority = epsilon_priority
        self._data: list[Experience] = []
        self._next = 0
        self._tree = SumTree(capacity)
        self._max_priority = 1.0

    def __len__(self) -> int:
        return len(self._data)

    def __getitem__(self, index: int) -> Experience:
        return self._data[index]

    def push(self, experience: Experience) -> int:
        """Store at the running max priority; returns the slot index."""
        experience.priority = self._max_priority
        if len(self._data) < self.capacity:
            index = len(self._data)
            self._data.append(experience)
        else:
            index = self._next
            self._data[index] = experience
            self._next = (self._next + 1) % self.capacity
        self._tree.set_weight(index, experience.priority ** self.alpha_per)
        return index

    def sample(self, batch_size: int, rng: np.random.Generator
               ) -> tuple[list[Experience], list[int]]:
        """Draw ``batch_size`` independent proportional samples."""
        if not self._data:
            raise ValueError("cannot sample from an empty memory")
        indices = []
        for _ in range(batch_size):
            value = rng.random() * self._tree.total
            index = self._tree.find_prefix(value)
            if index >= len(self._data):  # zero-weight padding guard
                index = len(self._data) - 1
            indices.append(index)
        return [self._data[i] for i in indices], indices

    def update_priority(self, index: int, td_error: float) -> None:
        priority = abs(float(td_error)) + self.epsilon_priority
        self._data[index].priority = priority
        if priority > self._max_priority:
            self._max_priority = priority
        self._tree.set_weight(index, priority ** self.alpha_per)

    def total_weight(self) -> float:
        return self._tree.total

    def weight_of(self, index: int) -> float:
        return self._tree.weight(index)


def push_nstep(memory: ReplayMemory, window: Sequence[OneStepRecord],
               gamma: float) -> Experience:
    """Collapse a window of one-step records into one stored experience.

    R = sum_k gamma^k * r_k over the window; the bootstrap state is the
    last record's next state; the experience is done if the episode ended
    anywhere inside the window.
    """
    if not window:
        raise ValueError("cannot push an empty window")
    n_reward = 0.0
    discount = 1.0
    for record in window:
        n_reward += discount * record.reward
        discount *= gamma
    experience = Experience(
        state=np.asarray(window[0].state, dtype=np.float64),
        action=int(window[0].action),
        n_reward=n_reward,
        bootstrap_state=np.asarray(window[-1].next_state, dtype=np.float64),
        done=any(record.done for record in window),
        steps=len(window),
    )
    memory.push(experience)
    return experience


class NStepAssembler:
    """Sliding window that turns a stream of one-step records into windows.

    ``append`` returns the full n-record window ending the moment one is
    complete (zero or one per call), or every pending suffix window when
    the record is terminal.  ``flush_episode`` closes out a time-limit
    episode the same way, marking the final record done so the emitted
    experiences never bootstrap across the boundary.
    """

    def __init__(self, n_step: int):
        if n_step < 1:
            raise ValueError("n_step must be at least 1")
        self.n_step = n_step
        self._buffer: list[OneStepRecord] = []

    def __len__(self) -> int:
        return len(self._buffer)

    def append(self, record: OneStepRecord) -> list[list[OneStepRecord]]:
        self._buffer.append(record)
        if record.done:
            windows = [self._buffer[i:] for i in range(len(self._buffer))]
            self._buffer = []
            return windows
        if len(self._buffer) == self.n_step:
            window = list(self._buffer)
            self._buffer.pop(0)
            return [window]
        return []

    def flush_episode(self) -> list[list[OneStepRecord]]:
        if not self._buffer:
            return []
        self._buffer[-1] = self._buffer[-1]._replace(done=True)
        windows = [self._buffer[i:] for i in range(len(self._buffer))]
        self._buffer = []
        return windows


def epsilon_schedule(t: int, decay: float = 0.995, floor: float = 0.05) -> float:
    """Exploration probability max(decay^t, floor) for learn-step count t."""
    if t < 0:
        raise ValueError("t must be non-negative")
    return max(decay ** t, floor)


def select_action(params: MlpParams, state: np.ndarray, epsilon: float,
                  rng: np.random.Generator) -> int:
    """Epsilon-greedy over the eval-mode Q row; ties take the lowest index.

    With epsilon == 0 no rng draw is consumed.
    """
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(params.out_dim))
    return int(np.argmax(forward(params, state)))


def double_dqn_target(local: MlpParams, target: MlpParams,
                      experience: Experience, gamma: float) -> float:
    """y = R_n + gamma^n * q_target(s+n, argmax_a q_local(s+n, a)).

    A done experience contributes its accumulated reward alone.
    """
    if experience.done:
        return experience.n_reward
    q_local = forward(local, experience.bootstrap_state)
    q_target = forward(target, experience.bootstrap_state)
    best = int(np.argmax(q_local))
    return experience.n_reward + gamma ** experience.steps * float(q_target[best])


@dataclass
class DqnLearnerConfig:
    """Learner hyper-parameters; the defaults are the trained configuration."""

    batch_size: int = 64
    n_step: int = 16
    target_sync_every: int = 100
    gamma: float = 0.99
    eta: float = 1e-4
    alpha_per: float = 1.0
    epsilon_priority: float = 1e-6
    memory_capacity: int = 100_000
    epsilon_decay: float = 0.995
    epsilon_floor: float = 0.05
    hidden_dims: tuple[int, ...] = (64, 32)
    n_actions: int = 2
    input_dropout: float = 0.4

    def __post_init__(self) -> None:
        if self.batch_size < 1 or self.n_step < 1 or self.target_sync_every < 1:
            raise ValueError("batch size, n_step, and sync period must be positive")
        if not (0.0 < self.gamma <= 1.0):
            raise ValueError(f"gamma must be in (0, 1], got {self.gamma}")
        if not (self.eta > 0.0):
            raise ValueError("eta must be positive")
        if self.memory_capacity < self.batch_size:
            raise ValueError("memory must hold at least one batch")
        if not (0.0 <= self.input_dropout < 1.0):
            raise ValueError("input_dropout must be in [0, 1)")


@dataclass
class LearnResult:
    """Summary of one executed learn step, for training logs."""

    mean_abs_td: float
    epsilon: float
    learn_steps: int


class DqnLearner:
    """One agent's networks, replay memory, n-step assembler, and counters.

    The three rng streams keep the stochastic parts independent and
    reproducible: ``explore_rng`` drives action selection, ``per_rng``
    replay sampling, and ``dropout_rng`` the train-mode dropout masks.
    """

    def __init__(self, input_dim: int, config: DqnLearnerConfig,
                 init_rng: np.random.Generator,
                 explore_rng: np.random.Generator | None = None,
                 per_rng: np.random.Generator | None = None,
                 dropout_rng: np.random.Generator | None = None):
        self.config = config
        dims = (input_dim, *config.hidden_dims, config.n_actions)
        self.local = mlp_init(dims, init_rng, config.input_dropout)
        self.target = clone_params(self.local)
        self.memory = ReplayMemory(config.memory_capacity, config.alpha_per,
                                   config.epsilon_priority)
        self.assembler = NStepAssembler(config.n_step)
        self.learn_steps = 0
        self.explore_rng = explore_rng if explore_rng is not None else np.random.default_rng()
        self.per_rng = per_rng if per_rng is not None else np.random.default_rng()
        self.dropout_rng = dropout_rng if dropout_rng is not None else np.random.default_rng()

    def epsilon(self) -> float:
        return epsilon_schedule(self.learn_steps, self.config.epsilon_decay,
                                self.config.epsilon_floor)

    def select_action(self, state: np.ndarray, epsilon: float | None = None) -> int:
        eps = self.epsilon() if epsilon is None else epsilon
        return select_action(self.local, state, eps, self.explore_rng)

    def observe(self, state: np.ndarray, action: int, reward: float,
                next_state: np.ndarray, done: bool = False) -> None:
        record = OneStepRecord(np.asarray(state, dtype=np.float64), int(action),
                               float(reward), np.asarray(next_state, dtype=np.float64),
                               bool(done))
        for window in self.assembler.append(record):
            push_nstep(self.memory, window, self.config.gamma)

    def end_episode(self) -> None:
        for window in self.assembler.flush_episode():
            push_nstep(self.memory, window, self.config.gamma)

    def learn_step(self) -> LearnResult | None:
        """One batch update; returns None (no-op) until a batch is buffered."""
        cfg = self.config
        if len(self.memory) < cfg.batch_size:
            return None
        batch, indices = self.memory.sample(cfg.batch_size, self.per_rng)

        states = np.stack([e.state for e in batch])
        actions = np.array([e.action for e in batch])
        targets = np.array([e.n_reward for e in batch])
        live_rows = np.array([not e.done for e in batch])
        if live_rows.any():
            bootstrap = np.stack([e.bootstrap_state for e in batch if not e.done])
            q_local = forward_batch(self.local, bootstrap)
            q_target = forward_batch(self.target, bootstrap)
            best = np.argmax(q_local, axis=1)
            discounts = np.array([cfg.gamma ** e.steps for e in batch if not e.done])
            targets[live_rows] += discounts * q_target[np.arange(len(best)), best]

        cache = MlpCache()
        q_train = forward_batch(self.local, states, "train", rng=self.dropout_rng,
                                cache=cache)
        rows = np.arange(cfg.batch_size)
        q_taken = q_train[rows, actions]
        td_errors = targets - q_taken

        dloss = np.zeros_like(q_train)
        dloss[rows, actions] = 2.0 * (q_taken - targets) / cfg.batch_size
        grads = backward_batch(self.local, cache, dloss)
        sgd_step(self.local, grads, cfg.eta)

        for index, delta in zip(indices, td_errors):
            self.memory.update_priority(index, delta)

        self.learn_steps += 1
        if self.learn_steps % cfg.target_sync_every == 0:
            copy_into(self.local, self.target)
        return LearnResult(mean_abs_td=float(np.mean(np.abs(td_errors))),
                           epsilon=self.epsilon(), learn_steps=self.learn_steps)
