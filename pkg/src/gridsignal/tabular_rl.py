"""Tabular value-based reinforcement learning on small finite MDPs.

This module is the validation bed for the learning machinery used elsewhere
in the package: exact Monte-Carlo estimators, SARSA, Q-learning, and a value
iteration solver that serves as the convergence oracle in the test suite.
Everything here is small, sequential, and deliberately simple — the point is
trustworthiness, not speed.

An MDP is a set of states and actions with transition probabilities
``T(s, a, s')``, rewards ``R(s, a, s')``, a discount factor, and a set of
terminal states.  Three toy instances are bundled: a two-armed bandit, a
three-state chain, and a 4x4 gridworld.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

__all__ = [
    "FiniteMdp",
    "QTable",
    "ValueIterationResult",
    "mc_evaluate",
    "mc_control",
    "sarsa",
    "q_learning",
    "value_iteration",
    "two_armed_bandit",
    "three_state_chain",
    "gridworld_4x4",
    "GO",
    "STAY",
    "UP",
    "DOWN",
    "LEFT",
    "RIGHT",
]

# Action indices for the bundled chain MDP.
GO = 0
STAY = 1

# Action indices for the bundled gridworld MDP.
UP = 0
DOWN = 1
LEFT = 2
RIGHT = 3

StepSize = Union[float, Callable[[int], float]]


@dataclass
class FiniteMdp:
    """A finite MDP given by dense transition and reward arrays.

    ``transitions`` has shape (S, A, S) and each non-terminal row
    ``transitions[s, a]`` must sum to 1.  ``rewards`` may be passed with
    shape (S, A) — reward for taking ``a`` in ``s`` regardless of landing
    state — or with shape (S, A, S); it is stored canonically as (S, A, S).
    Terminal states absorb: stepping from one is an error, and their rows
    are ignored by validation.
    """

    transitions: np.ndarray
    rewards: np.ndarray
    gamma: float
    terminals: frozenset[int]
    initial_state: int = 0

    n_states: int = field(init=False)
    n_actions: int = field(init=False)
    terminal_mask: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        t = np.asarray(self.transitions, dtype=np.float64)
        if t.ndim != 3 or t.shape[0] != t.shape[2]:
            raise ValueError(f"transitions must have shape (S, A, S), got {t.shape}")
        n_states, n_actions = t.shape[0], t.shape[1]

        r = np.asarray(self.rewards, dtype=np.float64)
        if r.shape == (n_states, n_actions):
            r = np.repeat(r[:, :, None], n_states, axis=2)
        if r.shape != t.shape:
            raise ValueError(
                f"rewards must have shape (S, A) or (S, A, S); got {r.shape} "
                f"against transitions {t.shape}"
            )
        if not np.all(np.isfinite(r)):
            raise ValueError("rewards must be finite")
        if not (0.0 < self.gamma <= 1.0):
            raise ValueError(f"gamma must be in (0, 1], got {self.gamma}")

        self.terminals = frozenset(int(s) for s in self.terminals)
        if any(s < 0 or s >= n_states for s in self.terminals):
            raise ValueError("terminal state out of range")
        if not (0 <= self.initial_state < n_states):
            raise ValueError("initial_state out of range")

        mask = np.zeros(n_states, dtype=bool)
        mask[list(self.terminals)] = True

        row_sums = t.sum(axis=2)
        bad = ~mask[:, None] & (np.abs(row_sums - 1.0) > 1e-9)
        if np.any(bad):
            s, a = np.argwhere(bad)[0]
            raise ValueError(
                f"transition row ({s}, {a}) sums to {row_sums[s, a]!r}, expected 1"
            )
        if np.any(t < -1e-12):
            raise ValueError("transition probabilities must be non-negative")

        self.transitions = t
        self.rewards = r
        self.n_states = n_states
        self.n_actions = n_actions
        self.terminal_mask = mask
        # Plain-list caches: step() sits in tight training loops, and list
        # indexing plus bisect beats per-call ndarray slicing by a few x.
        cumulative = np.cumsum(t, axis=2)
        self._cum_rows = [[row.tolist() for row in per_state] for per_state in cumulative]
        self._reward_rows = [[row.tolist() for row in per_state] for per_state in r]
        self._terminal_list = mask.tolist()

    def is_terminal(self, state: int) -> bool:
        return bool(self.terminal_mask[state])

    def step(self, state: int, action: int, rng: np.random.Generator) -> tuple[int, float]:
        """Sample a transition.  Consumes exactly one uniform draw."""
        if self._terminal_list[state]:
            raise ValueError(f"cannot step from terminal state {state}")
        u = rng.random()
        nxt = bisect_right(self._cum_rows[state][action], u)
        if nxt >= self.n_states:  # guard against cumulative sums just below 1.0
            nxt = self.n_states - 1
        return nxt, self._reward_rows[state][action][nxt]


@dataclass
class QTable:
    """Per-(state, action) value estimates with visit and return accumulators.

    ``values`` holds the current estimates, ``visits`` the number of updates
    applied to each pair, and ``returns_sum`` the running sum of sampled
    returns (used by the Monte-Carlo estimators; TD methods leave it zero).
    """

    values: np.ndarray
    visits: np.ndarray
    returns_sum: np.ndarray

    @classmethod
    def zeros(cls, n_states: int, n_actions: int) -> "QTable":
        return cls(
            values=np.zeros((n_states, n_actions), dtype=np.float64),
            visits=np.zeros((n_states, n_actions), dtype=np.int64),
            returns_sum=np.zeros((n_states, n_actions), dtype=np.float64),
        )

    @property
    def n_states(self) -> int:
        return self.values.shape[0]

    @property
    def n_actions(self) -> int:
        return self.values.shape[1]

    def defined(self) -> np.ndarray:
        """Boolean mask of pairs that have received at least one update."""
        return self.visits > 0

    def greedy_policy(self) -> np.ndarray:
        """Greedy action per state; ties broken toward the lowest index.

        Undefined entries (NaN) are treated as 0 for the comparison.
        """
        safe = np.where(np.isnan(self.values), 0.0, self.values)
        return np.argmax(safe, axis=1)


def _argmax(row: list[float]) -> int:
    """First index of the maximum — the same tie rule as np.argmax."""
    best, best_value = 0, row[0]
    for i in range(1, len(row)):
        if row[i] > best_value:
            best, best_value = i, row[i]
    return best


def _epsilon_greedy(q_row: list[float], epsilon: float, rng: np.random.Generator) -> int:
    """Pick an action epsilon-greedily; ties go to the lowest action index.

    With epsilon == 0 the rng is never consumed, so the choice is a pure
    function of the value row.
    """
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(len(q_row)))
    return _argmax(q_row)


def _policy_action(policy: np.ndarray, state: int, rng: np.random.Generator) -> int:
    if policy.ndim == 1:
        return int(policy[state])
    row = policy[state]
    u = rng.random()
    idx = int(np.searchsorted(np.cumsum(row), u, side="right"))
    return min(idx, len(row) - 1)


def _validate_policy(policy: np.ndarray, mdp: FiniteMdp) -> np.ndarray:
    policy = np.asarray(policy)
    if policy.ndim == 1:
        if policy.shape != (mdp.n_states,):
            raise ValueError("deterministic policy must have one action per state")
        if policy.min() < 0 or policy.max() >= mdp.n_actions:
            raise ValueError("policy action out of range")
        return policy.astype(np.int64)
    if policy.shape != (mdp.n_states, mdp.n_actions):
        raise ValueError(
            f"stochastic policy must have shape (S, A) = "
            f"({mdp.n_states}, {mdp.n_actions}), got {policy.shape}"
        )
    sums = policy.sum(axis=1)
    live = ~mdp.terminal_mask
    if np.any(np.abs(sums[live] - 1.0) > 1e-9):
        raise ValueError("stochastic policy rows must sum to 1")
    return policy.astype(np.float64)


def _generate_episode(
    mdp: FiniteMdp,
    policy: np.ndarray,
    rng: np.random.Generator,
    max_steps: int,
) -> list[tuple[int, int, float]]:
    state = mdp.initial_state
    episode: list[tuple[int, int, float]] = []
    for _ in range(max_steps):
        if mdp.terminal_mask[state]:
            return episode
        action = _policy_action(policy, state, rng)
        nxt, reward = mdp.step(state, action, rng)
        episode.append((state, action, reward))
        state = nxt
    if mdp.terminal_mask[state]:
        return episode
    raise RuntimeError(f"episode exceeded {max_steps} steps without reaching a terminal")


def mc_evaluate(
    mdp: FiniteMdp,
    policy: np.ndarray,
    num_episodes: int,
    mode: str = "first-visit",
    rng: np.random.Generator | None = None,
    *,
    table: QTable | None = None,
    max_steps: int = 10_000,
) -> QTable:
    """Monte-Carlo estimation of Q under a fixed policy.

    ``policy`` is either a length-S integer array (deterministic) or an
    (S, A) row-stochastic matrix.  ``mode`` selects first-visit or
    every-visit averaging of the sampled discounted returns.  Pairs that
    were never visited have NaN values (undefined, not zero) and a zero
    visit count.  Pass ``table`` to continue accumulating into an existing
    estimate.
    """
    if mode not in ("first-visit", "every-visit"):
        raise ValueError(f"mode must be 'first-visit' or 'every-visit', got {mode!r}")
    policy = _validate_policy(policy, mdp)
    if rng is None:
        rng = np.random.default_rng()
    if table is None:
        table = QTable.zeros(mdp.n_states, mdp.n_actions)

    gamma = mdp.gamma
    for _ in range(num_episodes):
        episode = _generate_episode(mdp, policy, rng, max_steps)
        if not episode:
            continue
        returns = np.empty(len(episode), dtype=np.float64)
        g = 0.0
        for t in range(len(episode) - 1, -1, -1):
            g = episode[t][2] + gamma * g
            returns[t] = g
        if mode == "first-visit":
            seen: set[tuple[int, int]] = set()
            for t, (s, a, _r) in enumerate(episode):
                if (s, a) in seen:
                    continue
                seen.add((s, a))
                table.returns_sum[s, a] += returns[t]
                table.visits[s, a] += 1
        else:
            for t, (s, a, _r) in enumerate(episode):
                table.returns_sum[s, a] += returns[t]
                table.visits[s, a] += 1

    with np.errstate(invalid="ignore", divide="ignore"):
        table.values = np.where(
            table.visits > 0, table.returns_sum / table.visits, np.nan
        )
    return table


def _epsilon_greedy_matrix(q_values: np.ndarray, epsilon: float) -> np.ndarray:
    """Row-stochastic policy: greedy with probability 1-eps, uniform otherwise."""
    n_states, n_actions = q_values.shape
    probs = np.full((n_states, n_actions), epsilon / n_actions, dtype=np.float64)
    greedy = np.argmax(q_values, axis=1)
    probs[np.arange(n_states), greedy] += 1.0 - epsilon
    return probs


def mc_control(
    mdp: FiniteMdp,
    epsilon: float,
    num_iterations: int,
    num_episodes: int,
    rng: np.random.Generator | None = None,
    *,
    max_steps: int = 10_000,
) -> tuple[np.ndarray, QTable]:
    """Monte-Carlo control by generalized policy iteration.

    Each iteration evaluates the epsilon-greedy policy of the current value
    estimates with first-visit Monte-Carlo over ``num_episodes`` episodes,
    then improves the policy greedily.  Unvisited pairs are treated as value
    zero for improvement, so with epsilon == 0 an action that is never
    sampled is never discovered — the classic exploration trap.
    Returns the final greedy policy and the accumulated table.
    """
    if not (0.0 <= epsilon < 1.0):
        raise ValueError(f"epsilon must be in [0, 1), got {epsilon}")
    if rng is None:
        rng = np.random.default_rng()

    table = QTable.zeros(mdp.n_states, mdp.n_actions)
    q_for_policy = np.zeros((mdp.n_states, mdp.n_actions), dtype=np.float64)
    for _ in range(num_iterations):
        behavior = _epsilon_greedy_matrix(q_for_policy, epsilon)
        mc_evaluate(
            mdp, behavior, num_episodes, "first-visit", rng,
            table=table, max_steps=max_steps,
        )
        q_for_policy = np.where(table.visits > 0, table.values, 0.0)
    return np.argmax(q_for_policy, axis=1), table


def _td_control(
    mdp: FiniteMdp,
    alpha: StepSize,
    epsilon: float,
    gamma: float,
    num_episodes: int,
    rng: np.random.Generator,
    on_policy: bool,
    max_steps: int,
) -> QTable:
    """Shared episode loop for SARSA and Q-learning.

    Both methods act epsilon-greedily and apply one update per transition;
    they differ only in the bootstrap term.  On-policy (SARSA) draws the
    successor action here and carries it into the next step so the action
    acted on is the one the target used.  Off-policy (Q-learning) bootstraps
    from the row maximum and draws the next action fresh at the top of the
    next step, so when SARSA's prediction is forced greedy the two code
    paths are the same and their trajectories match draw for draw.
    """
    # Work on plain lists: this loop is the hot path of the convergence
    # tests and list indexing is several times faster than ndarray scalars.
    q = [[0.0] * mdp.n_actions for _ in range(mdp.n_states)]
    visits = [[0] * mdp.n_actions for _ in range(mdp.n_states)]
    terminal = mdp.terminal_mask.tolist()
    alpha_fn = alpha if callable(alpha) else None
    for _ in range(num_episodes):
        state = mdp.initial_state
        pending_action: int | None = None
        for _ in range(max_steps):
            if terminal[state]:
                break
            if pending_action is not None:
                action = pending_action
            else:
                action = _epsilon_greedy(q[state], epsilon, rng)
            nxt, reward = mdp.step(state, action, rng)
            if terminal[nxt]:
                target = reward
                pending_action = None
            elif on_policy:
                next_action = _epsilon_greedy(q[nxt], epsilon, rng)
                target = reward + gamma * q[nxt][next_action]
                pending_action = next_action
            else:
                target = reward + gamma * max(q[nxt])
                pending_action = None
            n = visits[state][action]
            step_size = alpha_fn(n) if alpha_fn is not None else alpha
            visits[state][action] = n + 1
            q[state][action] += step_size * (target - q[state][action])
            state = nxt
        else:
            if not terminal[state]:
                raise RuntimeError(
                    f"episode exceeded {max_steps} steps without reaching a terminal"
                )
    table = QTable.zeros(mdp.n_states, mdp.n_actions)
    table.values = np.array(q, dtype=np.float64)
    table.visits = np.array(visits, dtype=np.int64)
    return table


def sarsa(
    mdp: FiniteMdp,
    alpha: StepSize,
    epsilon: float,
    gamma: float | None = None,
    num_episodes: int = 500,
    rng: np.random.Generator | None = None,
    *,
    greedy_prediction: bool = False,
    max_steps: int = 10_000,
) -> QTable:
    """On-policy TD control: Q += alpha * (r + gamma*Q(s', a') - Q(s, a)).

    ``alpha`` may be a constant or a callable mapping the pair's prior visit
    count to a step size (e.g. ``lambda n: 1 / (1 + n)`` for exact
    averaging).  ``gamma`` defaults to the MDP's own discount.  With
    ``greedy_prediction=True`` the bootstrap action is the greedy one
    rather than the behavior draw, which makes the update identical to
    Q-learning's.
    """
    if callable(alpha):
        pass
    elif not (0.0 <= alpha <= 1.0):
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    if rng is None:
        rng = np.random.default_rng()
    return _td_control(
        mdp, alpha, epsilon, mdp.gamma if gamma is None else gamma,
        num_episodes, rng, on_policy=not greedy_prediction, max_steps=max_steps,
    )


def q_learning(
    mdp: FiniteMdp,
    alpha: StepSize,
    epsilon: float,
    gamma: float | None = None,
    num_episodes: int = 500,
    rng: np.random.Generator | None = None,
    *,
    max_steps: int = 10_000,
) -> QTable:
    """Off-policy TD control: Q += alpha * (r + gamma*max_a Q(s', a) - Q(s, a)).

    Behavior is epsilon-greedy; the bootstrap is the successor row maximum,
    and a terminal successor contributes the reward alone.  ``alpha`` and
    ``gamma`` as in :func:`sarsa`.
    """
    if callable(alpha):
        pass
    elif not (0.0 <= alpha <= 1.0):
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    if rng is None:
        rng = np.random.default_rng()
    return _td_control(
        mdp, alpha, epsilon, mdp.gamma if gamma is None else gamma,
        num_episodes, rng, on_policy=False, max_steps=max_steps,
    )


@dataclass(frozen=True)
class ValueIterationResult:
    v: np.ndarray
    q: np.ndarray
    policy: np.ndarray


def value_iteration(
    mdp: FiniteMdp,
    tolerance: float = 1e-12,
    *,
    max_iterations: int = 1_000_000,
) -> ValueIterationResult:
    """Solve the MDP exactly by successive approximation.

    Iterates Q(s,a) = sum_s' T(s,a,s') * (R(s,a,s') + gamma * V(s')) with
    V(terminal) = 0 until the value function moves less than ``tolerance``
    in max-norm.  Intended as a test oracle for the learning algorithms.
    """
    t = mdp.transitions
    r = mdp.rewards
    gamma = mdp.gamma
    terminal = mdp.terminal_mask

    v = np.zeros(mdp.n_states, dtype=np.float64)
    for _ in range(max_iterations):
        q = np.einsum("sat,sat->sa", t, r + gamma * v[None, None, :])
        q[terminal] = 0.0
        v_next = q.max(axis=1)
        v_next[terminal] = 0.0
        if np.max(np.abs(v_next - v)) <= tolerance:
            return ValueIterationResult(v=v_next, q=q, policy=np.argmax(q, axis=1))
        v = v_next
    raise RuntimeError(f"value iteration did not converge in {max_iterations} sweeps")


def two_armed_bandit(rewards: tuple[float, float] = (0.0, 1.0)) -> FiniteMdp:
    """One decision state, two actions, immediate reward, then a terminal."""
    t = np.zeros((2, 2, 2))
    r = np.zeros((2, 2, 2))
    for a in range(2):
        t[0, a, 1] = 1.0
        r[0, a, 1] = rewards[a]
    return FiniteMdp(transitions=t, rewards=r, gamma=1.0, terminals=frozenset({1}))


def three_state_chain(gamma: float = 0.9) -> FiniteMdp:
    """States s0 -> s1 -> terminal with rewards (0, 1) on the GO edges.

    A second STAY action loops in place with zero reward, so control methods
    have a real (if easy) decision to make.  Optimal values: Q(s1, GO) = 1,
    Q(s0, GO) = gamma.
    """
    t = np.zeros((3, 2, 3))
    r = np.zeros((3, 2, 3))
    t[0, GO, 1] = 1.0
    t[1, GO, 2] = 1.0
    r[1, GO, 2] = 1.0
    t[0, STAY, 0] = 1.0
    t[1, STAY, 1] = 1.0
    return FiniteMdp(transitions=t, rewards=r, gamma=gamma, terminals=frozenset({2}))


def gridworld_4x4(gamma: float = 0.5) -> FiniteMdp:
    """Deterministic 4x4 gridworld: start top-left, goal bottom-right.

    Actions UP/DOWN/LEFT/RIGHT move one cell; moves off the edge stay in
    place.  Entering the goal yields reward 1 and ends the episode; all
    other transitions yield 0, so optimal values are gamma^(d-1) for BFS
    distance d.  The default discount is deliberately small: exact
    visit-count averaging washes out early bootstrap error at a rate that
    degrades sharply with the depth-times-gamma product, and 0.5 keeps the
    1e-3 convergence checks affordable while leaving value gaps between
    neighbouring distances far above the tolerance.
    """
    size = 4
    n = size * size
    goal = n - 1
    t = np.zeros((n, 4, n))
    r = np.zeros((n, 4, n))
    moves = {UP: (-1, 0), DOWN: (1, 0), LEFT: (0, -1), RIGHT: (0, 1)}
    for row in range(size):
        for col in range(size):
            s = row * size + col
            if s == goal:
                continue
            for a, (dr, dc) in moves.items():
                nr, nc = row + dr, col + dc
                if 0 <= nr < size and 0 <= nc < size:
                    nxt = nr * size + nc
                else:
                    nxt = s
                t[s, a, nxt] = 1.0
                if nxt == goal:
                    r[s, a, nxt] = 1.0
    return FiniteMdp(transitions=t, rewards=r, gamma=gamma, terminals=frozenset({goal}))
