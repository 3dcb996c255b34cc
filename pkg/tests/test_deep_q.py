"""Prioritized replay, n-step assembly, Double-DQN targets, and the learner.

The sum tree is checked against numpy's cumsum/searchsorted; sampling
frequencies against exact proportional probabilities by chi-square; and the
full learner, configured to its degenerate corner (one-step returns,
uniform sampling, target synced every step), against an independently
written textbook DQN loop, demanding bit-identical parameter trajectories.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from gridsignal.deep_q import (
    DqnLearner,
    DqnLearnerConfig,
    Experience,
    NStepAssembler,
    OneStepRecord,
    ReplayMemory,
    SumTree,
    double_dqn_target,
    epsilon_schedule,
    push_nstep,
    select_action,
)
from gridsignal.neuralnet import (
    LayerParams,
    MlpCache,
    MlpParams,
    backward_batch,
    forward,
    forward_batch,
    mlp_init,
    sgd_step,
)


def bias_net(bias_values):
    """Net whose output is a constant vector: zero weights, fixed bias."""
    bias = np.asarray(bias_values, dtype=np.float64)
    return MlpParams(
        layers=[LayerParams(weights=np.zeros((len(bias), 3)), bias=bias.copy(),
                            relu=False)],
        dropout=(0.0,),
    )


def make_experience(reward=1.0, done=False, steps=1, action=0):
    return Experience(state=np.zeros(3), action=action, n_reward=reward,
                      bootstrap_state=np.zeros(3), done=done, steps=steps)


class TestSumTree:
    def test_unit_weights_descend_to_floor(self):
        tree = SumTree(16)
        for i in range(10):
            tree.set_weight(i, 1.0)
        assert tree.total == 10.0
        for value in (0.0, 0.5, 3.999, 4.0, 9.99):
            assert tree.find_prefix(value) == int(value)

    def test_matches_searchsorted(self):
        rng = np.random.default_rng(0)
        weights = rng.uniform(0.0, 3.0, 13)
        tree = SumTree(13)
        for i, w in enumerate(weights):
            tree.set_weight(i, float(w))
        cumulative = np.cumsum(weights)
        assert tree.total == pytest.approx(cumulative[-1], rel=1e-12)
        for value in rng.uniform(0.0, cumulative[-1], 500):
            expected = int(np.searchsorted(cumulative, value, side="right"))
            assert tree.find_prefix(float(value)) == min(expected, 12)

    def test_update_recomputes_total(self):
        tree = SumTree(4)
        tree.set_weight(0, 2.0)
        tree.set_weight(1, 3.0)
        tree.set_weight(0, 0.5)
        assert tree.total == 3.5
        assert tree.weight(0) == 0.5

    def test_bounds_and_sign_checked(self):
        tree = SumTree(4)
        with pytest.raises(IndexError):
            tree.set_weight(4, 1.0)
        with pytest.raises(ValueError):
            tree.set_weight(0, -1.0)

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 7),
                              st.floats(0.0, 100.0, allow_nan=False)),
                    min_size=1, max_size=60))
    def test_total_tracks_exact_sum(self, updates):
        tree = SumTree(8)
        mirror = [0.0] * 8
        for index, weight in updates:
            tree.set_weight(index, weight)
            mirror[index] = weight
            expected = sum(mirror)
            assert tree.total == pytest.approx(expected, rel=1e-9, abs=1e-12)


class TestReplayMemory:
    def test_new_entries_get_running_max_priority(self):
        memory = ReplayMemory(capacity=8)
        memory.push(make_experience())
        assert memory[0].priority == 1.0
        memory.update_priority(0, 4.0)
        memory.push(make_experience())
        assert memory[1].priority == 4.0 + 1e-6

    def test_oldest_evicted_first(self):
        memory = ReplayMemory(capacity=3)
        for reward in (1.0, 2.0, 3.0, 4.0):
            memory.push(make_experience(reward=reward))
        assert len(memory) == 3
        assert [memory[i].n_reward for i in range(3)] == [4.0, 2.0, 3.0]

    def test_proportional_probabilities_one_one_two(self):
        memory = ReplayMemory(capacity=4, alpha_per=1.0)
        for _ in range(3):
            memory.push(make_experience())
        for index, priority in enumerate((1.0, 1.0, 2.0)):
            memory.update_priority(index, priority - memory.epsilon_priority)
        total = memory.total_weight()
        probs = [memory.weight_of(i) / total for i in range(3)]
        assert probs == pytest.approx([0.25, 0.25, 0.5], abs=1e-9)

    def test_alpha_zero_is_uniform_floor_sampling(self):
        memory = ReplayMemory(capacity=16, alpha_per=0.0)
        for reward in range(10):
            memory.push(make_experience(reward=float(reward)))
        memory.update_priority(3, 99.0)  # must not matter at alpha = 0
        rng = np.random.default_rng(5)
        replay = np.random.default_rng(5)
        _, indices = memory.sample(200, rng)
        expected = [int(replay.random() * 10) for _ in range(200)]
        assert indices == expected

    def test_single_element_always_selected(self):
        memory = ReplayMemory(capacity=4)
        memory.push(make_experience())
        _, indices = memory.sample(20, np.random.default_rng(0))
        assert indices == [0] * 20

    def test_empty_sample_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            ReplayMemory(capacity=4).sample(1, np.random.default_rng(0))

    def test_sampling_frequencies_chi_square(self):
        # 1000 entries with priorities cycling 1..10; 1e5 proportional draws
        # must be consistent with p_i / sum p at the 1% level.
        memory = ReplayMemory(capacity=1000, alpha_per=1.0)
        for i in range(1000):
            memory.push(make_experience())
        priorities = np.array([(i % 10) + 1.0 for i in range(1000)])
        for i, p in enumerate(priorities):
            memory.update_priority(i, p - memory.epsilon_priority)
        draws = 100_000
        _, indices = memory.sample(draws, np.random.default_rng(123))
        counts = np.bincount(indices, minlength=1000)
        expected = priorities / priorities.sum() * draws
        result = stats.chisquare(counts, expected)
        assert result.pvalue > 0.01, f"chi-square p = {result.pvalue}"

    @settings(max_examples=30, deadline=None)
    @given(st.lists(
        st.one_of(
            st.just(("push", 0.0)),
            st.tuples(st.just("update"), st.floats(0.0, 50.0, allow_nan=False)),
        ),
        min_size=1, max_size=50,
    ), st.sampled_from([0.0, 0.5, 1.0]))
    def test_tree_total_matches_priority_sum(self, ops, alpha):
        capacity = 8
        memory = ReplayMemory(capacity=capacity, alpha_per=alpha)
        mirror: list[float] = []
        write = 0
        max_priority = 1.0
        op_rng = np.random.default_rng(99)
        for kind, value in ops:
            if kind == "push" or not mirror:
                memory.push(make_experience())
                if len(mirror) < capacity:
                    mirror.append(max_priority)
                else:
                    mirror[write] = max_priority
                    write = (write + 1) % capacity
            else:
                index = int(op_rng.integers(len(mirror)))
                memory.update_priority(index, value)
                mirror[index] = abs(value) + memory.epsilon_priority
                max_priority = max(max_priority, mirror[index])
            expected = sum(p ** alpha for p in mirror)
            assert memory.total_weight() == pytest.approx(expected, rel=1e-9)
            for i, p in enumerate(mirror):
                assert memory.weight_of(i) == pytest.approx(p ** alpha, rel=1e-9)


class TestNStep:
    def test_two_step_discounted_return(self):
        memory = ReplayMemory(capacity=4)
        s = [np.array([float(i)]) for i in range(3)]
        window = [
            OneStepRecord(s[0], 0, 1.0, s[1], False),
            OneStepRecord(s[1], 1, 2.0, s[2], False),
        ]
        exp = push_nstep(memory, window, gamma=0.5)
        assert exp.n_reward == 2.0  # 1 + 0.5*2
        assert np.array_equal(exp.bootstrap_state, s[2])
        assert exp.steps == 2
        assert not exp.done
        assert exp.action == 0

    def test_single_step_reduces_to_one_step_tuple(self):
        memory = ReplayMemory(capacity=4)
        window = [OneStepRecord(np.zeros(1), 1, 3.0, np.ones(1), False)]
        exp = push_nstep(memory, window, gamma=0.99)
        assert exp.n_reward == 3.0
        assert exp.steps == 1
        assert np.array_equal(exp.bootstrap_state, np.ones(1))

    def test_terminal_truncation(self):
        memory = ReplayMemory(capacity=4)
        window = [OneStepRecord(np.zeros(1), 0, 5.0, np.ones(1), True)]
        exp = push_nstep(memory, window, gamma=0.99)
        assert exp.n_reward == 5.0
        assert exp.done
        local = bias_net([0.2, 0.5])
        target = bias_net([3.0, 1.0])
        assert double_dqn_target(local, target, exp, gamma=0.99) == 5.0

    def test_empty_window_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            push_nstep(ReplayMemory(capacity=4), [], gamma=0.9)

    def test_assembler_sliding_windows(self):
        assembler = NStepAssembler(n_step=3)
        records = [OneStepRecord(np.array([float(t)]), 0, float(t),
                                 np.array([float(t + 1)]), False)
                   for t in range(5)]
        emitted = []
        for record in records:
            emitted.extend(assembler.append(record))
        assert [len(w) for w in emitted] == [3, 3, 3]
        assert [w[0].state[0] for w in emitted] == [0.0, 1.0, 2.0]
        tail = assembler.flush_episode()
        assert [len(w) for w in tail] == [2, 1]
        assert all(w[-1].done for w in tail)
        assert len(assembler) == 0

    def test_assembler_terminal_flushes_all_suffixes(self):
        assembler = NStepAssembler(n_step=4)
        for t in range(2):
            assert assembler.append(OneStepRecord(np.zeros(1), 0, 1.0,
                                                  np.zeros(1), False)) == []
        windows = assembler.append(OneStepRecord(np.zeros(1), 0, 1.0,
                                                 np.zeros(1), True))
        assert [len(w) for w in windows] == [3, 2, 1]
        assert all(any(r.done for r in w) for w in windows)
        assert len(assembler) == 0

    def test_flush_on_empty_is_noop(self):
        assert NStepAssembler(n_step=2).flush_episode() == []


class TestEpsilonSchedule:
    def test_starts_at_one(self):
        assert epsilon_schedule(0) == 1.0

    def test_floors_at_five_percent(self):
        assert epsilon_schedule(10_000) == 0.05

    def test_value_at_138(self):
        assert epsilon_schedule(138) == 0.995 ** 138
        assert epsilon_schedule(138) == pytest.approx(0.5008, abs=1e-4)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            epsilon_schedule(-1)


class TestSelectAction:
    def test_greedy_picks_larger_q(self):
        net = bias_net([0.2, 0.9])
        assert select_action(net, np.zeros(3), 0.0, np.random.default_rng(0)) == 1

    def test_tie_breaks_to_lowest_index(self):
        net = bias_net([0.5, 0.5])
        assert select_action(net, np.zeros(3), 0.0, np.random.default_rng(0)) == 0

    def test_zero_epsilon_consumes_no_rng(self):
        net = bias_net([0.1, 0.4])
        rng = np.random.default_rng(7)
        before = rng.bit_generator.state
        select_action(net, np.zeros(3), 0.0, rng)
        assert rng.bit_generator.state == before

    def test_full_exploration_is_uniform(self):
        net = bias_net([9.0, 0.0])  # greedy would always pick 0
        rng = np.random.default_rng(11)
        draws = 10_000
        ones = sum(select_action(net, np.zeros(3), 1.0, rng) for _ in range(draws))
        sigma = np.sqrt(draws * 0.25)
        assert abs(ones - draws / 2) < 3 * sigma


class TestDoubleDqnTarget:
    def test_frozen_value(self):
        local = bias_net([0.2, 0.5])     # argmax -> action 1
        target = bias_net([3.0, 1.0])    # evaluated at action 1 -> 1.0
        exp = make_experience(reward=1.0, done=False, steps=1)
        y = double_dqn_target(local, target, exp, gamma=0.99)
        assert y == pytest.approx(1.99, abs=1e-12)

    def test_done_ignores_networks(self):
        local = bias_net([100.0, 100.0])
        target = bias_net([100.0, 100.0])
        exp = make_experience(reward=-2.5, done=True)
        assert double_dqn_target(local, target, exp, gamma=0.99) == -2.5

    def test_identical_nets_reduce_to_fixed_target(self):
        rng = np.random.default_rng(3)
        net = mlp_init((3, 8, 2), rng, first_junction_dropout=0.0)
        exp = Experience(state=np.zeros(3), action=0, n_reward=0.5,
                         bootstrap_state=rng.uniform(-1, 1, 3), done=False, steps=2)
        y = double_dqn_target(net, net, exp, gamma=0.9)
        q = forward(net, exp.bootstrap_state)
        assert y == 0.5 + 0.9 ** 2 * np.max(q)

    def test_multi_step_discount_power(self):
        local = bias_net([0.0, 1.0])
        target = bias_net([0.0, 2.0])
        exp = make_experience(reward=1.0, done=False, steps=3)
        assert double_dqn_target(local, target, exp, gamma=0.5) == 1.0 + 0.125 * 2.0


def small_config(**overrides):
    defaults = dict(batch_size=4, n_step=1, target_sync_every=3, gamma=0.9,
                    eta=0.01, alpha_per=1.0, memory_capacity=64,
                    hidden_dims=(8,), n_actions=2, input_dropout=0.0)
    defaults.update(overrides)
    return DqnLearnerConfig(**defaults)


def make_learner(config, seed=0):
    return DqnLearner(2, config,
                      init_rng=np.random.default_rng(100 + seed),
                      explore_rng=np.random.default_rng(200 + seed),
                      per_rng=np.random.default_rng(300 + seed),
                      dropout_rng=np.random.default_rng(400 + seed))


def snapshot(params):
    return [(layer.weights.copy(), layer.bias.copy()) for layer in params.layers]


def params_equal(a, b):
    return all(np.array_equal(wa, wb) and np.array_equal(ba, bb)
               for (wa, ba), (wb, bb) in zip(a, b))


class TestDqnLearner:
    def test_not_ready_is_noop(self):
        learner = make_learner(small_config())
        before = snapshot(learner.local)
        assert learner.learn_step() is None
        assert params_equal(snapshot(learner.local), before)
        assert learner.learn_steps == 0

    def test_fixed_point_batch_leaves_params(self):
        learner = make_learner(small_config())
        state = np.array([0.3, -0.2])
        # Rewards computed through the same batched forward the learner uses,
        # so the fixed point holds bitwise (single-row matmul can differ in
        # the last ulp from the batched kernel).
        q_batch = forward_batch(learner.local, np.stack([state] * 4))
        for action in (0, 1, 0, 1):
            learner.memory.push(Experience(state=state, action=action,
                                           n_reward=float(q_batch[0, action]),
                                           bootstrap_state=state, done=True,
                                           steps=1))
        before = snapshot(learner.local)
        result = learner.learn_step()
        assert result is not None
        assert result.mean_abs_td == 0.0
        assert params_equal(snapshot(learner.local), before)

    def test_target_changes_only_at_sync_boundaries(self):
        learner = make_learner(small_config(target_sync_every=3))
        state = np.array([1.0, 0.0])
        for i in range(8):
            learner.memory.push(Experience(state=state, action=i % 2,
                                           n_reward=float(i), bootstrap_state=state,
                                           done=True, steps=1))
        changes = []
        previous = snapshot(learner.target)
        for _ in range(7):
            learner.learn_step()
            current = snapshot(learner.target)
            changes.append(not params_equal(previous, current))
            previous = current
        assert changes == [False, False, True, False, False, True, False]
        # Step 7 moved the local net past the step-6 sync point.
        assert not params_equal(snapshot(learner.target), snapshot(learner.local))

    def test_bandit_value_converges_to_reward(self):
        learner = make_learner(small_config(batch_size=8, eta=0.05,
                                            target_sync_every=2))
        state = np.array([1.0, 0.0])
        for _ in range(8):
            learner.memory.push(Experience(state=state, action=0, n_reward=0.7,
                                           bootstrap_state=state, done=True,
                                           steps=1))
        for _ in range(3000):
            learner.learn_step()
            if abs(forward(learner.local, state)[0] - 0.7) < 1e-3:
                break
        assert forward(learner.local, state)[0] == pytest.approx(0.7, abs=1e-3)

    def test_epsilon_follows_learn_steps(self):
        learner = make_learner(small_config())
        state = np.array([1.0, 0.0])
        for i in range(6):
            learner.memory.push(Experience(state=state, action=i % 2,
                                           n_reward=1.0, bootstrap_state=state,
                                           done=True, steps=1))
        assert learner.epsilon() == 1.0
        for k in range(1, 4):
            result = learner.learn_step()
            assert result.learn_steps == k
            assert result.epsilon == 0.995 ** k

    def test_observe_assembles_and_flushes(self):
        learner = make_learner(small_config(n_step=3))
        s = np.array([0.0, 0.0])
        for t in range(4):
            learner.observe(s, 0, 1.0, s, done=False)
        assert len(learner.memory) == 2  # windows for t=0 and t=1
        learner.end_episode()
        assert len(learner.memory) == 4  # plus flushed suffixes (len 2 and 1)
        assert learner.memory[2].done and learner.memory[3].done

    def test_degenerate_config_matches_textbook_dqn(self):
        """n=1, alpha_per=0, C=1 must equal a plain DQN loop bit for bit."""
        config = small_config(n_step=1, alpha_per=0.0, target_sync_every=1,
                              memory_capacity=64, batch_size=4, gamma=0.9,
                              eta=0.01)
        learner = make_learner(config, seed=0)

        s0 = np.array([1.0, 0.0])
        s1 = np.array([0.0, 1.0])
        s_end = np.array([0.0, 0.0])
        episodes = 14

        def reward0(action):
            return 0.2 if action == 0 else 0.5

        def reward1(action):
            return 1.0 if action == 1 else 0.0

        learner_actions = []
        for _ in range(episodes):
            a0 = learner.select_action(s0)
            learner.observe(s0, a0, reward0(a0), s1, done=False)
            learner.learn_step()
            a1 = learner.select_action(s1)
            learner.observe(s1, a1, reward1(a1), s_end, done=True)
            learner.learn_step()
            learner_actions.append((a0, a1))

        # Textbook loop: list buffer, uniform floor(u*len) sampling, one-step
        # target r + gamma * max q(s') with the current net, same seeds.
        params = mlp_init((2, 8, 2), np.random.default_rng(100),
                          first_junction_dropout=0.0)
        explore = np.random.default_rng(200)
        sampler = np.random.default_rng(300)
        dropout = np.random.default_rng(400)
        buffer = []
        learn_steps = 0

        def plain_learn():
            nonlocal learn_steps
            if len(buffer) < 4:
                return
            rows = [int(sampler.random() * len(buffer)) for _ in range(4)]
            batch = [buffer[i] for i in rows]
            states = np.stack([b[0] for b in batch])
            actions = np.array([b[1] for b in batch])
            targets = np.array([b[2] for b in batch])
            live = np.array([not b[4] for b in batch])
            if live.any():
                nxt = np.stack([b[3] for b in batch if not b[4]])
                q_next_sel = forward_batch(params, nxt)
                q_next_eval = forward_batch(params, nxt)
                best = np.argmax(q_next_sel, axis=1)
                targets[live] += 0.9 * q_next_eval[np.arange(len(best)), best]
            cache = MlpCache()
            q = forward_batch(params, states, "train", rng=dropout, cache=cache)
            idx = np.arange(4)
            dloss = np.zeros_like(q)
            dloss[idx, actions] = 2.0 * (q[idx, actions] - targets) / 4
            grads = backward_batch(params, cache, dloss)
            sgd_step(params, grads, 0.01)
            learn_steps += 1

        plain_actions = []
        for _ in range(episodes):
            eps = epsilon_schedule(learn_steps)
            a0 = select_action(params, s0, eps, explore)
            buffer.append((s0, a0, reward0(a0), s1, False))
            plain_learn()
            eps = epsilon_schedule(learn_steps)
            a1 = select_action(params, s1, eps, explore)
            buffer.append((s1, a1, reward1(a1), s_end, True))
            plain_learn()
            plain_actions.append((a0, a1))

        assert learner_actions == plain_actions
        for mine, theirs in zip(learner.local.layers, params.layers):
            assert np.array_equal(mine.weights, theirs.weights)
            assert np.array_equal(mine.bias, theirs.bias)

    def test_config_defaults_are_training_table(self):
        config = DqnLearnerConfig()
        assert config.batch_size == 64
        assert config.n_step == 16
        assert config.target_sync_every == 100
        assert config.gamma == 0.99
        assert config.eta == 1e-4
        assert config.alpha_per == 1.0
        assert config.memory_capacity == 100_000
        assert config.epsilon_decay == 0.995
        assert config.epsilon_floor == 0.05
        assert config.hidden_dims == (64, 32)
        assert config.n_actions == 2
        assert config.input_dropout == 0.4

    def test_config_validation(self):
        with pytest.raises(ValueError):
            DqnLearnerConfig(batch_size=0)
        with pytest.raises(ValueError):
            DqnLearnerConfig(gamma=0.0)
        with pytest.raises(ValueError):
            DqnLearnerConfig(memory_capacity=8, batch_size=64)
