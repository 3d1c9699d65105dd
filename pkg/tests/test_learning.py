import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dyckin import vecnn
from dyckin.learning import (DETERMINISTIC, EPSILON_RANDOM, SAMPLE, TEMPORAL_DIFFERENCE,
                             WHOLE_EPISODE, Baseline, Exploration, ReplayBuffer, RewardScheme,
                             compute_returns, select_action, train_cu_batch)
from dyckin.network import EpisodeTrace
from dyckin.vecnn import SgdConfig, mlp_init

import oracles


def trace(t, reward):
    return EpisodeTrace(np.zeros((t, 3)), np.zeros(t, dtype=np.int64), final_reward=reward)


def test_whole_episode_returns():
    assert compute_returns(trace(5, 1), RewardScheme(WHOLE_EPISODE)).tolist() == [1.0] * 5


def test_td_returns():
    r = compute_returns(trace(3, 1), RewardScheme(TEMPORAL_DIFFERENCE, 0.9))
    assert np.allclose(r, [0.81, 0.9, 1.0])


@pytest.mark.parametrize("scheme", [RewardScheme(WHOLE_EPISODE), RewardScheme(TEMPORAL_DIFFERENCE, 0.5)])
def test_zero_reward_and_empty(scheme):
    assert not compute_returns(trace(4, 0), scheme).any()
    assert compute_returns(trace(0, 1), scheme).size == 0


@given(st.integers(2, 100), st.floats(0.05, 0.99))
def test_td_strictly_increasing(t, gamma):
    r = compute_returns(trace(t, 1), RewardScheme(TEMPORAL_DIFFERENCE, gamma))
    assert (np.diff(r) > 0).all()
    assert r[-1] == 1.0


def test_scheme_validation():
    with pytest.raises(ValueError):
        RewardScheme(TEMPORAL_DIFFERENCE, 0.0)
    with pytest.raises(ValueError):
        RewardScheme("bootstrap")
    with pytest.raises(ValueError):
        Exploration(EPSILON_RANDOM, 1.5)


def test_replay_ring():
    buf = ReplayBuffer(3, 2)
    for i in range(4):
        buf.push(np.full((1, 2), i), [i], [float(i)])
    obs, acts, rets = buf.contents()
    assert acts.tolist() == [1, 2, 3] and len(buf) == 3


def test_replay_push_long_batch():
    buf = ReplayBuffer(4, 1)
    buf.push(np.arange(10.0)[:, None], np.arange(10), np.zeros(10))
    assert buf.contents()[1].tolist() == [6, 7, 8, 9]


def test_replay_contents_once():
    buf = ReplayBuffer(10, 1)
    buf.push(np.arange(5.0)[:, None], np.arange(5), np.ones(5))
    buf.push(np.array([[42.0]]), [7], [0.5])
    obs, acts, _ = buf.contents()
    assert obs[:, 0].tolist().count(42.0) == 1 and acts.tolist()[-1] == 7


def test_replay_sampling():
    buf = ReplayBuffer(100, 1)
    assert len(buf.sample(8, np.random.default_rng(0))[1]) == 0
    buf.push(np.arange(50.0)[:, None], np.arange(50), np.zeros(50))
    a = buf.sample(16, np.random.default_rng(3))
    b = buf.sample(16, np.random.default_rng(3))
    assert np.array_equal(a[1], b[1]) and len(a[1]) == 16
    with pytest.raises(ValueError):
        buf.sample(0, np.random.default_rng(0))


def test_baseline_ema():
    b = Baseline(0.5)
    b.update(1.0)
    b.update(1.0)
    assert b.value == pytest.approx(0.75)


def test_zero_weight_batch_is_noop():
    m = mlp_init([4, 6, 5], seed=0, head=vecnn.POLICY)
    before = m.params.copy()
    train_cu_batch(m, (np.ones((3, 4)), np.array([0, 1, 2]), np.zeros(3)), SgdConfig(0.1))
    assert np.array_equal(before, m.params)


def test_single_transition_increases_probability():
    m = mlp_init([4, 6, 5], seed=0, head=vecnn.POLICY)
    x = np.array([0.1, -0.3, 0.5, 0.0])
    p0 = vecnn.policy_distribution(m, x)[2]
    train_cu_batch(m, (x[None], np.array([2]), np.ones(1)), SgdConfig(0.01))
    assert vecnn.policy_distribution(m, x)[2] > p0


def test_batch_update_matches_finite_difference_step():
    # a tiny unclipped step should equal lr * weight * (numerical gradient)
    sizes = [3, 4, 5]
    m = mlp_init(sizes, seed=2, head=vecnn.POLICY)
    x, a, w, lr = np.array([0.2, -0.1, 0.4]), 3, 0.7, 1e-6
    fd = oracles.central_diff(oracles.log_prob(sizes, x, a), m.params.copy())
    before = m.params.copy()
    train_cu_batch(m, (x[None], np.array([a]), np.array([w])), SgdConfig(lr, clip=None))
    assert oracles.rel_err((m.params - before) / (lr * w), fd) < 1e-4


def _logit_policy(logits):
    """One-layer net whose output equals ``logits`` for a zero input."""
    m = mlp_init([1, len(logits)], seed=0, head=vecnn.POLICY)
    w, b = m.layers()[0]
    w[:] = 0
    b[:] = logits
    return m


def test_deterministic_argmax_and_ties():
    rng = np.random.default_rng(0)
    m = _logit_policy([2.0, 1.0, 0.0] + [-1.0] * 14)
    assert select_action(m, np.zeros(1), Exploration(DETERMINISTIC), rng) == 0
    m = _logit_policy([0.0, 3.0, 3.0, 1.0])
    assert select_action(m, np.zeros(1), Exploration(DETERMINISTIC), rng) == 1


def test_epsilon_zero_is_deterministic():
    m = mlp_init([5, 8, 17], seed=4, head=vecnn.POLICY)
    rng = np.random.default_rng(0)
    for _ in range(50):
        x = rng.normal(size=5)
        assert select_action(m, x, Exploration(EPSILON_RANDOM, 0.0), rng) == \
            select_action(m, x, Exploration(DETERMINISTIC), rng)


def test_epsilon_one_is_uniform():
    m = _logit_policy([5.0] + [0.0] * 16)
    rng = np.random.default_rng(7)
    draws = [select_action(m, np.zeros(1), Exploration(EPSILON_RANDOM, 1.0), rng)
             for _ in range(10_000)]
    counts = np.bincount(draws, minlength=17)
    expected = 10_000 / 17
    chi2 = ((counts - expected) ** 2 / expected).sum()
    assert chi2 < 39.25   # 99.9% quantile, 16 degrees of freedom


def test_sampling_follows_policy():
    m = _logit_policy(np.log([0.7, 0.2, 0.1]))
    rng = np.random.default_rng(1)
    draws = [select_action(m, np.zeros(1), Exploration(SAMPLE), rng) for _ in range(20_000)]
    assert np.allclose(np.bincount(draws) / 20_000, [0.7, 0.2, 0.1], atol=0.015)


@given(st.lists(st.floats(-50, 50), min_size=17, max_size=17), st.floats(-100, 100))
def test_argmax_shift_invariance(logits, c):
    rng = np.random.default_rng(0)
    a = select_action(_logit_policy(logits), np.zeros(1), Exploration(DETERMINISTIC), rng)
    shifted = [v + c for v in logits]
    b = select_action(_logit_policy(shifted), np.zeros(1), Exploration(DETERMINISTIC), rng)
    # rounding in the shift can split or merge exact ties; otherwise the choice is unchanged
    assert a == b or np.isclose(shifted[a], shifted[b], rtol=0, atol=1e-12 * (1 + abs(c)))
