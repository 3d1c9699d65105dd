"""Control Unit training: returns, replay, REINFORCE updates, exploration."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import EpisodeTrace, InteractionNetwork
from .vecnn import Mlp, SgdConfig, reinforce_batch
from . import kernels

WHOLE_EPISODE = "whole_episode"
TEMPORAL_DIFFERENCE = "temporal_difference"

DETERMINISTIC = "deterministic"
EPSILON_RANDOM = "epsilon_random"
SAMPLE = "sample"


@dataclass(frozen=True)
class RewardScheme:
    variant: str = WHOLE_EPISODE
    gamma: float = 1.0

    def __post_init__(self):
        if self.variant not in (WHOLE_EPISODE, TEMPORAL_DIFFERENCE):
            raise ValueError(f"unknown reward scheme {self.variant!r}")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must be in (0, 1], got {self.gamma}")


@dataclass(frozen=True)
class Exploration:
    variant: str = DETERMINISTIC
    epsilon: float = 0.0

    def __post_init__(self):
        if self.variant not in (DETERMINISTIC, EPSILON_RANDOM, SAMPLE):
            raise ValueError(f"unknown exploration {self.variant!r}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must be in [0, 1], got {self.epsilon}")

    @property
    def label(self) -> str:
        if self.variant == EPSILON_RANDOM:
            return f"{self.variant}({self.epsilon:g})"
        return self.variant


def compute_returns(trace, scheme: RewardScheme) -> np.ndarray:
    """Per-step weights: the final reward, discounted toward early steps under TD."""
    t = len(trace.actions)
    r = float(trace.final_reward)
    if t == 0:
        return np.zeros(0)
    if scheme.variant == WHOLE_EPISODE:
        return np.full(t, r)
    return r * scheme.gamma ** np.arange(t - 1, -1, -1, dtype=np.float64)


class ReplayBuffer:
    """FIFO ring of (observation, action, return) transitions."""

    def __init__(self, capacity: int, n_obs: int):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self.obs = np.zeros((capacity, n_obs))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.returns = np.zeros(capacity)
        self.ptr = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def push(self, obs, actions, returns) -> None:
        obs = np.atleast_2d(obs)
        k = len(obs)
        if k >= self.capacity:
            obs, actions, returns = obs[-self.capacity:], actions[-self.capacity:], returns[-self.capacity:]
            k = self.capacity
        idx = (self.ptr + np.arange(k)) % self.capacity
        self.obs[idx] = obs
        self.actions[idx] = actions
        self.returns[idx] = returns
        self.ptr = (self.ptr + k) % self.capacity
        self.size = min(self.size + k, self.capacity)

    def push_trace(self, trace: EpisodeTrace, returns) -> None:
        if len(trace):
            self.push(trace.observations, trace.actions, returns)

    def contents(self):
        """Transitions oldest first."""
        order = (self.ptr - self.size + np.arange(self.size)) % self.capacity
        return self.obs[order], self.actions[order], self.returns[order]

    def sample(self, batch_size: int, rng):
        if batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {batch_size}")
        if self.size == 0:
            return self.obs[:0], self.actions[:0], self.returns[:0]
        idx = rng.integers(0, self.size, batch_size)
        return self.obs[idx], self.actions[idx], self.returns[idx]


class Baseline:
    """Exponential moving average of episode returns."""

    def __init__(self, decay: float = 0.99, initial: float = 0.0):
        self.decay = decay
        self.value = initial

    def update(self, r: float) -> None:
        self.value = self.decay * self.value + (1.0 - self.decay) * r


def train_cu_batch(policy: Mlp, batch, cfg: SgdConfig, baseline: float = 0.0) -> float:
    """One reinforce step per transition; returns the mean gradient norm."""
    obs, actions, returns = batch
    if len(actions) == 0:
        return 0.0
    return reinforce_batch(policy, obs, actions, np.asarray(returns) - baseline, cfg)


def select_action(policy: Mlp, features, exploration: Exploration, rng) -> int:
    v = exploration.variant
    if v == EPSILON_RANDOM and exploration.epsilon > 0 and rng.random() < exploration.epsilon:
        return int(rng.integers(policy.n_outputs))
    if v == SAMPLE:
        logits = kernels.forward(policy.params, policy._sizes, features)
        p = np.exp(logits - logits.max())
        c = np.cumsum(p)
        return int(min(np.searchsorted(c, rng.random() * c[-1], side="right"),
                       policy.n_outputs - 1))
    return int(kernels.argmax_forward(policy.params, policy._sizes, features))


def mlp_policy(policy: Mlp, exploration: Exploration, rng):
    """Adapter to the ``run_episode`` policy signature."""
    def act(net: InteractionNetwork, obs: np.ndarray) -> int:
        return select_action(policy, obs, exploration, rng)
    return act
