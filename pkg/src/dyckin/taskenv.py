"""Dyck completion task as seen by the network: a cursor over the input,
a submission channel and a binary end-of-task reward."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dyck import DyckConfig, SymbolCodebook, generate_prefix, required_completion

BUDGET_FACTOR = 8
MAX_LENGTH_SCALE = 1000.0


@dataclass(frozen=True)
class TaskInstance:
    prefix: tuple[int, ...]
    target: tuple[int, ...]
    terminator: int

    @property
    def input_with_terminator(self) -> tuple[int, ...]:
        return self.prefix + (self.terminator,)

    @classmethod
    def from_prefix(cls, cfg: DyckConfig, prefix) -> "TaskInstance":
        prefix = tuple(prefix)
        return cls(prefix, tuple(required_completion(cfg, prefix)), cfg.terminator)


@dataclass
class SubmissionOutcome:
    decoded: int
    expected: int
    matched: bool
    episode_done: bool
    final_reward: int | None
    mse_target: np.ndarray


@dataclass
class TaskState:
    instance: TaskInstance
    nonce: np.ndarray
    step_budget: int
    cursor: int = 0
    # The element under the cursor becomes visible on the first cursor move.
    revealed: bool = False
    submissions: list = field(default_factory=list)
    mismatch_flag: bool = False
    steps_taken: int = 0
    done: bool = False
    final_reward: int | None = None

    @property
    def length(self) -> int:
        return len(self.instance.prefix)

    @property
    def success(self) -> bool:
        return self.final_reward == 1


def step_budget_for(instance: TaskInstance, factor: int = BUDGET_FACTOR) -> int:
    return factor * (len(instance.prefix) + len(instance.target))


def task_from_instance(instance: TaskInstance, dim: int, rng,
                       budget_factor: int = BUDGET_FACTOR) -> TaskState:
    nonce = rng.uniform(-1.0, 1.0, dim)
    return TaskState(instance, nonce, step_budget_for(instance, budget_factor))


def task_begin(cfg: DyckConfig, length: int, rng, dim: int = 8,
               budget_factor: int = BUDGET_FACTOR) -> TaskState:
    if length < 0:
        raise ValueError(f"length must be >= 0, got {length}")
    instance = TaskInstance.from_prefix(cfg, generate_prefix(cfg, length, rng))
    return task_from_instance(instance, dim, rng, budget_factor)


def bracket_match_begin(cfg: DyckConfig, rng, dim: int = 8,
                        budget_factor: int = BUDGET_FACTOR) -> TaskState:
    """One opener, answered by its closer: the PU warm-up task."""
    instance = TaskInstance.from_prefix(cfg, [int(rng.integers(cfg.num_bracket_types))])
    return task_from_instance(instance, dim, rng, budget_factor)


def task_move_cursor(ts: TaskState, direction: str, cb: SymbolCodebook) -> np.ndarray:
    last = len(ts.instance.prefix)
    if not ts.revealed:
        ts.revealed = True
    elif direction == "next":
        ts.cursor = min(ts.cursor + 1, last)
    elif direction == "prev":
        ts.cursor = max(ts.cursor - 1, 0)
    else:
        raise ValueError(f"direction must be 'next' or 'prev', got {direction!r}")
    return cb.codes[ts.instance.input_with_terminator[ts.cursor]]


def task_submit(ts: TaskState, v, cb: SymbolCodebook) -> SubmissionOutcome:
    if ts.done:
        raise RuntimeError("task already finished")
    decoded = cb.decode(v)
    target = ts.instance.target
    k = len(ts.submissions)
    expected = target[k] if k < len(target) else ts.instance.terminator
    matched = decoded == expected
    ts.submissions.append(decoded)
    if not matched:
        ts.mismatch_flag = True
    done = decoded == ts.instance.terminator or len(ts.submissions) > len(target)
    reward = None
    if done:
        reward = finish(ts)
    return SubmissionOutcome(decoded, expected, matched, done, reward, cb.codes[expected])


def finish(ts: TaskState) -> int:
    """End the task; reward 1 iff the submissions equal the target exactly."""
    ts.done = True
    ts.final_reward = int(tuple(ts.submissions) == ts.instance.target)
    return ts.final_reward


def task_indicators(ts: TaskState) -> np.ndarray:
    n = len(ts.instance.prefix)
    position = 1.0 if n == 0 else ts.cursor / n
    return np.array([position, n / MAX_LENGTH_SCALE, ts.steps_taken / ts.step_budget])


def episode_record(ts: TaskState, cfg: DyckConfig) -> dict:
    return {
        "length": ts.length,
        "prefix": cfg.render(ts.instance.prefix),
        "target": cfg.render(ts.instance.target),
        "submissions": cfg.render(ts.submissions),
        "success": ts.success,
        "steps": ts.steps_taken,
    }
