"""The Interaction Network: nine Nodes, a discrete action space, one
Processing Unit and the episode loop that ties them to the task and memory."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Callable, NamedTuple

import numpy as np

from . import taskenv
from .dyck import DyckConfig, SymbolCodebook
from .memory import HashDequeMemory, NoActiveMemory
from .vecnn import Mlp, SgdConfig, mlp_forward, train_mse_step


class NodeId(IntEnum):
    TASK_NEW = 0
    TASK_INPUT = 1
    PU_INPUT = 2
    TASK_OUTPUT = 3
    HASH_SELECT = 4
    APPEND_LEFT_SLOT = 5
    APPEND_RIGHT_SLOT = 6
    PEEK_LEFT = 7
    PEEK_RIGHT = 8


NODE_NAMES = ("TaskNew", "TaskInput", "PuInput", "TaskOutput", "HashSelect",
              "AppendLeftSlot", "AppendRightSlot", "PeekLeft", "PeekRight")
N_NODES = len(NodeId)


class Action(NamedTuple):
    name: str
    src: NodeId | None = None
    dst: NodeId | None = None

    @property
    def is_copy(self) -> bool:
        return self.src is not None


def _copy(src: NodeId, dst: NodeId) -> Action:
    return Action(f"Copy({NODE_NAMES[src]}->{NODE_NAMES[dst]})", src, dst)


N = NodeId
ACTIONS: tuple[Action, ...] = (
    Action("NextInput"),
    Action("PrevInput"),
    Action("SelectHash"),
    Action("AppendLeft"),
    Action("AppendRight"),
    Action("PopLeft"),
    Action("PopRight"),
    _copy(N.TASK_INPUT, N.PU_INPUT),
    _copy(N.TASK_INPUT, N.APPEND_LEFT_SLOT),
    _copy(N.TASK_INPUT, N.APPEND_RIGHT_SLOT),
    _copy(N.PEEK_LEFT, N.PU_INPUT),
    _copy(N.PEEK_RIGHT, N.PU_INPUT),
    _copy(N.TASK_NEW, N.HASH_SELECT),
    # not needed for Dyck
    _copy(N.TASK_INPUT, N.HASH_SELECT),
    _copy(N.PEEK_RIGHT, N.APPEND_LEFT_SLOT),
    _copy(N.PEEK_LEFT, N.APPEND_RIGHT_SLOT),
    _copy(N.TASK_OUTPUT, N.PU_INPUT),
)
ACTION_INDEX = {a.name: i for i, a in enumerate(ACTIONS)}
N_ACTIONS = len(ACTIONS)

(NEXT_INPUT, PREV_INPUT, SELECT_HASH, APPEND_LEFT, APPEND_RIGHT, POP_LEFT, POP_RIGHT,
 COPY_INPUT_TO_PU, COPY_INPUT_TO_LEFT_SLOT, COPY_INPUT_TO_RIGHT_SLOT,
 COPY_PEEK_LEFT_TO_PU, COPY_PEEK_RIGHT_TO_PU, COPY_NEW_TO_HASH) = range(13)


def action_space(dim: int | None = None) -> list[Action]:
    """The fixed, ordered action list (independent of the code dimension)."""
    return list(ACTIONS)


def observation_size(dim: int) -> int:
    return N_NODES * dim + N_ACTIONS + 4


class MlpUnit:
    """Processing Unit backed by a regression network."""

    def __init__(self, mlp: Mlp, sgd: SgdConfig):
        self.mlp = mlp
        self.sgd = sgd

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return mlp_forward(self.mlp, x)

    def train(self, x, target) -> float:
        return train_mse_step(self.mlp, x, target, self.sgd)


class ExactUnit:
    """Processing Unit that maps each opener code to its closer code exactly."""

    def __init__(self, codebook: SymbolCodebook):
        self.codebook = codebook
        n = codebook.cfg.num_bracket_types
        self._map = [n + s if s < n else s for s in range(codebook.cfg.num_symbols)]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.codebook.codes[self._map[self.codebook.decode(x)]].copy()

    def train(self, x, target) -> float:
        return 0.0


@dataclass
class EpisodeTrace:
    observations: np.ndarray
    actions: np.ndarray
    submissions: list = field(default_factory=list)   # (step, SubmissionOutcome)
    final_reward: int = 0
    success: bool = False
    length: int = 0
    pu_losses: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.actions)


class InteractionNetwork:
    """Nodes, memory and Processing Unit around one task at a time.

    The memory outlives tasks: a new task starts with whatever deque was
    active before, so the network has to reset it itself.
    """

    def __init__(self, dyck: DyckConfig, codebook: SymbolCodebook, pu):
        self.dyck = dyck
        self.codebook = codebook
        self.dim = codebook.dim
        self.pu = pu
        self.memory = HashDequeMemory(self.dim)
        self.nodes = np.zeros((N_NODES, self.dim))
        self.task: taskenv.TaskState | None = None
        self.last_action: int | None = None
        self.n_obs = observation_size(self.dim)
        self._size_scale = np.log1p(taskenv.MAX_LENGTH_SCALE)

    def begin(self, ts: taskenv.TaskState) -> None:
        self.task = ts
        self.nodes[:] = 0.0
        self.nodes[N.TASK_NEW] = ts.nonce
        self._refresh_peeks()
        self.last_action = None

    def _refresh_peeks(self) -> None:
        self.nodes[N.PEEK_LEFT] = self.memory.peek_left()
        self.nodes[N.PEEK_RIGHT] = self.memory.peek_right()

    def observe(self) -> np.ndarray:
        d9 = N_NODES * self.dim
        obs = np.zeros(self.n_obs)
        obs[:d9] = self.nodes.ravel()
        if self.last_action is not None:
            obs[d9 + self.last_action] = 1.0
        ts = self.task
        base = d9 + N_ACTIONS
        n = len(ts.instance.prefix)
        obs[base] = 1.0 if n == 0 else ts.cursor / n
        obs[base + 1] = n / taskenv.MAX_LENGTH_SCALE
        obs[base + 2] = ts.steps_taken / ts.step_budget
        obs[base + 3] = np.log1p(self.memory.active_size()) / self._size_scale
        return obs

    def apply(self, a: int) -> list[taskenv.SubmissionOutcome]:
        if not 0 <= a < N_ACTIONS:
            raise ValueError(f"unknown action {a}")
        ts = self.task
        if ts is None or ts.done:
            raise RuntimeError("no running task")
        nodes = self.nodes
        outcomes = []
        if a == NEXT_INPUT or a == PREV_INPUT:
            nodes[N.TASK_INPUT] = taskenv.task_move_cursor(
                ts, "next" if a == NEXT_INPUT else "prev", self.codebook)
        elif a == SELECT_HASH:
            self.memory.select_hash(nodes[N.HASH_SELECT])
            self._refresh_peeks()
        elif a <= POP_RIGHT:
            try:
                if a == APPEND_LEFT:
                    self.memory.append_left(nodes[N.APPEND_LEFT_SLOT])
                elif a == APPEND_RIGHT:
                    self.memory.append_right(nodes[N.APPEND_RIGHT_SLOT])
                elif a == POP_LEFT:
                    self.memory.pop_left()
                else:
                    self.memory.pop_right()
            except NoActiveMemory:
                pass  # no deque selected yet: the action does nothing
            self._refresh_peeks()
        else:
            act = ACTIONS[a]
            nodes[act.dst] = nodes[act.src]
            if act.dst == N.PU_INPUT:
                # every write fires the PU, even when the value is unchanged
                nodes[N.TASK_OUTPUT] = self.pu(nodes[N.PU_INPUT])
                outcomes.append(taskenv.task_submit(ts, nodes[N.TASK_OUTPUT], self.codebook))
        if self.last_action is None:
            nodes[N.TASK_NEW] = 0.0
        self.last_action = a
        ts.steps_taken += 1
        if not ts.done and ts.steps_taken >= ts.step_budget:
            taskenv.finish(ts)
        return outcomes


Policy = Callable[[InteractionNetwork, np.ndarray], int]


def run_episode(net: InteractionNetwork, ts: taskenv.TaskState, policy: Policy,
                train_pu: bool = False, on_step=None) -> EpisodeTrace:
    """Run ``policy`` on one task until it ends; returns the full trace.

    ``on_step(step, action, net, outcomes)`` is called after every action.
    """
    net.begin(ts)
    obs_rows = []
    actions = []
    trace = EpisodeTrace(np.empty((0, net.n_obs)), np.empty(0, dtype=np.int64),
                         length=ts.length)
    while not ts.done:
        obs = net.observe()
        a = policy(net, obs)
        outcomes = net.apply(a)
        step = len(actions)
        obs_rows.append(obs)
        actions.append(a)
        for out in outcomes:
            trace.submissions.append((step, out))
            if train_pu:
                trace.pu_losses.append(net.pu.train(net.nodes[N.PU_INPUT], out.mse_target))
        if on_step is not None:
            on_step(step, a, net, outcomes)
    if obs_rows:
        trace.observations = np.vstack(obs_rows)
    trace.actions = np.asarray(actions, dtype=np.int64)
    trace.final_reward = int(ts.final_reward)
    trace.success = ts.success
    return trace


def describe_node(net: InteractionNetwork, node: NodeId) -> str:
    v = net.nodes[node]
    if not v.any():
        return "0"
    sym = net.codebook.decode_strict(v)
    return net.dyck.render([sym]) if sym is not None else "?"


def step_record(step: int, a: int, net: InteractionNetwork, outcomes) -> dict:
    rec = {
        "step": step,
        "action": ACTIONS[a].name,
        "nodes": {NODE_NAMES[i]: describe_node(net, NodeId(i)) for i in range(N_NODES)},
        "memory_size": net.memory.active_size(),
    }
    if outcomes:
        o = outcomes[-1]
        rec["submitted"] = net.dyck.render([o.decoded])
        rec["expected"] = net.dyck.render([o.expected])
        rec["matched"] = o.matched
    return rec
