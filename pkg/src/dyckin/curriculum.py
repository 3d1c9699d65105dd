"""Difficulty ladder, the scripted oracle strategy and trace pre-training."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from . import network as nw
from .dyck import CLOSE, OPEN, TERMINATOR, DyckConfig, SymbolCodebook
from .network import ExactUnit, InteractionNetwork, NodeId, run_episode
from .taskenv import bracket_match_begin, task_begin
from .vecnn import Mlp, SgdConfig, mlp_forward_batch, perturb_parameters, reinforce_batch

BRACKET_MATCH = "bracket_match"
DYCK = "dyck"
GENERALIZATION_LENGTHS = (100, 1000)


@dataclass(frozen=True)
class Level:
    kind: str
    length: int = 1

    @property
    def label(self) -> str:
        return "BracketMatch" if self.kind == BRACKET_MATCH else f"D{self.length}"

    def begin(self, cfg: DyckConfig, rng, dim: int):
        if self.kind == BRACKET_MATCH:
            return bracket_match_begin(cfg, rng, dim)
        return task_begin(cfg, self.length, rng, dim)


def default_ladder(start_length: int, pretrained: bool = False,
                   bracket_match: bool | None = None) -> list[Level]:
    """Small steps of two up to length 10, then jumps to 100 and 1000.

    The bracket-matching warm-up is included for random initialization
    unless ``bracket_match`` says otherwise.
    """
    if start_length < 2:
        raise ValueError(f"start_length must be >= 2, got {start_length}")
    if bracket_match is None:
        bracket_match = not pretrained
    lengths = list(range(start_length, 10, 2))
    if start_length <= 10:
        lengths.append(10)
    lengths += [n for n in GENERALIZATION_LENGTHS if n > max(lengths, default=start_length - 1)]
    ladder = [Level(DYCK, n) for n in lengths]
    if bracket_match:
        ladder.insert(0, Level(BRACKET_MATCH))
    return ladder


class CurriculumState:
    """Success windows per level and the unlocked frontier."""

    def __init__(self, ladder, window: int = 100, revisit_probability: float = 0.1,
                 unlock_threshold: float = 0.95):
        if not ladder:
            raise ValueError("empty ladder")
        self.ladder = list(ladder)
        self.window = window
        self.revisit_probability = revisit_probability
        self.unlock_threshold = unlock_threshold
        self.windows = [deque(maxlen=window) for _ in self.ladder]
        self.unlocked_index = 0
        self.frontier_solved = False

    @property
    def frontier(self) -> Level:
        return self.ladder[self.unlocked_index]

    def success_rate(self, index: int) -> float:
        w = self.windows[index]
        return sum(w) / len(w) if w else 0.0

    def next_level(self, rng) -> int:
        if self.unlocked_index > 0 and self.revisit_probability > 0 \
                and rng.random() < self.revisit_probability:
            return int(rng.integers(self.unlocked_index))
        return self.unlocked_index

    def record_result(self, index: int, success: bool) -> bool:
        """Record one episode; returns True when the frontier advanced."""
        w = self.windows[index]
        w.append(bool(success))
        if index != self.unlocked_index or len(w) < self.window:
            return False
        if sum(w) < self.unlock_threshold * self.window:
            return False
        if self.unlocked_index + 1 < len(self.ladder):
            self.unlocked_index += 1
            return True
        self.frontier_solved = True
        return False


class OracleUndefined(RuntimeError):
    """The network state is outside what the scripted strategy produces."""


def oracle_phase(net: InteractionNetwork) -> str:
    la = net.last_action
    if la is None or la == nw.COPY_NEW_TO_HASH:
        return "reset"
    sym = net.codebook.decode_strict(net.nodes[NodeId.TASK_INPUT])
    if sym is not None and net.dyck.kind(sym) == TERMINATOR:
        return "emitting" if net.memory.active_size() else "finishing"
    return "reading"


def oracle_action(net: InteractionNetwork) -> int:
    """Reset memory, push openers, pop on closers, emit pops, submit terminator."""
    la = net.last_action
    if la is None:
        return nw.COPY_NEW_TO_HASH
    if la == nw.COPY_NEW_TO_HASH:
        return nw.SELECT_HASH
    if la == nw.SELECT_HASH or la == nw.APPEND_RIGHT:
        return nw.NEXT_INPUT
    if la == nw.COPY_INPUT_TO_RIGHT_SLOT:
        return nw.APPEND_RIGHT
    if la == nw.COPY_PEEK_RIGHT_TO_PU:
        return nw.POP_RIGHT
    if la == nw.COPY_INPUT_TO_PU:
        # a trained-from-scratch PU may not have produced the terminator yet
        return nw.COPY_INPUT_TO_PU
    if la != nw.NEXT_INPUT and la != nw.POP_RIGHT:
        raise OracleUndefined(f"last action {nw.ACTIONS[la].name} is not part of the strategy")
    sym = net.codebook.decode_strict(net.nodes[NodeId.TASK_INPUT])
    if sym is None:
        raise OracleUndefined("task input node does not hold a symbol code")
    kind = net.dyck.kind(sym)
    if kind == TERMINATOR:
        return nw.COPY_PEEK_RIGHT_TO_PU if net.memory.active_size() else nw.COPY_INPUT_TO_PU
    if la == nw.POP_RIGHT:
        return nw.NEXT_INPUT
    return nw.COPY_INPUT_TO_RIGHT_SLOT if kind == OPEN else nw.POP_RIGHT


def oracle_policy(net: InteractionNetwork, obs=None) -> int:
    return oracle_action(net)


@dataclass
class TraceSet:
    observations: np.ndarray
    actions: np.ndarray
    episode_ids: np.ndarray
    steps: np.ndarray

    def __len__(self) -> int:
        return len(self.actions)


def generate_traces(cfg: DyckConfig, codebook: SymbolCodebook, lengths, count_per_length: int,
                    rng) -> TraceSet:
    """Oracle (observation, action) pairs recorded through the real episode loop."""
    lengths = list(lengths)
    if not lengths:
        raise ValueError("lengths must not be empty")
    net = InteractionNetwork(cfg, codebook, ExactUnit(codebook))
    obs, acts, eps, steps = [], [], [], []
    episode = 0
    for length in lengths:
        for _ in range(count_per_length):
            ts = task_begin(cfg, length, rng, codebook.dim)
            tr = run_episode(net, ts, oracle_policy)
            if not tr.success:
                raise RuntimeError(f"oracle failed on {cfg.render(ts.instance.prefix)!r}")
            obs.append(tr.observations)
            acts.append(tr.actions)
            eps.append(np.full(len(tr), episode))
            steps.append(np.arange(len(tr)))
            episode += 1
    return TraceSet(np.vstack(obs), np.concatenate(acts), np.concatenate(eps),
                    np.concatenate(steps))


def greedy_agreement(policy: Mlp, observations, actions) -> float:
    if len(actions) == 0:
        return 0.0
    pred = mlp_forward_batch(policy, observations).argmax(axis=1)
    return float((pred == actions).mean())


@dataclass
class PretrainReport:
    agreement: float
    samples_seen: int
    epochs: float
    n_train: int
    n_heldout: int


def pretrain_cu(policy: Mlp, traces: TraceSet, cfg: SgdConfig, rng, target: float = 0.90,
                max_epochs: int = 20, check_every: int = 256,
                holdout: float = 0.1) -> PretrainReport:
    """Supervised cross-entropy on oracle actions, stopped early.

    Training stops as soon as greedy agreement on a held-out split reaches
    ``target`` (checked every ``check_every`` samples) or after ``max_epochs``.
    Updates ``policy`` in place.
    """
    if len(traces) == 0:
        raise ValueError("no traces")
    order = rng.permutation(len(traces))
    n_held = max(1, int(round(holdout * len(order))))
    held, train = order[:n_held], order[n_held:]
    xh, ah = traces.observations[held], traces.actions[held]
    agreement = greedy_agreement(policy, xh, ah)
    seen = 0
    ones = np.ones(check_every)
    for _ in range(max_epochs):
        if agreement >= target:
            break
        perm = rng.permutation(train)
        for start in range(0, len(perm), check_every):
            idx = perm[start:start + check_every]
            reinforce_batch(policy, traces.observations[idx], traces.actions[idx],
                            ones[:len(idx)], cfg)
            seen += len(idx)
            agreement = greedy_agreement(policy, xh, ah)
            if agreement >= target:
                break
    return PretrainReport(agreement, seen, seen / max(1, len(train)), len(train), n_held)


def add_noise(policy: Mlp, sigma: float, seed: int) -> Mlp:
    return perturb_parameters(policy, sigma, seed)
