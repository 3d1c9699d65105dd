"""Seeded training, evaluation and trace runs driven by a RunConfig."""
from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import vecnn
from .config import PRETRAINED, RunConfig, from_dict, load_config, save_config
from .curriculum import (BRACKET_MATCH, CurriculumState, Level, default_ladder,
                         generate_traces, greedy_agreement, oracle_policy, pretrain_cu)
from .dyck import DyckConfig, SymbolCodebook
from .learning import (Baseline, Exploration, ReplayBuffer, RewardScheme, compute_returns,
                       mlp_policy, train_cu_batch, DETERMINISTIC)
from .network import (N_ACTIONS, ExactUnit, InteractionNetwork, MlpUnit, observation_size,
                      run_episode, step_record)
from .taskenv import task_begin

log = logging.getLogger(__name__)

WALL_CLOCK_FIELDS = ("wall_time",)
ORACLE = "oracle"
TRACE_DECIMALS = 6

# independent random streams, all derived from the run seed
_STREAMS = ("codebook", "pu_init", "cu_init", "tasks", "explore", "replay", "curriculum",
            "pretrain", "noise")


def _seeds(seed: int) -> dict[str, int]:
    children = np.random.SeedSequence(seed).spawn(len(_STREAMS))
    return {name: int(c.generate_state(1)[0]) for name, c in zip(_STREAMS, children)}


def dyck_config(cfg: RunConfig) -> DyckConfig:
    return DyckConfig(cfg.dyck.num_bracket_types, cfg.dyck.close_probability)


def build_codebook(cfg: RunConfig) -> SymbolCodebook:
    return SymbolCodebook(dyck_config(cfg), cfg.dyck.code_dim, _seeds(cfg.seed)["codebook"])


def build_networks(cfg: RunConfig) -> tuple[vecnn.Mlp, vecnn.Mlp]:
    s = _seeds(cfg.seed)
    d = cfg.dyck.code_dim
    pu = vecnn.mlp_init([d, *cfg.network.pu_hidden, d], s["pu_init"], vecnn.REGRESSION)
    cu = vecnn.mlp_init([observation_size(d), *cfg.network.cu_hidden, N_ACTIONS],
                        s["cu_init"], vecnn.POLICY)
    return cu, pu


def build_ladder(cfg: RunConfig) -> list[Level]:
    return default_ladder(cfg.ladder.start_length, cfg.mode == PRETRAINED, cfg.ladder.bracket_match)


def _sgd(section) -> vecnn.SgdConfig:
    return vecnn.SgdConfig(section.learning_rate, section.clip)


def save_checkpoint(path, cfg: RunConfig, cu: vecnn.Mlp, pu: vecnn.Mlp) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    vecnn.save(cu, path / "cu.bin")
    vecnn.save(pu, path / "pu.bin")
    save_config(cfg, path / "config.yaml")
    return path


@dataclass
class Checkpoint:
    cfg: RunConfig
    cu: vecnn.Mlp | None      # None for the oracle pseudo-checkpoint
    pu: vecnn.Mlp | None

    @property
    def is_oracle(self) -> bool:
        return self.cu is None


def load_checkpoint(path, cfg: RunConfig | None = None) -> Checkpoint:
    if str(path) == ORACLE:
        return Checkpoint(cfg or from_dict({}), None, None)
    path = Path(path)
    ck_cfg = load_config(path / "config.yaml")
    cu, pu = vecnn.load(path / "cu.bin"), vecnn.load(path / "pu.bin")
    d = ck_cfg.dyck.code_dim
    if cu.n_inputs != observation_size(d) or cu.n_outputs != N_ACTIONS:
        raise ValueError(f"control unit shape {cu.layer_sizes} does not fit code_dim {d}")
    if pu.n_inputs != d or pu.n_outputs != d:
        raise ValueError(f"processing unit shape {pu.layer_sizes} does not fit code_dim {d}")
    return Checkpoint(ck_cfg, cu, pu)


class MetricsWriter:
    def __init__(self, path: Path | None):
        self.records: list[dict] = []
        self._fh = open(path, "w") if path is not None else None

    def write(self, rec: dict) -> None:
        self.records.append(rec)
        if self._fh is not None:
            self._fh.write(json.dumps(rec) + "\n")

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()


def strip_wall_clock(rec: dict) -> dict:
    return {k: v for k, v in rec.items() if k not in WALL_CLOCK_FIELDS}


@dataclass
class RunResult:
    status: str
    records: list = field(default_factory=list)
    unlocks: list = field(default_factory=list)     # (episode, from_label, to_label)
    cu: vecnn.Mlp | None = None
    pu: vecnn.Mlp | None = None
    out_dir: Path | None = None

    def unlock_episode(self, label: str) -> int | None:
        for ep, frm, _ in self.unlocks:
            if frm == label:
                return ep
        return None


def greedy_success(cfg: RunConfig, cu: vecnn.Mlp, length: int, episodes: int, seed: int,
                   pu=None) -> float:
    """Success rate of the greedy CU; an exact PU is used unless one is given."""
    dy = dyck_config(cfg)
    cb = build_codebook(cfg)
    unit = ExactUnit(cb) if pu is None else MlpUnit(pu, _sgd(cfg.pu_sgd))
    net = InteractionNetwork(dy, cb, unit)
    rng = np.random.default_rng(seed)
    policy = mlp_policy(cu, Exploration(DETERMINISTIC), rng)
    wins = 0
    for _ in range(episodes):
        ts = task_begin(dy, length, rng, cb.dim)
        wins += run_episode(net, ts, policy).success
    return wins / episodes


def write_traces(traces, path) -> None:
    """One JSON record per (observation, action) pair."""
    with open(path, "w") as fh:
        for x, a, e, t in zip(traces.observations, traces.actions, traces.episode_ids,
                              traces.steps):
            fh.write(json.dumps({"episode": int(e), "step": int(t), "action": int(a),
                                 "observation": [round(float(v), TRACE_DECIMALS) for v in x]})
                     + "\n")


def pretrain_phase(cfg: RunConfig, cu: vecnn.Mlp, traces_path=None) -> tuple[vecnn.Mlp, dict]:
    """Oracle traces, early-stopped cross-entropy training, then parameter noise."""
    s = _seeds(cfg.seed)
    p = cfg.pretrain
    rng = np.random.default_rng(s["pretrain"])
    traces = generate_traces(dyck_config(cfg), build_codebook(cfg), p.lengths,
                             p.episodes_per_length, rng)
    if traces_path is not None:
        write_traces(traces, traces_path)
    report = pretrain_cu(cu, traces, vecnn.SgdConfig(p.learning_rate, cfg.cu_sgd.clip), rng,
                         target=p.target_agreement, max_epochs=p.max_epochs,
                         check_every=p.check_every, holdout=p.holdout)
    probe_len = max(p.lengths)
    before = greedy_success(cfg, cu, probe_len, 100, s["pretrain"] + 1)
    noisy = vecnn.perturb_parameters(cu, p.noise_sigma, s["noise"])
    after = greedy_success(cfg, noisy, probe_len, 100, s["pretrain"] + 1)
    summary = {
        "type": "pretrain",
        "trace_pairs": len(traces),
        "trace_episodes": int(traces.episode_ids[-1]) + 1,
        "heldout_agreement": report.agreement,
        "samples_seen": report.samples_seen,
        "epochs": report.epochs,
        "noise_sigma": p.noise_sigma,
        "probe_length": probe_len,
        "greedy_success_before_noise": before,
        "greedy_success_after_noise": after,
    }
    return noisy, summary


class Trainer:
    """The curriculum training loop for one run."""

    def __init__(self, cfg: RunConfig, out_dir=None):
        self.cfg = cfg.validate()
        self.out_dir = Path(out_dir) if out_dir is not None else None
        s = _seeds(cfg.seed)
        self.dyck = dyck_config(cfg)
        self.codebook = build_codebook(cfg)
        self.cu, pu = build_networks(cfg)
        self.pu_unit = MlpUnit(pu, _sgd(cfg.pu_sgd))
        self.net = InteractionNetwork(self.dyck, self.codebook, self.pu_unit)
        self.curriculum = CurriculumState(build_ladder(cfg), cfg.ladder.window,
                                          cfg.ladder.revisit_probability,
                                          cfg.ladder.unlock_threshold)
        self.replay = ReplayBuffer(cfg.replay.capacity, self.net.n_obs)
        self.scheme = RewardScheme(cfg.reward.scheme, cfg.reward.gamma)
        self.exploration = Exploration(cfg.exploration.variant, cfg.exploration.epsilon)
        self.cu_sgd = _sgd(cfg.cu_sgd)
        self.baselines = {lv.label: Baseline(cfg.reward.baseline_decay, cfg.reward.baseline_initial)
                          for lv in self.curriculum.ladder}
        self.rng_tasks = np.random.default_rng(s["tasks"])
        self.rng_explore = np.random.default_rng(s["explore"])
        self.rng_replay = np.random.default_rng(s["replay"])
        self.rng_curriculum = np.random.default_rng(s["curriculum"])
        self.episode = 0

    @property
    def pu(self) -> vecnn.Mlp:
        return self.pu_unit.mlp

    def checkpoint(self, name: str) -> Path | None:
        if self.out_dir is None:
            return None
        return save_checkpoint(self.out_dir / "checkpoints" / name, self.cfg, self.cu, self.pu)

    def step(self) -> tuple[dict, bool]:
        """Run and learn from one episode; returns its record and whether it unlocked."""
        cur = self.curriculum
        idx = cur.next_level(self.rng_curriculum)
        level = cur.ladder[idx]
        ts = level.begin(self.dyck, self.rng_tasks, self.codebook.dim)
        if level.kind == BRACKET_MATCH:
            trace = run_episode(self.net, ts, oracle_policy, train_pu=True)
            grad = 0.0
        else:
            policy = mlp_policy(self.cu, self.exploration, self.rng_explore)
            trace = run_episode(self.net, ts, policy, train_pu=True)
            returns = compute_returns(trace, self.scheme)
            base = self.baselines[level.label]
            if self.cfg.reward.baseline:
                returns = returns - base.value
            base.update(trace.final_reward)
            self.replay.push_trace(trace, returns)
            grad = 0.0
            for _ in range(self.cfg.replay.updates_per_episode):
                batch = self.replay.sample(self.cfg.replay.batch_size, self.rng_replay)
                grad = train_cu_batch(self.cu, batch, self.cu_sgd)
        frontier_idx = cur.unlocked_index
        unlocked = cur.record_result(idx, trace.success)
        rec = {
            "type": "episode",
            "episode": self.episode,
            "level": level.label,
            "length": ts.length,
            "success": bool(trace.success),
            "steps": len(trace),
            "reward_scheme": self.scheme.variant,
            "exploration": self.exploration.label,
            "grad_norm": grad,
            "pu_loss": float(np.mean(trace.pu_losses)) if trace.pu_losses else 0.0,
            "frontier": cur.ladder[frontier_idx].label,
            "frontier_rate": cur.success_rate(frontier_idx),
        }
        self.episode += 1
        return rec, unlocked


def run_train(cfg: RunConfig, out_dir=None, progress_every: int = 0) -> RunResult:
    """Full protocol: optional pre-training, then curriculum episodes."""
    cfg = cfg.validate()
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_config(cfg, out / "config.yaml")
    writer = MetricsWriter(out / "metrics.jsonl")
    trainer = Trainer(cfg, out)
    result = RunResult("running", writer.records, out_dir=out)
    t0 = time.perf_counter()
    try:
        if cfg.mode == PRETRAINED:
            trainer.cu, summary = pretrain_phase(cfg, trainer.cu)
            summary["wall_time"] = time.perf_counter() - t0
            writer.write(summary)
            trainer.checkpoint("pretrained")
        cur = trainer.curriculum
        frontier_start = 0
        status = "episode_budget"
        while trainer.episode < cfg.train.max_episodes:
            rec, unlocked = trainer.step()
            rec["wall_time"] = time.perf_counter() - t0
            writer.write(rec)
            label = rec["frontier"]
            if unlocked:
                to = cur.frontier.label
                result.unlocks.append((rec["episode"], label, to))
                writer.write({"type": "unlock", "episode": rec["episode"], "from": label,
                              "to": to, "episodes_at_level": trainer.episode - frontier_start,
                              "wall_time": time.perf_counter() - t0})
                frontier_start = trainer.episode
                if cfg.train.checkpoint_on_unlock:
                    trainer.checkpoint(f"unlock_{len(result.unlocks):02d}_{label}")
                if cfg.train.stop_after == label:
                    status = "stop_after"
                    break
            elif cur.frontier_solved and cfg.train.stop_after == cur.frontier.label:
                status = "stop_after"
                break
            budget = cfg.train.frontier_budget.get(cur.frontier.label)
            if budget is not None and trainer.episode - frontier_start >= budget:
                status = "frontier_budget"
                break
            if progress_every and trainer.episode % progress_every == 0:
                log.info("episode %d frontier %s rate %.2f", trainer.episode,
                         cur.frontier.label, rec["frontier_rate"])
        result.status = status
        result.cu, result.pu = trainer.cu, trainer.pu
        trainer.checkpoint("final")
        writer.write({"type": "end", "status": status, "episodes": trainer.episode,
                      "frontier": cur.frontier.label,
                      "frontier_rate": cur.success_rate(cur.unlocked_index),
                      "unlocks": [list(u) for u in result.unlocks],
                      "wall_time": time.perf_counter() - t0})
    finally:
        writer.close()
    return result


def _eval_net(ck: Checkpoint):
    cfg = ck.cfg
    dy = dyck_config(cfg)
    cb = build_codebook(cfg)
    unit = ExactUnit(cb) if ck.is_oracle else MlpUnit(ck.pu, _sgd(cfg.pu_sgd))
    return dy, cb, InteractionNetwork(dy, cb, unit)


def _eval_policy(ck: Checkpoint, deterministic: bool, rng):
    if ck.is_oracle:
        return oracle_policy
    exploration = Exploration(DETERMINISTIC) if deterministic else \
        Exploration(ck.cfg.exploration.variant, ck.cfg.exploration.epsilon)
    return mlp_policy(ck.cu, exploration, rng)


def run_eval(checkpoint, lengths, episodes: int, deterministic: bool = True,
             seed: int = 0, cfg: RunConfig | None = None) -> dict[int, float]:
    """Frozen-parameter success rate per length."""
    ck = checkpoint if isinstance(checkpoint, Checkpoint) else load_checkpoint(checkpoint, cfg)
    table = {}
    for length in lengths:
        dy, cb, net = _eval_net(ck)
        rng = np.random.default_rng([seed, length])
        policy = _eval_policy(ck, deterministic, rng)
        wins = 0
        for _ in range(episodes):
            ts = task_begin(dy, length, rng, cb.dim)
            wins += run_episode(net, ts, policy, train_pu=False).success
        table[length] = wins / episodes if episodes else 0.0
    return table


def run_trace(checkpoint, length: int, seed: int = 0, cfg: RunConfig | None = None,
              prefix: str | None = None) -> list[dict]:
    """Step records of one deterministic episode, followed by a footer record.

    The episode matches the first episode ``run_eval`` plays at this length
    with the same seed, unless an explicit ``prefix`` is given.
    """
    ck = checkpoint if isinstance(checkpoint, Checkpoint) else load_checkpoint(checkpoint, cfg)
    dy, cb, net = _eval_net(ck)
    rng = np.random.default_rng([seed, length])
    policy = _eval_policy(ck, True, rng)
    if prefix is not None:
        from .taskenv import TaskInstance, task_from_instance
        ts = task_from_instance(TaskInstance.from_prefix(dy, dy.parse(prefix)), cb.dim, rng)
    else:
        ts = task_begin(dy, length, rng, cb.dim)
    lines = []
    trace = run_episode(net, ts, policy,
                        on_step=lambda *args: lines.append(step_record(*args)))
    footer = {"type": "footer", "prefix": dy.render(ts.instance.prefix),
              "target": dy.render(ts.instance.target), "submissions": dy.render(ts.submissions),
              "success": bool(trace.success), "steps": len(trace), "step_budget": ts.step_budget}
    return lines + [footer]
