"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The lines are collected in ``REPORT`` and echoed in the pytest terminal summary.
Criteria 6 and 7 are training runs and carry the ``slow`` marker; they still run
in the default suite.
"""
import json
import statistics
import time

import numpy as np
import pytest

from dyckin import vecnn
from dyckin.config import BUNDLED, resolve_config
from dyckin.curriculum import BRACKET_MATCH, oracle_policy
from dyckin.dyck import DyckConfig, SymbolCodebook, generate_prefix, required_completion
from dyckin.memory import HashDequeMemory, NoActiveMemory
from dyckin.network import ExactUnit, InteractionNetwork, run_episode
from dyckin.runner import Trainer, run_eval, run_train, strip_wall_clock
from dyckin.taskenv import task_begin
from dyckin.vecnn import mlp_init

import oracles

REPORT = []


def report(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    REPORT.append(line)
    print(line)
    return ok


def report_only(n, detail):
    line = f"criterion {n}: PASS (report-only)  {detail}"
    REPORT.append(line)
    print(line)


def test_1_dyck_generator_soundness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    failures = 0
    for i in range(10_000):
        cfg = DyckConfig([1, 2, 5][i % 3])
        prefix = generate_prefix(cfg, int(rng.integers(0, 201)), rng)
        text = cfg.render(prefix)
        completion = cfg.render(required_completion(cfg, prefix))
        valid, _ = oracles.stack_check(text)
        body = completion[:-1]
        failures += not (valid and completion.endswith("$") and body == oracles.completion_text(text)
                         and oracles.stack_check(text + body) == (True, True))
    dt = time.perf_counter() - t0
    assert report(1, failures == 0 and dt < 5,
                  f"{failures} failures in 10^4 prefixes, {dt:.2f}s (limit 5s)")


def test_2_memory_oracle_equivalence():
    t0 = time.perf_counter()
    bad = oracles.memory_script_mismatches(HashDequeMemory, NoActiveMemory, 100_000, seed=77)
    dt = time.perf_counter() - t0
    assert report(2, bad == 0 and dt < 5, f"{bad} mismatches in 10^5 ops, {dt:.2f}s (limit 5s)")


def test_3_gradient_checks():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    worst, cases = 0.0, 0
    for case in range(60):
        sizes = [int(rng.integers(1, 7)), int(rng.integers(1, 9)), int(rng.integers(2, 6))]
        x = rng.normal(size=sizes[0])
        m = mlp_init(sizes, seed=case)
        t = rng.normal(size=sizes[-1])
        _, g = vecnn.mse_and_grad(m, x, t)
        fd = oracles.central_diff(oracles.mse_loss(sizes, x, t), m.params.copy())
        worst = max(worst, oracles.rel_err(g, fd))
        p = mlp_init(sizes, seed=1000 + case, head=vecnn.POLICY)
        # a zeroed output layer would make every log-probability gradient trivial
        p.params[:] = rng.normal(scale=0.5, size=p.params.size)
        a = int(rng.integers(sizes[-1]))
        _, g = vecnn.log_prob_and_grad(p, x, a)
        fd = oracles.central_diff(oracles.log_prob(sizes, x, a), p.params.copy())
        worst = max(worst, oracles.rel_err(g, fd))
        cases += 2
    dt = time.perf_counter() - t0
    assert report(3, worst < 1e-4 and cases >= 100 and dt < 30,
                  f"worst relative error {worst:.2e} over {cases} cases, {dt:.2f}s (limit 30s)")


def test_4_oracle_plumbing():
    t0 = time.perf_counter()
    rates = {}
    for n in (1, 2, 5):
        cfg = DyckConfig(n)
        cb = SymbolCodebook(cfg, 8, seed=n)
        net = InteractionNetwork(cfg, cb, ExactUnit(cb))
        rng = np.random.default_rng(n)
        for length in (10, 100, 1000):
            wins = sum(run_episode(net, task_begin(cfg, length, rng), oracle_policy).success
                       for _ in range(100))
            rates[(n, length)] = wins / 100
    dt = time.perf_counter() - t0
    worst = min(rates.values())
    assert report(4, worst == 1.0 and dt < 120,
                  f"lowest success {worst:.2f} over n in {{1,2,5}} x length in {{10,100,1000}}, "
                  f"{dt:.1f}s (limit 120s)")


def test_5_pu_learnability():
    t0 = time.perf_counter()
    cfg = resolve_config("bracket_match_first")
    trainer = Trainer(cfg)
    assert trainer.curriculum.ladder[0].kind == BRACKET_MATCH
    while trainer.curriculum.unlocked_index == 0 and trainer.episode < 5000:
        trainer.step()
    cb, dy = trainer.codebook, trainer.dyck
    pairs = [(dy.opener(i), dy.closer(i)) for i in range(dy.n)] + [(dy.terminator, dy.terminator)]
    worst_mse, decoded = 0.0, True
    for src, dst in pairs:
        out = vecnn.mlp_forward(trainer.pu, cb.encode(src))
        worst_mse = max(worst_mse, float(np.mean((out - cb.encode(dst)) ** 2)))
        decoded &= cb.decode(out) == dst
    dt = time.perf_counter() - t0
    ok = trainer.curriculum.unlocked_index > 0 and decoded and worst_mse < 1e-3 and dt < 60
    assert report(5, ok, f"BracketMatch passed after {trainer.episode} episodes, all pairs decode "
                         f"{decoded}, worst per-pair MSE {worst_mse:.2e}, {dt:.1f}s (limit 60s)")


@pytest.mark.slow
def test_6_headline(tmp_path):
    base = resolve_config("pretrained_whole_episode")
    t0 = time.perf_counter()
    lines, passed = [], False
    for seed in range(3):
        r = run_train(base.replace(seed=seed), tmp_path / f"seed_{seed}")
        d10, d100 = r.unlock_episode("D10"), r.unlock_episode("D100")
        start10 = r.unlock_episode("BracketMatch") or 0
        ok10 = d10 is not None and d10 - start10 < 50_000
        ok100 = ok10 and d100 is not None and d100 - d10 <= 100_000
        end = r.records[-1]
        d1000 = end["frontier_rate"] if end["frontier"] == "D1000" else 0.0
        lines.append(f"seed {seed}: D10 passed at {d10}, D100 passed at {d100}, "
                     f"length-1000 success {d1000:.2f} at end")
        if ok100:
            passed = True
            break
    dt = time.perf_counter() - t0
    assert report(6, passed and dt < 3600, "; ".join(lines) + f"; {dt / 60:.1f} min (limit 60)")


RS_EPISODES = 3000


@pytest.mark.slow
def test_7_reward_scheme_comparison(tmp_path):
    t0 = time.perf_counter()
    medians, rows = {}, []
    for name in ("random_init_whole_episode", "random_init_td"):
        rates, recent = [], []
        for seed in range(3):
            cfg = resolve_config(name).replace(seed=seed, **{"train.max_episodes": RS_EPISODES})
            out = tmp_path / f"{name}_{seed}"
            r = run_train(cfg, out)
            assert r.records[-1]["type"] == "end"
            assert set(r.records[1]) == set(r.records[2])
            rates.append(run_eval(out / "checkpoints" / "final", [10], 100, seed=seed)[10])
            eps = [rec for rec in r.records if rec["type"] == "episode"][-500:]
            recent.append(f"{r.records[-1]['frontier']}/{sum(e['success'] for e in eps) / len(eps):.2f}")
        medians[name] = statistics.median(rates)
        rows.append(f"{r.records[1]['reward_scheme']} eval {rates}, frontier/recent training "
                    f"success {recent}")
    dt = time.perf_counter() - t0
    report_only(7, f"length-10 greedy success after {RS_EPISODES} episodes, median "
                   f"whole-episode {medians['random_init_whole_episode']:.2f} vs TD "
                   f"{medians['random_init_td']:.2f} ({'; '.join(rows)}), {dt:.0f}s")


def test_8_determinism(tmp_path):
    digests = []
    for name in BUNDLED:
        cfg = resolve_config(name).replace(**{"train.max_episodes": 60,
                                              "pretrain.episodes_per_length": 10})
        runs = []
        for k in range(2):
            run_train(cfg, tmp_path / f"{name}_{k}")
            with open(tmp_path / f"{name}_{k}" / "metrics.jsonl") as fh:
                runs.append("\n".join(json.dumps(strip_wall_clock(json.loads(line)))
                                      for line in fh))
        digests.append(runs[0] == runs[1])
    assert report(8, all(digests), f"{sum(digests)}/{len(digests)} bundled configs reproduce "
                                   f"identical metrics excluding wall-clock fields")
