"""Command-line entry point: ``dyckin train|eval|trace|gen-dyck|pretrain|sweep``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import yaml

from . import runner
from .config import ConfigError, RunConfig, resolve_config
from .dyck import DyckConfig, generate_prefix, required_completion

log = logging.getLogger("dyckin")


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _load(args) -> RunConfig:
    cfg = resolve_config(args.config) if args.config else RunConfig()
    changes = {}
    for item in getattr(args, "set", None) or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(item, "overrides look like section.field=value")
        changes[key] = yaml.safe_load(value)
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "episodes", None) is not None and args.command in ("train", "sweep"):
        changes["train.max_episodes"] = args.episodes
    if getattr(args, "out", None) is not None and args.command == "train":
        changes["out_dir"] = str(args.out)
    return cfg.replace(**changes) if changes else cfg


def cmd_train(args) -> int:
    cfg = _load(args)
    result = runner.run_train(cfg, cfg.out_dir, progress_every=args.progress)
    end = result.records[-1]
    print(f"status {result.status}  episodes {end['episodes']}  frontier {end['frontier']} "
          f"({end['frontier_rate']:.2f})")
    for ep, frm, to in result.unlocks:
        print(f"  episode {ep:>7}: {frm} -> {to}")
    print(f"output in {result.out_dir}")
    return 0


def _sweep_one(job):
    cfg, out = job
    result = runner.run_train(cfg, out)
    end = result.records[-1]
    return cfg.seed, result.status, end["frontier"], end["frontier_rate"], result.unlocks


def cmd_sweep(args) -> int:
    base = _load(args)
    out = Path(args.out or base.out_dir)
    jobs = [(base.replace(seed=s), out / f"seed_{s}") for s in args.seeds]
    with ProcessPoolExecutor(max_workers=args.jobs) as pool:
        for seed, status, frontier, rate, unlocks in pool.map(_sweep_one, jobs):
            steps = ", ".join(f"{frm}@{ep}" for ep, frm, _ in unlocks) or "none"
            print(f"seed {seed}: {status}, frontier {frontier} ({rate:.2f}), passed {steps}")
    return 0


def cmd_eval(args) -> int:
    cfg = _load(args) if args.config else None
    table = runner.run_eval(args.checkpoint, args.lengths, args.episodes,
                            deterministic=not args.sample, seed=args.seed or 0, cfg=cfg)
    for length, rate in table.items():
        print(f"length {length:>5}: success {rate:.3f}")
    if args.out:
        Path(args.out).write_text(json.dumps({str(k): v for k, v in table.items()}, indent=2))
    return 0


def _format_step(rec: dict) -> str:
    nodes = " ".join(f"{k}={v}" for k, v in rec["nodes"].items())
    line = f"{rec['step']:>5}  {rec['action']:<30} mem={rec['memory_size']:<4} {nodes}"
    if "submitted" in rec:
        mark = "ok" if rec["matched"] else "WRONG"
        line += f"  submit {rec['submitted']} (want {rec['expected']}, {mark})"
    return line


def cmd_trace(args) -> int:
    cfg = _load(args) if args.config else None
    records = runner.run_trace(args.checkpoint, args.length, args.seed or 0, cfg,
                               prefix=args.prefix)
    if args.json:
        for rec in records:
            print(json.dumps(rec))
        return 0
    *steps, footer = records
    for rec in steps:
        print(_format_step(rec))
    print(f"prefix {footer['prefix']}  target {footer['target']}  "
          f"submitted {footer['submissions']}  success {footer['success']}  "
          f"steps {footer['steps']}/{footer['step_budget']}")
    return 0


def cmd_gen_dyck(args) -> int:
    dy = DyckConfig(args.types, args.close_probability)
    rng = np.random.default_rng(args.seed or 0)
    out = open(args.out, "w") if args.out else sys.stdout
    try:
        for length in args.lengths:
            for _ in range(args.count):
                prefix = generate_prefix(dy, length, rng)
                out.write(f"{dy.render(prefix)}\t{dy.render(required_completion(dy, prefix))}\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_pretrain(args) -> int:
    cfg = _load(args)
    out = Path(args.out or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cu, pu = runner.build_networks(cfg)
    noisy, summary = runner.pretrain_phase(cfg, cu, traces_path=out / "traces.jsonl")
    (out / "pretrain.json").write_text(json.dumps(summary, indent=2))
    runner.save_checkpoint(out / "checkpoint", cfg, noisy, pu)
    print(f"{summary['trace_pairs']} trace pairs, held-out agreement "
          f"{summary['heldout_agreement']:.3f}; greedy success at length "
          f"{summary['probe_length']}: {summary['greedy_success_before_noise']:.2f} before noise, "
          f"{summary['greedy_success_after_noise']:.2f} after")
    print(f"output in {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dyckin", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", help="bundled config name or YAML path")
            p.add_argument("--set", action="append", metavar="KEY=VALUE",
                           help="override a config field, e.g. train.max_episodes=1000")
        p.add_argument("--seed", type=int)
        p.add_argument("--out")

    p = sub.add_parser("train", help="run the curriculum training loop")
    common(p)
    p.add_argument("--episodes", type=int, help="episode budget")
    p.add_argument("--progress", type=int, default=0, metavar="N",
                   help="log progress every N episodes")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="train several seeds in parallel processes")
    common(p)
    p.add_argument("--seeds", type=_int_list, default=[0, 1, 2])
    p.add_argument("--episodes", type=int)
    p.add_argument("--jobs", type=int, default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("eval", help="frozen-parameter success rates")
    common(p)
    p.add_argument("--checkpoint", required=True, help="checkpoint directory or 'oracle'")
    p.add_argument("--lengths", type=_int_list, default=[10, 100, 1000])
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--sample", action="store_true", help="use the config's exploration")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("trace", help="step-by-step dump of one episode")
    common(p)
    p.add_argument("--checkpoint", required=True, help="checkpoint directory or 'oracle'")
    p.add_argument("--length", type=int, default=10)
    p.add_argument("--prefix", help="explicit input prefix, e.g. '(([' ")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("gen-dyck", help="emit prefix<TAB>completion lines")
    common(p, config=False)
    p.add_argument("--types", type=int, default=2)
    p.add_argument("--close-probability", type=float, default=0.5)
    p.add_argument("--lengths", type=_int_list, default=[10])
    p.add_argument("--count", type=int, default=10, help="words per length")
    p.set_defaults(func=cmd_gen_dyck)

    p = sub.add_parser("pretrain", help="oracle traces and CU pre-training only")
    common(p)
    p.set_defaults(func=cmd_pretrain)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose or getattr(args, "progress", 0) else logging.WARNING,
                        format="%(asctime)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError, KeyError, OSError) as e:
        print(f"dyckin: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
