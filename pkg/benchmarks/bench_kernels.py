"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Both backends are imported directly, so the compiled extension must be
built (``pip install -e . --no-build-isolation``).
"""
import argparse
import timeit

import numpy as np

from dyckin.kernels import _slow

try:
    from dyckin.kernels import _fast
except ImportError:
    _fast = None

from dyckin.network import N_ACTIONS, observation_size
from dyckin.vecnn import mlp_init


def cases(rng):
    cu = mlp_init([observation_size(8), 64, N_ACTIONS], seed=1, head="policy")
    pu = mlp_init([8, 32, 8], seed=2, head="regression")
    x = rng.uniform(-1, 1, cu.n_inputs)
    xs = rng.uniform(-1, 1, (64, cu.n_inputs))
    acts = rng.integers(N_ACTIONS, size=64).astype(np.int64)
    w = rng.normal(size=64)
    px, pt = rng.uniform(-1, 1, 8), rng.uniform(-1, 1, 8)
    return {
        "argmax_forward (CU step)":
            lambda k: k.argmax_forward(cu.params, cu._sizes, x),
        "sgd_mse (PU submission)":
            lambda k: k.sgd_mse(pu.params.copy(), pu._sizes, px, pt, 0.01, 5.0),
        "sgd_logprob_batch (64 samples)":
            lambda k: k.sgd_logprob_batch(cu.params.copy(), cu._sizes, xs, acts, w, 0.01, 5.0),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=2000)
    args = ap.parse_args()
    if _fast is None:
        raise SystemExit("compiled extension not built; nothing to compare")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<32} {'numpy us':>10} {'cython us':>10} {'speedup':>8}")
    for name, fn in cases(rng).items():
        slow = min(timeit.repeat(lambda: fn(_slow), number=args.repeat, repeat=3)) / args.repeat
        fast = min(timeit.repeat(lambda: fn(_fast), number=args.repeat, repeat=3)) / args.repeat
        print(f"{name:<32} {slow * 1e6:>10.2f} {fast * 1e6:>10.2f} {slow / fast:>7.1f}x")


if __name__ == "__main__":
    main()
