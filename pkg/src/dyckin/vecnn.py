"""Tiny dense networks with analytic gradients.

Two heads share one representation: a regression head (the Processing Unit,
trained with mean squared error) and a softmax policy head (the Control Unit,
trained with REINFORCE). Parameters are a single flat float64 vector; see
``dyckin.kernels`` for the memory layout.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels

REGRESSION = "regression"
POLICY = "policy"
_HEAD_CODES = {REGRESSION: 0, POLICY: 1}

CHECKPOINT_MAGIC = b"DYIN"
CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class SgdConfig:
    learning_rate: float = 0.01
    clip: float | None = 5.0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.clip is not None and not self.clip > 0:
            raise ValueError(f"clip must be > 0 or None, got {self.clip}")

    @property
    def _clip(self) -> float:
        return 0.0 if self.clip is None else float(self.clip)


@dataclass
class Mlp:
    layer_sizes: tuple[int, ...]
    params: np.ndarray
    head: str = REGRESSION
    seed: int = 0
    _sizes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self.layer_sizes = tuple(int(s) for s in self.layer_sizes)
        self._sizes = np.asarray(self.layer_sizes, dtype=np.int32)
        self.params = np.ascontiguousarray(self.params, dtype=np.float64)
        if self.params.shape != (param_count(self.layer_sizes),):
            raise ValueError("parameter vector does not match layer sizes")
        if self.head not in _HEAD_CODES:
            raise ValueError(f"unknown head {self.head!r}")

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_outputs(self) -> int:
        return self.layer_sizes[-1]

    def layers(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """(weight, bias) views per layer; weights are (out, in)."""
        out = []
        off = 0
        for n_in, n_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            w = self.params[off:off + n_in * n_out].reshape(n_out, n_in)
            off += n_in * n_out
            out.append((w, self.params[off:off + n_out]))
            off += n_out
        return out

    def copy(self) -> "Mlp":
        return Mlp(self.layer_sizes, self.params.copy(), self.head, self.seed)


def param_count(layer_sizes) -> int:
    return sum(a * b + b for a, b in zip(layer_sizes[:-1], layer_sizes[1:]))


def mlp_init(layer_sizes, seed: int, head: str = REGRESSION) -> Mlp:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases."""
    layer_sizes = [int(s) for s in layer_sizes]
    if not layer_sizes:
        raise ValueError("layer_sizes must not be empty")
    if any(s < 1 for s in layer_sizes):
        raise ValueError(f"layer sizes must be >= 1, got {layer_sizes}")
    rng = np.random.default_rng(seed)
    chunks = []
    for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        bound = 1.0 / np.sqrt(n_in)
        chunks.append(rng.uniform(-bound, bound, n_in * n_out))
        chunks.append(rng.uniform(-bound, bound, n_out))
    params = np.concatenate(chunks) if chunks else np.zeros(0)
    return Mlp(tuple(layer_sizes), params, head, seed)


def _check_input(m: Mlp, x) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.shape != (m.n_inputs,):
        raise ValueError(f"expected input of length {m.n_inputs}, got shape {x.shape}")
    return x


def mlp_forward(m: Mlp, x) -> np.ndarray:
    x = _check_input(m, x)
    if len(m.layer_sizes) == 1:
        return x.copy()
    return kernels.forward(m.params, m._sizes, x)


def mlp_forward_batch(m: Mlp, xs) -> np.ndarray:
    """Row-wise forward pass over a (batch, n_inputs) array."""
    h = np.asarray(xs, dtype=np.float64)
    if h.ndim != 2 or h.shape[1] != m.n_inputs:
        raise ValueError(f"expected a (batch, {m.n_inputs}) array, got shape {h.shape}")
    layers = m.layers()
    for i, (w, b) in enumerate(layers):
        h = h @ w.T + b
        if i != len(layers) - 1:
            h = np.tanh(h)
    return h


def train_mse_step(m: Mlp, x, target, cfg: SgdConfig) -> float:
    """One SGD step on mean squared error. Returns the loss before the step."""
    x = _check_input(m, x)
    target = np.ascontiguousarray(target, dtype=np.float64)
    if target.shape != (m.n_outputs,):
        raise ValueError(f"expected target of length {m.n_outputs}, got shape {target.shape}")
    if not (np.isfinite(x).all() and np.isfinite(target).all()):
        raise ValueError("non-finite input or target")
    return kernels.sgd_mse(m.params, m._sizes, x, target, cfg.learning_rate, cfg._clip)


def softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max())
    return e / e.sum()


def policy_distribution(m: Mlp, features) -> np.ndarray:
    return softmax(mlp_forward(m, features))


def reinforce_step(m: Mlp, features, action: int, weight: float, cfg: SgdConfig) -> float:
    """Ascend ``weight * log pi(action | features)``; returns the step's gradient norm."""
    x = _check_input(m, features)
    if not 0 <= action < m.n_outputs:
        raise ValueError(f"action {action} out of range [0, {m.n_outputs})")
    return kernels.sgd_logprob_batch(
        m.params, m._sizes, x[None, :], np.array([action], dtype=np.int64),
        np.array([weight], dtype=np.float64), cfg.learning_rate, cfg._clip,
    )


def reinforce_batch(m: Mlp, xs, actions, weights, cfg: SgdConfig) -> float:
    """Sequential reinforce steps over a batch; returns the mean gradient norm."""
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    if xs.ndim != 2 or xs.shape[1] != m.n_inputs:
        raise ValueError(f"expected a (batch, {m.n_inputs}) array, got shape {xs.shape}")
    actions = np.ascontiguousarray(actions, dtype=np.int64)
    if actions.size and (actions.min() < 0 or actions.max() >= m.n_outputs):
        raise ValueError("action out of range")
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    return kernels.sgd_logprob_batch(m.params, m._sizes, xs, actions, weights,
                                     cfg.learning_rate, cfg._clip)


def log_prob_and_grad(m: Mlp, features, action: int) -> tuple[float, np.ndarray]:
    return kernels.logprob_grad(m.params, m._sizes, _check_input(m, features), int(action))


def mse_and_grad(m: Mlp, x, target) -> tuple[float, np.ndarray]:
    return kernels.mse_grad(m.params, m._sizes, _check_input(m, x),
                            np.ascontiguousarray(target, dtype=np.float64))


def perturb_parameters(m: Mlp, sigma: float, seed: int) -> Mlp:
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    out = m.copy()
    if sigma > 0:
        out.params += np.random.default_rng(seed).normal(0.0, sigma, out.params.shape)
    return out


# Checkpoint layout, all little-endian:
#   4s magic "DYIN" | u16 version | u8 head (0 regression, 1 policy) | u8 pad
#   i64 seed | u32 n_sizes | n_sizes * u32 layer size | u64 n_params
#   n_params * f64 parameters
def dumps(m: Mlp) -> bytes:
    header = struct.pack("<4sHBxqI", CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
                         _HEAD_CODES[m.head], int(m.seed), len(m.layer_sizes))
    header += struct.pack(f"<{len(m.layer_sizes)}I", *m.layer_sizes)
    header += struct.pack("<Q", m.params.size)
    return header + m.params.astype("<f8").tobytes()


def loads(data: bytes) -> Mlp:
    fixed = struct.calcsize("<4sHBxqI")
    if len(data) < fixed:
        raise CheckpointError("truncated checkpoint header")
    magic, version, head_code, seed, n_sizes = struct.unpack_from("<4sHBxqI", data)
    if magic != CHECKPOINT_MAGIC or version != CHECKPOINT_VERSION:
        raise CheckpointError("not a dyckin network checkpoint")
    heads = {v: k for k, v in _HEAD_CODES.items()}
    if head_code not in heads:
        raise CheckpointError(f"unknown head code {head_code}")
    off = fixed
    sizes = struct.unpack_from(f"<{n_sizes}I", data, off)
    off += 4 * n_sizes
    (n_params,) = struct.unpack_from("<Q", data, off)
    off += 8
    if n_params != param_count(sizes) or len(data) != off + 8 * n_params:
        raise CheckpointError("checkpoint size does not match its header")
    params = np.frombuffer(data, dtype="<f8", count=n_params, offset=off).astype(np.float64)
    return Mlp(sizes, params, heads[head_code], seed)


def save(m: Mlp, path) -> None:
    Path(path).write_bytes(dumps(m))


def load(path) -> Mlp:
    return loads(Path(path).read_bytes())
