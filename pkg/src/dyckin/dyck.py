"""Generalized Dyck language D_n: prefixes, completions and symbol codes.

Symbols are plain ints. With ``n`` bracket types, opener ``i`` is ``i``,
its closer is ``n + i`` and the terminator is ``2 * n``. The same ordering is
used for codebook rows, so decode ties resolve to the lowest ordinal.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

OPEN_CHARS = "([{" + "abcdefghijklmnopqrstuvw"
CLOSE_CHARS = ")]}" + "ABCDEFGHIJKLMNOPQRSTUVW"
TERMINATOR_CHAR = "$"
MAX_TYPES = 26

OPEN, CLOSE, TERMINATOR = "open", "close", "terminator"


@dataclass(frozen=True)
class DyckConfig:
    num_bracket_types: int = 2
    close_probability: float = 0.5

    def __post_init__(self):
        if not 1 <= self.num_bracket_types <= MAX_TYPES:
            raise ValueError(f"num_bracket_types must be in [1, {MAX_TYPES}], "
                             f"got {self.num_bracket_types}")
        if not 0.0 <= self.close_probability <= 1.0:
            raise ValueError(f"close_probability must be in [0, 1], got {self.close_probability}")

    @property
    def n(self) -> int:
        return self.num_bracket_types

    @property
    def terminator(self) -> int:
        return 2 * self.num_bracket_types

    @property
    def num_symbols(self) -> int:
        return 2 * self.num_bracket_types + 1

    def opener(self, i: int) -> int:
        return i

    def closer(self, i: int) -> int:
        return self.num_bracket_types + i

    def kind(self, sym: int) -> str:
        if sym == self.terminator:
            return TERMINATOR
        if 0 <= sym < self.num_bracket_types:
            return OPEN
        if self.num_bracket_types <= sym < self.terminator:
            return CLOSE
        raise ValueError(f"symbol {sym} outside alphabet of D_{self.num_bracket_types}")

    def type_index(self, sym: int) -> int | None:
        k = self.kind(sym)
        if k == TERMINATOR:
            return None
        return sym if k == OPEN else sym - self.num_bracket_types

    def render(self, seq) -> str:
        n = self.num_bracket_types
        out = []
        for s in seq:
            k = self.kind(s)
            out.append(TERMINATOR_CHAR if k == TERMINATOR
                       else OPEN_CHARS[s] if k == OPEN else CLOSE_CHARS[s - n])
        return "".join(out)

    def parse(self, text: str) -> list[int]:
        n = self.num_bracket_types
        out = []
        for ch in text:
            if ch == TERMINATOR_CHAR:
                out.append(self.terminator)
            elif ch in OPEN_CHARS[:n]:
                out.append(OPEN_CHARS.index(ch))
            elif ch in CLOSE_CHARS[:n]:
                out.append(n + CLOSE_CHARS.index(ch))
            else:
                raise ValueError(f"character {ch!r} not in the alphabet of D_{n}")
        return out


def generate_prefix(cfg: DyckConfig, length: int, rng) -> list[int]:
    """Random valid prefix of exactly ``length`` symbols.

    Each step closes the innermost open bracket with ``close_probability``
    when one exists, otherwise opens a bracket of uniformly random type.
    ``rng`` needs ``random()`` and ``integers(n)`` (a numpy Generator works).
    """
    if length < 0:
        raise ValueError(f"length must be >= 0, got {length}")
    n = cfg.num_bracket_types
    stack = []
    out = []
    for _ in range(length):
        if stack and rng.random() < cfg.close_probability:
            out.append(n + stack.pop())
        else:
            t = int(rng.integers(n))
            stack.append(t)
            out.append(t)
    return out


def _stack_scan(cfg: DyckConfig, seq):
    """Open-bracket stack after ``seq``, or None on a mismatched close."""
    n = cfg.num_bracket_types
    stack = []
    for s in seq:
        k = cfg.kind(s)
        if k == TERMINATOR:
            raise ValueError("terminator inside a bracket sequence")
        if k == OPEN:
            stack.append(s)
        elif not stack or stack.pop() != s - n:
            return None
    return stack


def is_valid_prefix(cfg: DyckConfig, seq) -> bool:
    return _stack_scan(cfg, seq) is not None


def is_balanced(cfg: DyckConfig, seq) -> bool:
    stack = _stack_scan(cfg, seq)
    return stack is not None and not stack


def required_completion(cfg: DyckConfig, prefix) -> list[int]:
    """Shortest completion of ``prefix`` followed by the terminator."""
    stack = _stack_scan(cfg, prefix)
    if stack is None:
        raise ValueError(f"not a valid Dyck prefix: {cfg.render(prefix)!r}")
    return [cfg.closer(t) for t in reversed(stack)] + [cfg.terminator]


class SymbolCodebook:
    """Random code vector per symbol with nearest-neighbour decoding.

    Codes are uniform on [-1, 1]^dim; a draw is rejected and redrawn while any
    two codes are closer than ``reject_below``.
    """

    def __init__(self, cfg: DyckConfig, dim: int = 8, seed: int = 0,
                 reject_below: float = 0.5, max_tries: int = 1000):
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        self.cfg = cfg
        self.dim = dim
        self.seed = seed
        rng = np.random.default_rng(seed)
        for _ in range(max_tries):
            codes = rng.uniform(-1.0, 1.0, (cfg.num_symbols, dim))
            if _min_pairwise(codes) >= reject_below:
                break
        else:
            raise RuntimeError(f"no codebook with min distance {reject_below} "
                               f"after {max_tries} draws")
        codes.setflags(write=False)
        self.codes = codes
        self.min_distance = _min_pairwise(codes)

    def encode(self, sym: int) -> np.ndarray:
        self.cfg.kind(sym)
        return self.codes[sym].copy()

    def distances(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.dim,):
            raise ValueError(f"expected a vector of length {self.dim}, got shape {v.shape}")
        return np.sqrt(((self.codes - v) ** 2).sum(axis=1))

    def decode(self, v) -> int:
        # argmin returns the first minimum, i.e. the lowest ordinal on ties
        return int(np.argmin(self.distances(v)))

    def decode_strict(self, v) -> int | None:
        """Decode only when ``v`` lies within half the minimum code distance."""
        d = self.distances(v)
        i = int(np.argmin(d))
        return i if d[i] < 0.5 * self.min_distance else None


def _min_pairwise(codes: np.ndarray) -> float:
    if len(codes) < 2:
        return float("inf")
    return min(float(np.linalg.norm(a - b)) for a, b in combinations(codes, 2))
