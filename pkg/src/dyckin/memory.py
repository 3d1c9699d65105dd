"""Hash-of-deques external memory with one active deque."""
from __future__ import annotations

from collections import deque

import numpy as np


class NoActiveMemory(RuntimeError):
    """Raised when a mutating operation runs before any hash was selected."""


def memory_key(selector) -> bytes:
    v = np.round(np.asarray(selector, dtype=np.float64), 6) + 0.0  # folds -0.0 into 0.0
    return v.tobytes()


class HashDequeMemory:
    """Map from quantized selector vectors to deques of vectors.

    Selecting an unused key switches to a fresh empty deque; earlier deques
    are kept and come back when their key is selected again. Peeks and pops
    on an empty deque return the all-zeros sentinel.
    """

    def __init__(self, dim: int):
        self.dim = dim
        self.store: dict[bytes, deque] = {}
        self.active_key: bytes | None = None
        self._active: deque | None = None
        self.empty = np.zeros(dim)
        self.empty.setflags(write=False)

    def select_hash(self, selector) -> None:
        selector = np.asarray(selector, dtype=np.float64)
        if selector.shape != (self.dim,):
            raise ValueError(f"selector must have length {self.dim}, got shape {selector.shape}")
        key = memory_key(selector)
        if self._active is not None and not self._active and key != self.active_key:
            # an empty deque holds no data; re-selecting it recreates it
            del self.store[self.active_key]
        self._active = self.store.setdefault(key, deque())
        self.active_key = key

    def _require_active(self) -> deque:
        if self._active is None:
            raise NoActiveMemory("no hash selected")
        return self._active

    def _check(self, v) -> np.ndarray:
        v = np.array(v, dtype=np.float64)
        if v.shape != (self.dim,):
            raise ValueError(f"value must have length {self.dim}, got shape {v.shape}")
        return v

    def append_left(self, v) -> None:
        self._require_active().appendleft(self._check(v))

    def append_right(self, v) -> None:
        self._require_active().append(self._check(v))

    def pop_left(self) -> np.ndarray:
        d = self._require_active()
        return d.popleft() if d else self.empty

    def pop_right(self) -> np.ndarray:
        d = self._require_active()
        return d.pop() if d else self.empty

    def peek_left(self) -> np.ndarray:
        return self._active[0] if self._active else self.empty

    def peek_right(self) -> np.ndarray:
        return self._active[-1] if self._active else self.empty

    def active_size(self) -> int:
        return len(self._active) if self._active is not None else 0

    def __len__(self) -> int:
        return len(self.store)

    def dump(self, codebook=None) -> str:
        """One line per key: length plus the decoded (or raw) end elements."""
        def show(v):
            if codebook is not None:
                sym = codebook.decode_strict(v)
                if sym is not None:
                    return codebook.cfg.render([sym])
            return "[" + " ".join(f"{x:.3f}" for x in v) + "]"

        lines = []
        for key, d in self.store.items():
            mark = "*" if key == self.active_key else " "
            sel = np.frombuffer(key, dtype=np.float64)
            head = f"{mark} key={sel[:3].round(3).tolist()}... len={len(d)}"
            if d:
                head += f" left={show(d[0])} right={show(d[-1])}"
            lines.append(head)
        return "\n".join(lines)
