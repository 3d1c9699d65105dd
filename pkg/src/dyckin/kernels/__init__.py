"""Dense-network kernels.

The compiled extension ``_fast`` is used when it was built; otherwise the
numpy implementation in ``_slow`` takes over. Set ``DYCKIN_BACKEND=python`` to
force the fallback.
"""
import os

from . import _slow

BACKEND = "python"
if os.environ.get("DYCKIN_BACKEND", "").lower() != "python":
    try:
        from . import _fast as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _slow
else:
    _impl = _slow

forward = _impl.forward
argmax_forward = _impl.argmax_forward
mse_grad = _impl.mse_grad
logprob_grad = _impl.logprob_grad
sgd_mse = _impl.sgd_mse
sgd_logprob_batch = _impl.sgd_logprob_batch

__all__ = [
    "BACKEND", "forward", "argmax_forward", "mse_grad", "logprob_grad",
    "sgd_mse", "sgd_logprob_batch",
]
