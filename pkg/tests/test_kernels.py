"""The compiled kernels and the numpy fallback must agree."""
import numpy as np
import pytest

from dyckin import kernels
from dyckin.kernels import _slow

try:
    from dyckin.kernels import _fast
except ImportError:
    _fast = None

needs_fast = pytest.mark.skipif(_fast is None, reason="compiled extension not built")

SIZES = np.array([7, 9, 5], dtype=np.int32)


def _params(seed):
    n = 7 * 9 + 9 + 9 * 5 + 5
    return np.random.default_rng(seed).uniform(-0.5, 0.5, n)


def test_backend_is_reported():
    assert kernels.BACKEND in ("cython", "python")


@needs_fast
def test_forward_and_argmax_agree(rng):
    for seed in range(10):
        p, x = _params(seed), rng.normal(size=7)
        assert np.allclose(_fast.forward(p, SIZES, x), _slow.forward(p, SIZES, x), atol=1e-13)
        assert _fast.argmax_forward(p, SIZES, x) == _slow.argmax_forward(p, SIZES, x)


@needs_fast
def test_gradients_agree(rng):
    for seed in range(10):
        p, x, t = _params(seed), rng.normal(size=7), rng.normal(size=5)
        lf, gf = _fast.mse_grad(p, SIZES, x, t)
        ls, gs = _slow.mse_grad(p, SIZES, x, t)
        assert lf == pytest.approx(ls, rel=1e-12)
        assert np.allclose(gf, gs, atol=1e-13)
        a = seed % 5
        lf, gf = _fast.logprob_grad(p, SIZES, x, a)
        ls, gs = _slow.logprob_grad(p, SIZES, x, a)
        assert lf == pytest.approx(ls, rel=1e-12)
        assert np.allclose(gf, gs, atol=1e-13)


@needs_fast
@pytest.mark.parametrize("clip", [0.0, 0.05, 5.0])
def test_updates_agree(rng, clip):
    pf, ps = _params(1), _params(1)
    xs = rng.normal(size=(16, 7))
    acts = rng.integers(5, size=16).astype(np.int64)
    w = rng.normal(size=16)
    w[3] = 0.0
    nf = _fast.sgd_logprob_batch(pf, SIZES, xs, acts, w, 0.1, clip)
    ns = _slow.sgd_logprob_batch(ps, SIZES, xs, acts, w, 0.1, clip)
    assert nf == pytest.approx(ns, rel=1e-10)
    assert np.allclose(pf, ps, atol=1e-12)
    for x in xs[:4]:
        t = rng.normal(size=5)
        assert _fast.sgd_mse(pf, SIZES, x, t, 0.1, clip) == pytest.approx(
            _slow.sgd_mse(ps, SIZES, x, t, 0.1, clip), rel=1e-10)
    assert np.allclose(pf, ps, atol=1e-12)


@needs_fast
def test_read_only_inputs_accepted():
    p, x = _params(0), np.ones(7)
    x.setflags(write=False)
    assert _fast.forward(p, SIZES, x).shape == (5,)
