"""Pure numpy implementation of the dense-network kernels.

Parameters live in one flat float64 vector. For every layer the weight matrix
(out x in, row-major) comes first, followed by the bias vector. Hidden layers
use tanh, the output layer is linear.
"""
import numpy as np


def _unpack(params, sizes):
    layers = []
    off = 0
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        w = params[off:off + n_in * n_out].reshape(n_out, n_in)
        off += n_in * n_out
        b = params[off:off + n_out]
        off += n_out
        layers.append((w, b))
    return layers


def _forward_cache(params, sizes, x):
    layers = _unpack(params, sizes)
    acts = [x]
    h = x
    last = len(layers) - 1
    for i, (w, b) in enumerate(layers):
        h = w @ h + b
        if i != last:
            h = np.tanh(h)
        acts.append(h)
    return layers, acts


def _backward(layers, acts, dout):
    grads = []
    delta = dout
    for i in range(len(layers) - 1, -1, -1):
        w, _ = layers[i]
        grads.append(delta)
        grads.append(np.outer(delta, acts[i]).ravel())
        if i > 0:
            delta = (w.T @ delta) * (1.0 - acts[i] ** 2)
    grads.reverse()
    return np.concatenate(grads)


def forward(params, sizes, x):
    return _forward_cache(params, sizes, x)[1][-1].copy()


def mse_grad(params, sizes, x, target):
    layers, acts = _forward_cache(params, sizes, x)
    diff = acts[-1] - target
    loss = float(diff @ diff) / diff.shape[0]
    return loss, _backward(layers, acts, 2.0 * diff / diff.shape[0])


def _log_softmax(z):
    m = z.max()
    s = z - m
    return s - np.log(np.exp(s).sum())


def logprob_grad(params, sizes, x, action):
    layers, acts = _forward_cache(params, sizes, x)
    logp = _log_softmax(acts[-1])
    dout = -np.exp(logp)
    dout[action] += 1.0
    return float(logp[action]), _backward(layers, acts, dout)


def _apply(params, step, lr, clip):
    norm = float(np.sqrt(step @ step))
    if clip > 0.0 and norm > clip:
        step = step * (clip / norm)
    params += lr * step
    return norm


def sgd_mse(params, sizes, x, target, lr, clip):
    loss, g = mse_grad(params, sizes, x, target)
    if loss > 0.0:
        _apply(params, -g, lr, clip)
    return loss


def sgd_logprob_batch(params, sizes, xs, actions, weights, lr, clip):
    total = 0.0
    for i in range(xs.shape[0]):
        w = weights[i]
        if w == 0.0:
            continue
        _, g = logprob_grad(params, sizes, xs[i], int(actions[i]))
        total += _apply(params, w * g, lr, clip)
    return total / xs.shape[0] if xs.shape[0] else 0.0


def argmax_forward(params, sizes, x):
    return int(np.argmax(forward(params, sizes, x)))
