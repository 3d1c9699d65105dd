# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled dense-network kernels; same contract as ``_slow``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport tanh, exp, log, sqrt
from libc.stdlib cimport malloc, free

cnp.import_array()


cdef struct Net:
    int n_layers
    int* sizes
    int* offsets       # start of each layer's activations in acts
    int n_acts
    int max_width


cdef int _setup(Net* net, const int[::1] sizes) except -1:
    cdef int i
    net.n_layers = sizes.shape[0] - 1
    net.sizes = <int*> &sizes[0]
    net.offsets = <int*> malloc((net.n_layers + 1) * sizeof(int))
    if net.offsets == NULL:
        raise MemoryError()
    net.n_acts = 0
    net.max_width = 0
    for i in range(net.n_layers + 1):
        net.offsets[i] = net.n_acts
        net.n_acts += sizes[i]
        if sizes[i] > net.max_width:
            net.max_width = sizes[i]
    return 0


cdef void _forward(Net* net, const double* p, const double* x, double* acts) noexcept nogil:
    cdef int layer, j, k, n_in, n_out, off = 0
    cdef const double* w
    cdef const double* b
    cdef double* src
    cdef double* dst
    cdef double s
    for j in range(net.sizes[0]):
        acts[j] = x[j]
    for layer in range(net.n_layers):
        n_in = net.sizes[layer]
        n_out = net.sizes[layer + 1]
        w = p + off
        b = p + off + n_in * n_out
        off += n_in * n_out + n_out
        src = acts + net.offsets[layer]
        dst = acts + net.offsets[layer + 1]
        for j in range(n_out):
            s = b[j]
            for k in range(n_in):
                s += w[j * n_in + k] * src[k]
            if layer != net.n_layers - 1:
                s = tanh(s)
            dst[j] = s


cdef void _backward(Net* net, const double* p, const double* acts, double* delta,
                    double* scratch, double* grad) noexcept nogil:
    # delta holds dL/d(output) on entry; overwritten
    cdef int layer, j, k, n_in, n_out, off
    cdef const double* w
    cdef const double* a_in
    cdef double s, d
    cdef double* tmp
    off = 0
    for layer in range(net.n_layers):
        off += net.sizes[layer] * net.sizes[layer + 1] + net.sizes[layer + 1]
    for layer in range(net.n_layers - 1, -1, -1):
        n_in = net.sizes[layer]
        n_out = net.sizes[layer + 1]
        off -= n_in * n_out + n_out
        w = p + off
        a_in = acts + net.offsets[layer]
        for j in range(n_out):
            d = delta[j]
            grad[off + n_in * n_out + j] = d
            for k in range(n_in):
                grad[off + j * n_in + k] = d * a_in[k]
        if layer > 0:
            for k in range(n_in):
                s = 0.0
                for j in range(n_out):
                    s += w[j * n_in + k] * delta[j]
                scratch[k] = s * (1.0 - a_in[k] * a_in[k])
            tmp = delta
            delta = scratch
            scratch = tmp


cdef double _log_softmax_at(const double* z, int n, int action, double* probs) noexcept nogil:
    cdef int j
    cdef double m = z[0], s = 0.0
    for j in range(1, n):
        if z[j] > m:
            m = z[j]
    for j in range(n):
        probs[j] = exp(z[j] - m)
        s += probs[j]
    for j in range(n):
        probs[j] /= s
    return z[action] - m - log(s)


cdef double _apply(double* p, const double* g, Py_ssize_t n, double scale, double lr, double clip) noexcept nogil:
    cdef Py_ssize_t i
    cdef double norm = 0.0, f
    for i in range(n):
        norm += g[i] * g[i]
    norm = sqrt(norm) * (scale if scale >= 0 else -scale)
    f = lr * scale
    if clip > 0.0 and norm > clip:
        f *= clip / norm
    for i in range(n):
        p[i] += f * g[i]
    return norm


def forward(double[::1] params, const int[::1] sizes, const double[::1] x):
    cdef Net net
    _setup(&net, sizes)
    cdef double* acts = <double*> malloc(net.n_acts * sizeof(double))
    out = np.empty(sizes[sizes.shape[0] - 1])
    cdef double[::1] o = out
    cdef int j
    _forward(&net, &params[0], &x[0], acts)
    for j in range(o.shape[0]):
        o[j] = acts[net.offsets[net.n_layers] + j]
    free(acts)
    free(net.offsets)
    return out


def argmax_forward(double[::1] params, const int[::1] sizes, const double[::1] x):
    cdef Net net
    _setup(&net, sizes)
    cdef double* acts = <double*> malloc(net.n_acts * sizeof(double))
    cdef int j, best = 0, n = sizes[sizes.shape[0] - 1]
    cdef double* z
    _forward(&net, &params[0], &x[0], acts)
    z = acts + net.offsets[net.n_layers]
    for j in range(1, n):
        if z[j] > z[best]:
            best = j
    free(acts)
    free(net.offsets)
    return best


def mse_grad(double[::1] params, const int[::1] sizes, const double[::1] x, const double[::1] target):
    cdef Net net
    _setup(&net, sizes)
    cdef int j, n = sizes[sizes.shape[0] - 1]
    cdef double* acts = <double*> malloc(net.n_acts * sizeof(double))
    cdef double* delta = <double*> malloc(net.max_width * sizeof(double))
    cdef double* scratch = <double*> malloc(net.max_width * sizeof(double))
    grad = np.empty(params.shape[0])
    cdef double[::1] g = grad
    cdef double loss = 0.0, diff
    _forward(&net, &params[0], &x[0], acts)
    for j in range(n):
        diff = acts[net.offsets[net.n_layers] + j] - target[j]
        loss += diff * diff
        delta[j] = 2.0 * diff / n
    _backward(&net, &params[0], acts, delta, scratch, &g[0])
    free(acts); free(delta); free(scratch); free(net.offsets)
    return loss / n, grad


def logprob_grad(double[::1] params, const int[::1] sizes, const double[::1] x, int action):
    cdef Net net
    _setup(&net, sizes)
    cdef int j, n = sizes[sizes.shape[0] - 1]
    cdef double* acts = <double*> malloc(net.n_acts * sizeof(double))
    cdef double* delta = <double*> malloc(net.max_width * sizeof(double))
    cdef double* scratch = <double*> malloc(net.max_width * sizeof(double))
    grad = np.empty(params.shape[0])
    cdef double[::1] g = grad
    cdef double logp
    _forward(&net, &params[0], &x[0], acts)
    logp = _log_softmax_at(acts + net.offsets[net.n_layers], n, action, delta)
    for j in range(n):
        delta[j] = -delta[j]
    delta[action] += 1.0
    _backward(&net, &params[0], acts, delta, scratch, &g[0])
    free(acts); free(delta); free(scratch); free(net.offsets)
    return logp, grad


def sgd_mse(double[::1] params, const int[::1] sizes, const double[::1] x, const double[::1] target,
            double lr, double clip):
    cdef Net net
    _setup(&net, sizes)
    cdef int j, n = sizes[sizes.shape[0] - 1]
    cdef Py_ssize_t n_params = params.shape[0]
    cdef double* acts = <double*> malloc(net.n_acts * sizeof(double))
    cdef double* delta = <double*> malloc(net.max_width * sizeof(double))
    cdef double* scratch = <double*> malloc(net.max_width * sizeof(double))
    cdef double* g = <double*> malloc(n_params * sizeof(double))
    cdef double loss = 0.0, diff
    _forward(&net, &params[0], &x[0], acts)
    for j in range(n):
        diff = acts[net.offsets[net.n_layers] + j] - target[j]
        loss += diff * diff
        delta[j] = 2.0 * diff / n
    loss /= n
    if loss > 0.0:
        _backward(&net, &params[0], acts, delta, scratch, g)
        _apply(&params[0], g, n_params, -1.0, lr, clip)
    free(acts); free(delta); free(scratch); free(g); free(net.offsets)
    return loss


def sgd_logprob_batch(double[::1] params, const int[::1] sizes, const double[:, ::1] xs,
                      const long[::1] actions, const double[::1] weights, double lr, double clip):
    cdef Net net
    _setup(&net, sizes)
    cdef int j, a, n = sizes[sizes.shape[0] - 1]
    cdef Py_ssize_t i, n_params = params.shape[0], batch = xs.shape[0]
    cdef double* acts = <double*> malloc(net.n_acts * sizeof(double))
    cdef double* delta = <double*> malloc(net.max_width * sizeof(double))
    cdef double* scratch = <double*> malloc(net.max_width * sizeof(double))
    cdef double* g = <double*> malloc(n_params * sizeof(double))
    cdef double total = 0.0, wt
    for i in range(batch):
        wt = weights[i]
        if wt == 0.0:
            continue
        a = <int> actions[i]
        _forward(&net, &params[0], &xs[i, 0], acts)
        _log_softmax_at(acts + net.offsets[net.n_layers], n, a, delta)
        for j in range(n):
            delta[j] = -delta[j]
        delta[a] += 1.0
        _backward(&net, &params[0], acts, delta, scratch, g)
        total += _apply(&params[0], g, n_params, wt, lr, clip)
    free(acts); free(delta); free(scratch); free(g); free(net.offsets)
    return total / batch if batch else 0.0
