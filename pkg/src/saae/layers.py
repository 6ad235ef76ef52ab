"""Plain-numpy neural network primitives with explicit forward/backward passes.

Every layer is a pair of pure functions: ``*_forward(x, ...) -> (y, cache)``
and ``*_backward(dy, cache) -> gradients``. Nothing here owns state except the
Adam optimizer, which keeps its moment estimates keyed by parameter name.
All arrays are float64; convolutions act along the last axis of ``(N, C, L)``
tensors and the kernel never spans the sensor-channel axis (channels are
folded into the batch dimension by the callers in :mod:`saae.network`).
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

BN_EPS = 1e-5
BN_MOMENTUM = 0.9


# ---------------------------------------------------------------------------
# elementwise
# ---------------------------------------------------------------------------

def relu_forward(x):
    mask = x > 0
    return x * mask, mask


def relu_backward(dy, mask):
    return dy * mask


def sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(logits):
    """Row-wise probability-normalizing exponential map."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


# ---------------------------------------------------------------------------
# dense
# ---------------------------------------------------------------------------

def dense_forward(x, W, b):
    return x @ W + b, (x, W)


def dense_backward(dy, cache):
    x, W = cache
    dx = dy @ W.T
    dW = x.T @ dy
    db = dy.sum(axis=0)
    return dx, dW, db


# ---------------------------------------------------------------------------
# convolution along the last axis, stride 1, no padding
# ---------------------------------------------------------------------------

def conv1d_forward(x, W, b):
    """x: (N, Cin, L); W: (Cout, Cin, k); returns (N, Cout, L-k+1)."""
    k = W.shape[2]
    win = sliding_window_view(x, k, axis=2)  # (N, Cin, Lout, k)
    y = np.einsum("nclk,ock->nol", win, W, optimize=True) + b[None, :, None]
    return y, (x, W, win)


def conv1d_backward(dy, cache):
    x, W, win = cache
    k = W.shape[2]
    dW = np.einsum("nclk,nol->ock", win, dy, optimize=True)
    db = dy.sum(axis=(0, 2))
    dyp = np.pad(dy, ((0, 0), (0, 0), (k - 1, k - 1)))
    winp = sliding_window_view(dyp, k, axis=2)  # (N, Cout, L, k)
    dx = np.einsum("nolk,ock->ncl", winp, W[:, :, ::-1], optimize=True)
    return dx, dW, db


def tconv1d_forward(x, W, b):
    """Transposed counterpart: x: (N, Cin, L); W: (Cin, Cout, k); output length L+k-1."""
    k = W.shape[2]
    xp = np.pad(x, ((0, 0), (0, 0), (k - 1, k - 1)))
    win = sliding_window_view(xp, k, axis=2)  # (N, Cin, L+k-1, k)
    y = np.einsum("nclk,cok->nol", win, W[:, :, ::-1], optimize=True) + b[None, :, None]
    return y, (x, W)


def tconv1d_backward(dy, cache):
    x, W = cache
    k = W.shape[2]
    L = x.shape[2]
    win_dy = sliding_window_view(dy, k, axis=2)  # (N, Cout, L, k)
    dx = np.einsum("nolk,cok->ncl", win_dy, W, optimize=True)
    dyw = sliding_window_view(dy, L, axis=2)  # (N, Cout, k, L)
    dW = np.einsum("ncs,nojs->coj", x, dyw, optimize=True)
    db = dy.sum(axis=(0, 2))
    return dx, dW, db


# ---------------------------------------------------------------------------
# pooling / upsampling along the last axis
# ---------------------------------------------------------------------------

def maxpool2_forward(x):
    """Non-overlapping width-2 max pooling; requires an even last axis."""
    n, c, L = x.shape
    if L % 2:
        raise ValueError(f"maxpool2 needs an even length, got {L}")
    xr = x.reshape(n, c, L // 2, 2)
    idx = xr.argmax(axis=3)  # ties resolve to the earlier time step
    y = np.take_along_axis(xr, idx[..., None], axis=3)[..., 0]
    return y, (idx, x.shape)


def maxpool2_backward(dy, cache):
    idx, shape = cache
    n, c, L = shape
    dxr = np.zeros((n, c, L // 2, 2))
    np.put_along_axis(dxr, idx[..., None], dy[..., None], axis=3)
    return dxr.reshape(shape)


def upsample2_forward(x):
    return np.repeat(x, 2, axis=2), x.shape


def upsample2_backward(dy, shape):
    n, c, L = shape
    return dy.reshape(n, c, L, 2).sum(axis=3)


# ---------------------------------------------------------------------------
# batch normalization (per feature plane, statistics over batch and time)
# ---------------------------------------------------------------------------

def batchnorm_forward(x, gamma, beta, running_mean, running_var, train):
    """x: (N, C, L); gamma/beta/running stats: (C,).

    Training mode normalizes with the minibatch statistics and updates the
    running averages in place (momentum 0.9, biased variance). Evaluation
    mode uses the stored running averages.
    """
    if train:
        mu = x.mean(axis=(0, 2))
        var = x.var(axis=(0, 2))
        running_mean *= BN_MOMENTUM
        running_mean += (1.0 - BN_MOMENTUM) * mu
        running_var *= BN_MOMENTUM
        running_var += (1.0 - BN_MOMENTUM) * var
    else:
        mu = running_mean
        var = running_var
    inv = 1.0 / np.sqrt(var + BN_EPS)
    xhat = (x - mu[None, :, None]) * inv[None, :, None]
    y = gamma[None, :, None] * xhat + beta[None, :, None]
    return y, (xhat, inv, gamma, train)


def batchnorm_backward(dy, cache):
    xhat, inv, gamma, train = cache
    dgamma = (dy * xhat).sum(axis=(0, 2))
    dbeta = dy.sum(axis=(0, 2))
    dxhat = dy * gamma[None, :, None]
    if not train:
        dx = dxhat * inv[None, :, None]
        return dx, dgamma, dbeta
    n, _, L = dy.shape
    m = n * L
    s1 = dxhat.sum(axis=(0, 2), keepdims=True)
    s2 = (dxhat * xhat).sum(axis=(0, 2), keepdims=True)
    dx = (inv[None, :, None] / m) * (m * dxhat - s1 - xhat * s2)
    return dx, dgamma, dbeta


# ---------------------------------------------------------------------------
# optimizer
# ---------------------------------------------------------------------------

class Adam:
    """Adam with bias correction; moment slots are keyed by parameter name.

    ``step`` mutates the parameter arrays in place so callers can keep live
    references. ``maximize=True`` ascends instead of descending.
    """

    def __init__(self, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        if lr <= 0:
            raise ValueError("learning rate must be positive")
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = {}
        self._v = {}

    def step(self, params, grads, maximize=False):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for name, p in params.items():
            g = grads[name]
            if maximize:
                g = -g
            m = self._m.get(name)
            if m is None:
                m = self._m[name] = np.zeros_like(p)
                self._v[name] = np.zeros_like(p)
            v = self._v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
