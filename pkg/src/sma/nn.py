"""Neural-network primitives on plain numpy arrays with hand-written gradients.

Activations are rank-3 arrays (batch N, channels C, time T) except after the
pooling head, where they collapse to (N, C). Backward passes take the same
inputs as the forward plus the upstream gradient, so there is no hidden
state anywhere in this module.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# A rank-3 activation (N, C, T); plain ndarray, no wrapper class.
Tensor3 = np.ndarray


@dataclass
class ConvParams:
    """Weights (C_out, C_in, K), bias (C_out,), and the dilation of one conv layer."""

    weights: np.ndarray
    bias: np.ndarray
    dilation: int = 1

    def __post_init__(self):
        self.weights = np.asarray(self.weights)
        self.bias = np.asarray(self.bias)
        if self.weights.ndim != 3:
            raise ValueError(f"conv weights must be rank 3, got shape {self.weights.shape}")
        if self.bias.shape != (self.weights.shape[0],):
            raise ValueError(f"bias shape {self.bias.shape} does not match C_out={self.weights.shape[0]}")
        if self.kernel < 1 or self.dilation < 1:
            raise ValueError("kernel width and dilation must be >= 1")

    @property
    def c_out(self) -> int:
        return self.weights.shape[0]

    @property
    def c_in(self) -> int:
        return self.weights.shape[1]

    @property
    def kernel(self) -> int:
        return self.weights.shape[2]


def _padded(x: Tensor3, p: ConvParams) -> np.ndarray:
    pad = (p.kernel - 1) * p.dilation
    return np.pad(x, ((0, 0), (0, 0), (pad, 0)))


def _taps(x_pad: np.ndarray, p: ConvParams, t_out: int) -> np.ndarray:
    """One time-aligned slice of the padded input per kernel tap: (K, N, C_in, T)."""
    return np.stack([x_pad[:, :, k * p.dilation : k * p.dilation + t_out] for k in range(p.kernel)])


def causal_conv1d(x: Tensor3, p: ConvParams) -> Tensor3:
    """Dilated causal convolution, output length = input length.

    y[n,o,t] = bias[o] + sum_{i,k} w[o,i,k] * x[n,i,t-(K-1-k)*d], with the
    input zero-padded on the left by (K-1)*d so no output sample ever sees
    the future.
    """
    n, c_in, t = x.shape
    if c_in != p.c_in:
        raise ValueError(f"conv expects {p.c_in} input channels, activation has {c_in}")
    taps = _taps(_padded(x, p), p, t)
    # einsum over (i, k): result (C_out, N, T), then batch-major
    y = np.tensordot(p.weights, taps, axes=([1, 2], [2, 0])) + p.bias[:, None, None]
    return np.ascontiguousarray(y.transpose(1, 0, 2))


def causal_conv1d_backward(x: Tensor3, p: ConvParams, grad_y: Tensor3):
    """Adjoints of causal_conv1d: returns (grad_x, grad_w, grad_bias)."""
    n, c_in, t = x.shape
    if grad_y.shape != (n, p.c_out, t):
        raise ValueError(f"grad_y shape {grad_y.shape}, expected {(n, p.c_out, t)}")
    x_pad = _padded(x, p)
    taps = _taps(x_pad, p, t)

    grad_bias = grad_y.sum(axis=(0, 2))
    # grad_w[o,i,k] = sum_{n,t} grad_y[n,o,t] * taps[k,n,i,t]
    grad_w = np.tensordot(grad_y, taps, axes=([0, 2], [1, 3])).transpose(0, 2, 1)

    grad_x_pad = np.zeros_like(x_pad)
    for k in range(p.kernel):
        # tap k routed grad back to x_pad[:, :, k*d + t]
        contrib = np.tensordot(grad_y, p.weights[:, :, k], axes=([1], [0]))  # (N, T, C_in)
        grad_x_pad[:, :, k * p.dilation : k * p.dilation + t] += contrib.transpose(0, 2, 1)
    pad = (p.kernel - 1) * p.dilation
    return grad_x_pad[:, :, pad:], np.ascontiguousarray(grad_w), grad_bias


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0)


def relu_backward(x: np.ndarray, grad_y: np.ndarray) -> np.ndarray:
    # subgradient at exactly 0 is defined as 0
    return grad_y * (x > 0)


def global_avg_pool(x: Tensor3) -> np.ndarray:
    """Mean over the time axis: (N, C, T) -> (N, C)."""
    return x.mean(axis=2)


def global_avg_pool_backward(x: Tensor3, grad_y: np.ndarray) -> Tensor3:
    n, c, t = x.shape
    return np.broadcast_to(grad_y[:, :, None] / t, (n, c, t)).copy()


def dense(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Affine map y = x @ w.T + b with x (N, C_in), w (C_out, C_in)."""
    return x @ w.T + b


def dense_backward(x: np.ndarray, w: np.ndarray, grad_y: np.ndarray):
    return grad_y @ w, grad_y.T @ x, grad_y.sum(axis=0)


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def softmax_xent(logits: np.ndarray, labels) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over the batch and its gradient w.r.t. logits.

    loss = mean_n -log softmax(logits)[n, labels[n]], with max-subtraction;
    grad = (softmax - onehot) / N.
    """
    n, c = logits.shape
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (n,):
        raise ValueError(f"labels shape {labels.shape} does not match batch size {n}")
    if labels.size and (labels.min() < 0 or labels.max() >= c):
        raise ValueError(f"label outside 0..{c - 1}")
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    loss = float((log_z - shifted[np.arange(n), labels]).mean())
    grad = softmax(logits)
    grad[np.arange(n), labels] -= 1.0
    grad /= n
    return loss, grad


@dataclass
class AdamState:
    """Moment accumulators plus hyperparameters, one (m, v) pair per parameter."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not 0 <= self.beta1 < 1 or not 0 <= self.beta2 < 1:
            raise ValueError("betas must lie in [0, 1)")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.t < 0:
            raise ValueError("step counter must be >= 0")

    @classmethod
    def init(cls, params: list[np.ndarray], lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return cls(
            m=[np.zeros(p.shape, dtype=np.float64) for p in params],
            v=[np.zeros(p.shape, dtype=np.float64) for p in params],
            t=0,
            lr=lr,
            beta1=beta1,
            beta2=beta2,
            eps=eps,
        )


def adam_step(params: list[np.ndarray], grads: list[np.ndarray], state: AdamState):
    """One bias-corrected Adam update: returns (new_params, new_state).

    Pure: the input state is not mutated, so identical (params, grads, state)
    always produce bit-identical outputs. New parameters keep their dtype.
    """
    if len(params) != len(grads):
        raise ValueError("params and grads differ in length")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ValueError(f"param shape {p.shape} does not match grad shape {g.shape}")
    t = state.t + 1
    new_m, new_v, out = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        g64 = g.astype(np.float64, copy=False)
        m = state.beta1 * m + (1 - state.beta1) * g64
        v = state.beta2 * v + (1 - state.beta2) * g64 * g64
        m_hat = m / (1 - state.beta1**t)
        v_hat = v / (1 - state.beta2**t)
        out.append((p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)).astype(p.dtype))
        new_m.append(m)
        new_v.append(v)
    return out, AdamState(new_m, new_v, t, state.lr, state.beta1, state.beta2, state.eps)


def he_normal(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, dtype=np.float32) -> np.ndarray:
    """He-style init: zero-mean normal with std sqrt(2 / fan_in)."""
    if fan_in < 1:
        raise ValueError("fan_in must be positive")
    return (rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)).astype(dtype)
