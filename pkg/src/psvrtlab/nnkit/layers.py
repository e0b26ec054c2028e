"""From-scratch CNN layers over plain (N, C, H, W) numpy arrays.

Conventions, fixed once for the whole engine:

- convolution is cross-correlation with stride 1 and "same" zero padding
  anchored top-left: the window for output pixel (i, j) starts at input
  (i, j), so all padding lands on the bottom/right edges and output spatial
  dims equal input dims;
- max pooling is 3x3 / stride 2 with ceil-mode output (H -> (H+1)//2) and
  implicit -inf padding; argmax ties break to first scan order;
- ReLU uses subgradient 0 at 0;
- training runs in float32, gradient checking in float64.
"""

from __future__ import annotations

import numpy as np


class NumericFaultError(Exception):
    """A tensor stopped being finite (NaN/Inf)."""


def check_finite(name: str, arr: np.ndarray) -> None:
    if not np.isfinite(arr).all():
        raise NumericFaultError(f"non-finite values in {name}")


def xavier_init(rng: np.random.Generator, fan_in: int, fan_out: int, shape, dtype=np.float32):
    """Uniform on +-sqrt(6 / (fan_in + fan_out)), drawn in float64 then cast."""
    if fan_in <= 0 or fan_out <= 0:
        raise ValueError(f"fans must be positive, got ({fan_in}, {fan_out})")
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class ConvLayer:
    """Stride-1 same-padded convolution; weights (out_ch, in_ch, s, s).

    im2col keeps (kernel, spatial) axes in native memory order so both GEMMs
    run batched over the sample axis without any transpose copies.
    """

    def __init__(self, in_channels: int, out_channels: int, kernel: int, rng, dtype=np.float32):
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = kernel
        fan_in = in_channels * kernel * kernel
        fan_out = out_channels * kernel * kernel
        self.w = xavier_init(rng, fan_in, fan_out, (out_channels, in_channels, kernel, kernel), dtype)
        self.b = np.zeros(out_channels, dtype=dtype)
        self.params = [self.w, self.b]
        self.grads = [np.zeros_like(self.w), np.zeros_like(self.b)]
        self._cols = None
        self._x_shape = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        n, c, h, w = x.shape
        if c != self.in_channels:
            raise ValueError(f"expected {self.in_channels} input channels, got {c}")
        s = self.kernel
        xp = np.zeros((n, c, h + s - 1, w + s - 1), dtype=x.dtype)
        xp[:, :, :h, :w] = x
        col = np.empty((n, c, s, s, h, w), dtype=x.dtype)
        for a in range(s):
            for b in range(s):
                col[:, :, a, b] = xp[:, :, a : a + h, b : b + w]
        cols = col.reshape(n, c * s * s, h * w)
        out = self.w.reshape(self.out_channels, -1) @ cols + self.b[:, None]
        self._cols = cols
        self._x_shape = x.shape
        return out.reshape(n, self.out_channels, h, w)

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        n, c, h, w = self._x_shape
        s = self.kernel
        g = grad_out.reshape(n, self.out_channels, h * w)
        self.grads[0][...] = np.matmul(g, self._cols.transpose(0, 2, 1)).sum(axis=0).reshape(
            self.w.shape
        )
        self.grads[1][...] = g.sum(axis=(0, 2))
        dcol = (self.w.reshape(self.out_channels, -1).T @ g).reshape(n, c, s, s, h, w)
        dxp = np.zeros((n, c, h + s - 1, w + s - 1), dtype=grad_out.dtype)
        for a in range(s):
            for b in range(s):
                dxp[:, :, a : a + h, b : b + w] += dcol[:, :, a, b]
        return dxp[:, :, :h, :w]


class MaxPoolLayer:
    """3x3 / stride-2 max pooling with ceil-mode output and -inf padding.

    Forward is a separable max over strided views (no window tensor is
    materialized); backward routes each upstream gradient to the first
    window cell, in scan order, whose value equals the window max.
    """

    kernel = 3
    stride = 2

    def __init__(self):
        self.params = []
        self.grads = []
        self._xp = None
        self._out = None
        self._x_shape = None

    @staticmethod
    def out_side(side: int) -> int:
        return (side + 1) // 2

    def _cell(self, arr, a: int, b: int, oh: int, ow: int):
        """View of window cell (a, b) across all windows."""
        return arr[:, :, a : a + 2 * oh : 2, b : b + 2 * ow : 2]

    def forward(self, x: np.ndarray) -> np.ndarray:
        n, c, h, w = x.shape
        oh, ow = self.out_side(h), self.out_side(w)
        ph, pw = 2 * oh + 1, 2 * ow + 1
        xp = np.full((n, c, ph, pw), -np.inf, dtype=x.dtype)
        xp[:, :, :h, :w] = x
        cm = np.maximum(
            np.maximum(xp[:, :, :, 0:pw:2][:, :, :, :ow], xp[:, :, :, 1:pw:2]),
            xp[:, :, :, 2:pw:2],
        )
        out = np.maximum(
            np.maximum(cm[:, :, 0:ph:2][:, :, :oh], cm[:, :, 1:ph:2]), cm[:, :, 2:ph:2]
        )
        self._xp = xp
        self._out = out
        self._x_shape = x.shape
        return out

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        n, c, h, w = self._x_shape
        oh, ow = grad_out.shape[2], grad_out.shape[3]
        dxp = np.zeros_like(self._xp)
        assigned = np.zeros(grad_out.shape, dtype=bool)
        for a in range(3):
            for b in range(3):
                match = self._cell(self._xp, a, b, oh, ow) == self._out
                match &= ~assigned
                self._cell(dxp, a, b, oh, ow)[...] += grad_out * match
                assigned |= match
        return dxp[:, :, :h, :w]

    def winner_index(self) -> np.ndarray:
        """Scan-order index (0..8) of each window's routed cell, from the
        latest forward pass; used for kink detection in gradient checks."""
        oh, ow = self._out.shape[2], self._out.shape[3]
        winner = np.full(self._out.shape, 9, dtype=np.int8)
        for idx in range(9):
            cell = self._cell(self._xp, idx // 3, idx % 3, oh, ow)
            winner = np.where((winner == 9) & (cell == self._out), idx, winner)
        return winner


class ReLULayer:
    def __init__(self):
        self.params = []
        self.grads = []
        self._mask = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._mask = x > 0
        return np.where(self._mask, x, 0)

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        return np.where(self._mask, grad_out, 0)


class FlattenLayer:
    def __init__(self):
        self.params = []
        self.grads = []
        self._x_shape = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._x_shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        return grad_out.reshape(self._x_shape)


class DenseLayer:
    """Affine layer; weights (fan_in, units)."""

    def __init__(self, fan_in: int, units: int, rng, dtype=np.float32):
        self.fan_in = fan_in
        self.units = units
        self.w = xavier_init(rng, fan_in, units, (fan_in, units), dtype)
        self.b = np.zeros(units, dtype=dtype)
        self.params = [self.w, self.b]
        self.grads = [np.zeros_like(self.w), np.zeros_like(self.b)]
        self._x = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.shape[1] != self.fan_in:
            raise ValueError(f"expected fan-in {self.fan_in}, got {x.shape[1]}")
        self._x = x
        return x @ self.w + self.b

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        self.grads[0][...] = self._x.T @ grad_out
        self.grads[1][...] = grad_out.sum(axis=0)
        return grad_out @ self.w.T


def softmax_xent(logits: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy over the batch and its gradient w.r.t. logits.

    Stable under large logits via the log-sum-exp shift; grad is
    (softmax - onehot) / batch.
    """
    n, classes = logits.shape
    labels = np.asarray(labels)
    if labels.min() < 0 or labels.max() >= classes:
        raise ValueError(f"labels outside [0, {classes})")
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    total = exp.sum(axis=1, keepdims=True)
    log_probs = shifted - np.log(total)
    loss = -log_probs[np.arange(n), labels].mean()
    grad = exp / total
    grad[np.arange(n), labels] -= 1.0
    grad /= n
    return float(loss), grad.astype(logits.dtype)
