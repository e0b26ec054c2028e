"""Compile NetworkSpecs into runnable networks; gradient checking; checkpoints."""

from __future__ import annotations

import struct

import numpy as np

from .. import arch
from .layers import (
    ConvLayer,
    DenseLayer,
    FlattenLayer,
    MaxPoolLayer,
    ReLULayer,
    check_finite,
    softmax_xent,
)


class Network:
    """A compiled network: ordered runtime layers plus bookkeeping.

    Single-writer during training; clone fresh instances for concurrent
    trials. `shapes` records the (C, H, W)/(units,) output of every layer as
    resolved at compile time.
    """

    def __init__(self, spec: arch.NetworkSpec, layers, shapes, seed: int, dtype):
        self.spec = spec
        self.layers = layers
        self.shapes = shapes
        self.seed = seed
        self.dtype = dtype
        self.step = 0

    @property
    def params(self):
        return [p for layer in self.layers for p in layer.params]

    @property
    def grads(self):
        return [g for layer in self.layers for g in layer.grads]

    def param_count(self) -> int:
        return sum(p.size for p in self.params)

    def forward(self, x: np.ndarray) -> np.ndarray:
        out = np.ascontiguousarray(x, dtype=self.dtype)
        check_finite("input", out)  # ReLU masking could hide an input NaN
        for layer in self.layers:
            out = layer.forward(out)
        check_finite("logits", out)
        return out

    def backward(self, grad_logits: np.ndarray) -> np.ndarray:
        g = grad_logits
        for layer in reversed(self.layers):
            g = layer.backward(g)
        return g

    def loss_and_grad(self, x: np.ndarray, labels: np.ndarray):
        """Forward + backward on one batch; returns (loss, logits)."""
        logits = self.forward(x)
        loss, dlogits = softmax_xent(logits, labels)
        self.backward(dlogits)
        return loss, logits

    def loss(self, x: np.ndarray, labels: np.ndarray) -> float:
        logits = self.forward(x)
        loss, _ = softmax_xent(logits, labels)
        return loss

    def decision_signature(self) -> tuple:
        """ReLU masks and pool argmaxes from the latest forward pass; two
        perturbed evaluations sharing a signature crossed no kink between
        them, so central differences there are trustworthy."""
        sig = []
        for layer in self.layers:
            if isinstance(layer, ReLULayer):
                sig.append(layer._mask.tobytes())
            elif isinstance(layer, MaxPoolLayer):
                sig.append(layer.winner_index().tobytes())
        return tuple(sig)


def compile_network(spec: arch.NetworkSpec, seed: int = 0, dtype=np.float32) -> Network:
    """Instantiate layers with Xavier-initialized parameters.

    Parameter draws come from a single seeded stream in declaration order,
    so a (spec, seed, dtype) triple always yields bit-identical weights.
    """
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed))
    c, h, w = spec.input_channels, spec.input_side, spec.input_side
    flat: int | None = None
    layers: list = []
    shapes: list = []
    for layer_spec in spec.layers:
        if isinstance(layer_spec, arch.Conv):
            if flat is not None:
                raise ValueError(f"{spec.name}: conv after dense head")
            layers.append(ConvLayer(c, layer_spec.out_channels, layer_spec.kernel, rng, dtype))
            c = layer_spec.out_channels
        elif isinstance(layer_spec, arch.Pool):
            layers.append(MaxPoolLayer())
            h, w = MaxPoolLayer.out_side(h), MaxPoolLayer.out_side(w)
            if h < 1 or w < 1:
                raise ValueError(f"{spec.name}: spatial side collapsed below 1x1")
        elif isinstance(layer_spec, arch.Relu):
            layers.append(ReLULayer())
        elif isinstance(layer_spec, (arch.Dense, arch.Classifier)):
            units = layer_spec.units if isinstance(layer_spec, arch.Dense) else layer_spec.classes
            if flat is None:
                layers.append(FlattenLayer())
                shapes.append((c * h * w,))
                flat = c * h * w
            layers.append(DenseLayer(flat, units, rng, dtype))
            flat = units
        else:
            raise ValueError(f"unknown layer spec {layer_spec!r}")
        shapes.append((flat,) if flat is not None else (c, h, w))
    return Network(spec, layers, shapes, seed, dtype)


def accuracy(net: Network, x: np.ndarray, labels: np.ndarray, batch: int = 250) -> float:
    """Fraction of argmax-correct predictions, evaluated in chunks."""
    correct = 0
    for start in range(0, len(x), batch):
        logits = net.forward(x[start : start + batch])
        correct += int((logits.argmax(axis=1) == labels[start : start + batch]).sum())
    return correct / len(x)


def grad_check(
    net: Network,
    x: np.ndarray,
    labels: np.ndarray,
    eps: float = 1e-5,
    max_params: int = 1000,
    rng: np.random.Generator | None = None,
    floor: float = 1e-6,
) -> float:
    """Max relative error between backprop and central finite differences.

    Relative error per coordinate is |fd - bp| / max(|fd|, |bp|, floor); the
    floor turns the comparison absolute once both gradients vanish. Every
    parameter is perturbed (or a random subsample of max_params for large
    nets). Coordinates whose +-eps evaluations cross a ReLU/pool decision
    boundary are resampled: the loss is not differentiable there and central
    differences are meaningless.
    """
    if net.dtype != np.float64:
        raise ValueError("gradient checking requires a float64-compiled network")
    if rng is None:
        rng = np.random.default_rng(0)
    x = np.ascontiguousarray(x, dtype=np.float64)
    net.loss_and_grad(x, labels)
    analytic = [g.copy() for g in net.grads]
    params = net.params
    sizes = np.array([p.size for p in params])
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    total = int(offsets[-1])
    n_check = min(max_params, total)
    order = rng.permutation(total)
    worst = 0.0
    checked = 0
    for flat_idx in order:
        if checked >= n_check:
            break
        t = int(np.searchsorted(offsets, flat_idx, side="right") - 1)
        i = int(flat_idx - offsets[t])
        p = params[t].reshape(-1)
        old = p[i]
        p[i] = old + eps
        loss_hi = net.loss(x, labels)
        sig_hi = net.decision_signature()
        p[i] = old - eps
        loss_lo = net.loss(x, labels)
        sig_lo = net.decision_signature()
        p[i] = old
        if sig_hi != sig_lo:
            continue  # kink inside the interval; try another coordinate
        fd = (loss_hi - loss_lo) / (2 * eps)
        bp = float(analytic[t].reshape(-1)[i])
        rel = abs(fd - bp) / max(abs(fd), abs(bp), floor)
        worst = max(worst, rel)
        checked += 1
    if checked == 0:
        raise RuntimeError("grad_check could not find any kink-free coordinate")
    return worst


CHECKPOINT_MAGIC = b"PSVRNET1"


def save_checkpoint(net: Network, path) -> None:
    """Spec descriptor then parameter arrays in declaration order, f32 LE."""
    text = arch.spec_to_text(net.spec).encode("utf-8")
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<QQI", net.seed, net.step, len(text)))
        f.write(text)
        params = net.params
        f.write(struct.pack("<I", len(params)))
        for p in params:
            f.write(struct.pack("<I", p.ndim))
            f.write(struct.pack(f"<{p.ndim}I", *p.shape))
            f.write(p.astype("<f4").tobytes())


def load_checkpoint(path, dtype=np.float32) -> Network:
    with open(path, "rb") as f:
        if f.read(len(CHECKPOINT_MAGIC)) != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a network checkpoint")
        seed, step, text_len = struct.unpack("<QQI", f.read(20))
        spec = arch.spec_from_text(f.read(text_len).decode("utf-8"))
        net = compile_network(spec, seed=seed, dtype=dtype)
        net.step = step
        (n_params,) = struct.unpack("<I", f.read(4))
        params = net.params
        if n_params != len(params):
            raise ValueError(f"{path}: parameter count mismatch")
        for p in params:
            (ndim,) = struct.unpack("<I", f.read(4))
            shape = struct.unpack(f"<{ndim}I", f.read(4 * ndim))
            if shape != p.shape:
                raise ValueError(f"{path}: parameter shape mismatch {shape} vs {p.shape}")
            data = np.frombuffer(f.read(4 * p.size), dtype="<f4").reshape(shape)
            p[...] = data.astype(dtype)
    return net
