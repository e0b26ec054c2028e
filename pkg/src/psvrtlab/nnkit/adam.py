"""Adam updates with bias correction.

Only the base learning rate is a tuned quantity here (1e-4 for every
experiment); beta1/beta2/eps stay at the optimizer's published defaults.
The step form is p -= lr * m_hat / (sqrt(v_hat) + eps), so the very first
step with gradient g moves each weight by ~ -lr * sign(g).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .layers import NumericFaultError


@dataclass
class AdamState:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_params(cls, params, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        return cls(
            lr=lr,
            beta1=beta1,
            beta2=beta2,
            eps=eps,
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
        )


def adam_step(params, grads, state: AdamState) -> None:
    """One in-place Adam update over parallel lists of arrays."""
    if len(params) != len(state.m):
        raise ValueError("optimizer state does not match parameter list")
    for g in grads:
        if not np.isfinite(g).all():
            raise NumericFaultError("non-finite gradient in adam_step")
    state.t += 1
    c1 = 1.0 - state.beta1**state.t
    c2 = 1.0 - state.beta2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * np.square(g)
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
