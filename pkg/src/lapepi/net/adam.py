"""ADAM with bias correction and per-layer learning rates."""

from dataclasses import dataclass, field

import numpy as np

BETA1 = 0.9
BETA2 = 0.999
EPS = 1e-8


@dataclass
class AdamState:
    lr_conv: float = 1e-4
    lr_deconv: float = 1e-5
    beta1: float = BETA1
    beta2: float = BETA2
    eps: float = EPS
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def lr_for(self, spec):
        return self.lr_deconv if spec.kind == "deconv" else self.lr_conv


def adam_step(params, grads, state):
    """Update ``params`` in place from ``grads``; returns ``(params, state)``.

    Biases and PReLU slopes use the learning rate of the layer they belong
    to, so a deconvolution layer moves all its arrays at ``lr_deconv``.
    """
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for spec in params.specs():
        lr = state.lr_for(spec)
        layer = params.layers[spec.name]
        for key, p in layer.items():
            g = grads[spec.name][key]
            k = (spec.name, key)
            if k not in state.m:
                state.m[k] = np.zeros_like(p)
                state.v[k] = np.zeros_like(p)
            m, v = state.m[k], state.v[k]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state
