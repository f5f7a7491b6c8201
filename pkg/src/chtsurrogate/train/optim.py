"""Adam with coupled L2 weight decay."""

from dataclasses import dataclass, field

import numpy as np

BETAS = (0.9, 0.999)
EPS = 1e-8


@dataclass
class AdamState:
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def adam_step(params, grads, state, lr, alpha=0.0, betas=BETAS, eps=EPS):
    """One in-place Adam update; the decay term alpha * theta is added to each gradient."""
    params = list(params)
    if not state.m:
        state.m = [np.zeros_like(p.data) for p in params]
        state.v = [np.zeros_like(p.data) for p in params]
    if len(state.m) != len(params) or any(m.shape != p.shape for m, p in zip(state.m, params)):
        raise ValueError("optimizer state does not match parameters")
    b1, b2 = betas
    state.step += 1
    c1, c2 = 1 - b1 ** state.step, 1 - b2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        g = np.zeros_like(p.data) if g is None else np.asarray(g, dtype=p.data.dtype)
        if alpha:
            g = g + alpha * p.data
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        p.data -= (lr * (m / c1) / (np.sqrt(v / c2) + eps)).astype(p.data.dtype)
    return state


class Adam:
    def __init__(self, params, lr=1e-3, weight_decay=0.0, betas=BETAS, eps=EPS):
        self.params = [p for p in params if p.trainable]
        self.lr, self.weight_decay, self.betas, self.eps = lr, weight_decay, betas, eps
        self.state = AdamState()

    def step(self):
        adam_step(self.params, [p.grad for p in self.params], self.state, self.lr,
                  self.weight_decay, self.betas, self.eps)

    def zero_grad(self):
        for p in self.params:
            p.grad = None
