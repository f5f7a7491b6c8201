"""Regularized mean squared error."""

import numpy as np

from ..autodiff import functional as F
from ..autodiff.tensor import Tensor


def l2_penalty_value(params):
    """0.5 * sum(theta^2) over trainable parameters (running statistics excluded)."""
    return 0.5 * float(sum(np.sum(np.square(p.data, dtype=np.float64)) for p in params if p.trainable))


def mse_l2_loss(pred, target, params=(), alpha=0.0):
    """mean((pred - target)^2) + alpha * 0.5 * ||theta||^2, differentiable in pred and theta."""
    if not isinstance(target, Tensor):
        target = Tensor(np.asarray(target, dtype=pred.dtype))
    if pred.shape != target.shape:
        raise ValueError(f"prediction shape {pred.shape} does not match target shape {target.shape}")
    loss = F.mean(F.square(F.sub(pred, target)))
    if alpha:
        for p in params:
            if p.trainable:
                loss = F.add(loss, F.mul(F.sum(F.square(p)), 0.5 * alpha))
    return loss
