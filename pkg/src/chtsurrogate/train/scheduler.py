"""Reduce the learning rate when the monitored loss stops improving."""

import math


class PlateauScheduler:
    """Divide lr by ``factor`` once ``patience`` consecutive epochs fail to improve.

    An epoch improves only if its loss is strictly below best * (1 - rel_tol).
    """

    def __init__(self, lr, rel_tol=1e-4, factor=10.0, patience=10):
        if not lr > 0 or not factor > 1 or patience < 1:
            raise ValueError("need lr > 0, factor > 1 and patience >= 1")
        self.lr, self.rel_tol, self.factor, self.patience = lr, rel_tol, factor, patience
        self.best = math.inf
        self.num_bad = 0
        self.reductions = 0

    def step(self, loss):
        if not loss > 0:
            raise ValueError(f"losses must be positive, got {loss}")
        if loss < self.best * (1 - self.rel_tol):
            self.best = loss
            self.num_bad = 0
        else:
            self.num_bad += 1
        if self.num_bad >= self.patience:
            self.lr /= self.factor
            self.reductions += 1
            self.num_bad = 0
        return self.lr

    def state_dict(self):
        return {"lr": self.lr, "best": self.best, "num_bad": self.num_bad, "reductions": self.reductions}


def plateau_scheduler(loss_history, lr, rel_tol=1e-4, factor=10.0, patience=10):
    """Learning rate after replaying ``loss_history`` through a fresh scheduler."""
    s = PlateauScheduler(lr, rel_tol, factor, patience)
    for loss in loss_history:
        s.step(loss)
    return s.lr
