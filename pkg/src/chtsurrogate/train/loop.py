"""Mini-batch training with best-validation checkpointing."""

import csv
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..autodiff.checkpoint import save_checkpoint
from ..autodiff.tensor import Tensor
from ..nn.model import param_count, save_model_config
from .losses import l2_penalty_value, mse_l2_loss
from .metrics import evaluate
from .optim import Adam
from .scheduler import PlateauScheduler


@dataclass
class TrainConfig:
    lr: float = 1e-3
    weight_decay: float = 1e-4
    batch_size: int = 8
    epochs: int = 100
    rel_tol: float = 1e-4
    factor: float = 10.0
    patience: int = 10
    seed: int = 0
    teacher_forcing: bool = False

    def __post_init__(self):
        if not self.lr > 0 or self.weight_decay < 0 or self.batch_size < 1 or not self.factor > 1:
            raise ValueError("need lr > 0, weight_decay >= 0, batch_size >= 1 and factor > 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")

    def to_dict(self):
        return asdict(self)


@dataclass
class MetricsRecord:
    r2: float = float("nan")
    rmse: float = float("nan")
    scc: float = float("nan")
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    lr: list = field(default_factory=list)
    best_epoch: int = 0
    param_count: int = 0
    wall_time: float = 0.0
    eval_split: str = "test"
    per_sample: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)


def _snapshot(model):
    return [p.data.copy() for p in model.parameters()]


def _restore(model, snap):
    for p, d in zip(model.parameters(), snap):
        p.data[...] = d


def _mse(pred, target):
    return float(np.mean((np.asarray(pred, np.float64) - target) ** 2))


def evaluate_model(model, data, split="test", velocity_model=None, adapter=None, teacher_forcing=False):
    """Physical-unit metrics of ``model`` on ``split``; returns (metrics dict, preds, targets)."""
    vm = None if teacher_forcing else velocity_model
    x = data.inputs(split, vm, adapter)
    pred = data.to_physical(model.predict(x), x[:, :1])
    target = data.targets(split, scaled=False)
    return evaluate(pred, target), pred, target


def train(model, data, config=None, out=None, velocity_model=None, adapter=None, log=None):
    """Fit ``model`` to ``data`` (a FieldData); returns (model, MetricsRecord)."""
    config = config or TrainConfig()
    t0 = time.time()
    if data.role != model.role:
        raise ValueError(f"model role {model.role} does not match data role {data.role}")
    two_stage = data.role == "temperature" and not config.teacher_forcing
    if two_stage and velocity_model is None:
        raise ValueError("two-stage temperature training needs a trained velocity model")
    vm = velocity_model if two_stage else None
    if not data.ids("train"):
        raise ValueError("empty training split")
    X, Y = data.inputs("train", vm, adapter), data.targets("train")
    has_val = len(data.ids("val")) > 0
    Xv, Yv = (data.inputs("val", vm, adapter), data.targets("val")) if has_val else (None, None)

    rng = np.random.default_rng(config.seed)
    params = model.parameters(trainable_only=True)
    opt = Adam(params, config.lr, config.weight_decay)
    sched = PlateauScheduler(config.lr, config.rel_tol, config.factor, config.patience)
    rec = MetricsRecord(param_count=param_count(model))
    best, best_snap = np.inf, None
    n = len(X)
    for epoch in range(1, config.epochs + 1):
        model.train()
        order = rng.permutation(n)
        total = 0.0
        for b, s in enumerate(range(0, n, config.batch_size)):
            idx = order[s:s + config.batch_size]
            pred = model(Tensor(X[idx]))
            loss = mse_l2_loss(pred, Y[idx])
            value = loss.item() + config.weight_decay * l2_penalty_value(params)
            if not np.isfinite(value):
                raise FloatingPointError(f"non-finite loss at epoch {epoch}, batch {b}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += value * len(idx)
        train_loss = total / n
        val_loss = _mse(model.predict(Xv), Yv) if has_val else train_loss
        rec.train_loss.append(train_loss)
        rec.val_loss.append(val_loss)
        rec.lr.append(opt.lr)
        if val_loss < best:
            best, best_snap, rec.best_epoch = val_loss, _snapshot(model), epoch
        opt.lr = sched.step(val_loss)
        if log:
            log(f"epoch {epoch:4d}  train {train_loss:.6g}  val {val_loss:.6g}  lr {rec.lr[-1]:.3g}")
    opt.zero_grad()
    _restore(model, best_snap)
    split = "test" if data.ids("test") else ("val" if has_val else "train")
    metrics, _, _ = evaluate_model(model, data, split, vm, adapter)
    rec.r2, rec.rmse, rec.scc, rec.per_sample = metrics["r2"], metrics["rmse"], metrics["scc"], metrics["per_sample"]
    rec.eval_split = split
    rec.wall_time = time.time() - t0
    if out is not None:
        write_run(out, model, rec, config)
    return model, rec


def write_run(out, model, rec, config):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(model, out / "checkpoint")
    save_model_config(model, out / "model.json")
    (out / "train_config.json").write_text(json.dumps(config.to_dict(), indent=1))
    (out / "metrics.json").write_text(json.dumps(rec.to_dict(), indent=1))
    with open(out / "loss_curve.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["epoch", "train_loss", "val_loss", "lr"])
        for i, (a, b, c) in enumerate(zip(rec.train_loss, rec.val_loss, rec.lr), 1):
            w.writerow([i, repr(a), repr(b), repr(c)])
    return out
