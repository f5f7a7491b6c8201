"""Hyperband over epoch budgets with uniformly sampled configurations."""

import json
import math
from pathlib import Path

import numpy as np

# dropout, layer counts, growth rate, initial channels, learning rate, weight decay, batch size
DEFAULT_SPACE = {
    "dropout": {"type": "float", "low": 0.0, "high": 0.2},
    "L_enc": {"type": "int", "low": 1, "high": 4},
    "L_bot": {"type": "int", "low": 1, "high": 6},
    "L_dec": {"type": "int", "low": 1, "high": 4},
    "K": {"type": "int", "low": 4, "high": 16},
    "IC": {"type": "int", "low": 8, "high": 32},
    "lr": {"type": "log", "low": 1e-4, "high": 3e-3},
    "weight_decay": {"type": "log", "low": 1e-6, "high": 1e-3},
    "batch_size": {"type": "choice", "choices": [4, 8, 16]},
}


def sample_config(space, rng):
    cfg = {}
    for name, d in space.items():
        kind = d["type"]
        if kind == "int":
            cfg[name] = int(rng.integers(d["low"], d["high"] + 1))
        elif kind == "float":
            cfg[name] = float(rng.uniform(d["low"], d["high"]))
        elif kind == "log":
            cfg[name] = float(np.exp(rng.uniform(np.log(d["low"]), np.log(d["high"]))))
        elif kind == "choice":
            cfg[name] = d["choices"][int(rng.integers(len(d["choices"])))]
        else:
            raise ValueError(f"unknown search dimension type {kind!r} for {name}")
    return cfg


def successive_halving(configs, budgets, eta, evaluate, log=None, bracket=0):
    """Evaluate survivors at each budget, keeping the best 1/eta; returns (config, loss) of the winner."""
    survivors = list(enumerate(configs))
    for rung, budget in enumerate(budgets):
        scored = []
        for cid, cfg in survivors:
            loss = float(evaluate(cfg, budget))
            scored.append((loss if np.isfinite(loss) else np.inf, cid, cfg))
            if log is not None:
                log.append({"bracket": bracket, "rung": rung, "budget": budget, "config_id": cid,
                            "config": cfg, "loss": loss})
        scored.sort(key=lambda t: t[0])
        if rung < len(budgets) - 1:
            keep = max(1, len(scored) // eta)
            survivors = [(cid, cfg) for _, cid, cfg in scored[:keep]]
    return scored[0][2], scored[0][0]


def hyperband_search(space, budget_levels, eta=3, evaluate=None, seed=0, log_path=None):
    """Best configuration by validation loss over all Hyperband brackets.

    ``budget_levels`` are increasing epoch budgets; ``evaluate(config, epochs)``
    returns a validation loss. The full trial log is written to ``log_path``.
    """
    if not space:
        raise ValueError("search space is empty")
    budgets = [int(b) for b in budget_levels]
    if not budgets or min(budgets) < 1:
        raise ValueError("every budget level must be at least one epoch")
    if eta < 2:
        raise ValueError("eta must be >= 2")
    rng = np.random.default_rng(seed)
    s_max = len(budgets) - 1
    log, best = [], (None, np.inf)
    for s in range(s_max, -1, -1):
        n = int(math.ceil((s_max + 1) / (s + 1) * eta ** s))
        configs = [sample_config(space, rng) for _ in range(n)]
        cfg, loss = successive_halving(configs, budgets[s_max - s:], eta, evaluate, log, bracket=s_max - s)
        if loss < best[1] or best[0] is None:
            best = (cfg, loss)
    if log_path is not None:
        Path(log_path).write_text("\n".join(json.dumps(r) for r in log) + "\n")
    return {"config": best[0], "loss": best[1], "trials": log}


def deepedh_evaluator(data, n_blocks=3, velocity_model=None, seed=0):
    """evaluate(config, epochs) that trains a DeepEDH model and returns its best validation loss."""
    from ..nn.model import FieldModel, ModelSpec
    from ..train.loop import TrainConfig, train

    def evaluate(cfg, epochs):
        k = (n_blocks - 1) // 2
        L = (cfg["L_enc"],) * k + (cfg["L_bot"],) + (cfg["L_dec"],) * k
        spec = ModelSpec(L, cfg["K"], cfg["K"], cfg["K"], cfg["IC"], cfg["dropout"],
                         2 if data.role == "temperature" else 1)
        model = FieldModel(spec, data.resolution, data.role, seed, solid_value=data.solid_value)
        tc = TrainConfig(lr=cfg["lr"], weight_decay=cfg["weight_decay"], batch_size=cfg["batch_size"],
                         epochs=epochs, seed=seed)
        _, rec = train(model, data, tc, velocity_model=velocity_model)
        return min(rec.val_loss)

    return evaluate
