"""CSV tables and SVG figures for sweeps and training runs."""

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .sweeps import CSV_COLUMNS, load_csv, write_csv  # noqa: E402

METRICS = ("r2", "rmse", "scc")
AXIS_LABELS = {"code_dimension": "code dimension (px)", "dataset_size": "training samples",
               "resolution": "n_x (px)", "flux": "heat flux scale factor"}


def _ok(rows):
    return [r for r in rows if r.get("status") == "ok"]


def metric_plot(rows, axis, metric, path):
    """Metric against the swept value: every repetition as a point, the mean as a line."""
    ok = _ok(rows)
    x = np.array([float(r["value"]) for r in ok])
    y = np.array([float(r[metric]) for r in ok])
    fig, ax = plt.subplots(figsize=(5, 3.5))
    if len(ok):
        xs = np.unique(x)
        ax.plot(xs, [y[x == v].mean() for v in xs], "-o")
        ax.scatter(x, y, s=10, alpha=0.5)
    if axis in ("flux", "code_dimension") and len(ok) and x.min() > 0:
        ax.set_xscale("log")
    ax.set_xlabel(AXIS_LABELS.get(axis, axis))
    ax.set_ylabel(metric.upper() if metric != "r2" else "R²")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return path


def triptych(targets, preds, path, titles=None, units=""):
    """Target, prediction and pixel error as three rows, one column per sample."""
    targets, preds = np.asarray(targets), np.asarray(preds)
    n = len(targets)
    fig, axes = plt.subplots(3, n, figsize=(2.2 * n + 1, 7.5), squeeze=False)
    for j in range(n):
        t, p = targets[j].squeeze(), preds[j].squeeze()
        lo, hi = float(min(t.min(), p.min())), float(max(t.max(), p.max()))
        err = p - t
        e = float(np.abs(err).max()) or 1.0
        for i, (img, kw) in enumerate(((t, dict(vmin=lo, vmax=hi)), (p, dict(vmin=lo, vmax=hi)),
                                       (err, dict(vmin=-e, vmax=e, cmap="RdBu_r")))):
            ax = axes[i, j]
            im = ax.imshow(img, origin="lower", **kw)
            ax.set_xticks([])
            ax.set_yticks([])
            if j == n - 1 or i == 2:
                fig.colorbar(im, ax=ax, fraction=0.05)
        if titles:
            axes[0, j].set_title(titles[j], fontsize=8)
    for i, name in enumerate(("target", "prediction", "error")):
        axes[i, 0].set_ylabel(f"{name} {units}".strip())
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return fig, axes


def loss_curve_plot(run_dir, path):
    with open(Path(run_dir) / "loss_curve.csv", newline="") as f:
        rows = list(csv.DictReader(f))
    ep = [int(r["epoch"]) for r in rows]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.semilogy(ep, [float(r["train_loss"]) for r in rows], label="train")
    ax.semilogy(ep, [float(r["val_loss"]) for r in rows], label="validation")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return path


def run_triptych(run_dir, dataset_dir, path, n=3, velocity_dir=None, split="test"):
    """Render a triptych for the first ``n`` samples of ``split`` from a saved run."""
    from ..autodiff.checkpoint import load_checkpoint
    from ..nn.model import model_from_config
    from ..train.data import FieldData

    run_dir = Path(run_dir)
    model = load_checkpoint(model_from_config(run_dir / "model.json"), run_dir / "checkpoint")
    data = FieldData(dataset_dir, model.role)
    vm = None
    if model.role == "temperature" and velocity_dir is not None:
        vm = load_checkpoint(model_from_config(Path(velocity_dir) / "model.json"), Path(velocity_dir) / "checkpoint")
    x = data.inputs(split, vm)[:n]
    pred = data.to_physical(model.predict(x), x[:, :1])
    target = data.targets(split, scaled=False)[:n]
    units = data.manifest.fields.get(data.field, {}).get("units", "")
    return triptych(target, pred, path, data.ids(split)[:n], f"[{units}]" if units else "")


def report(inputs, out):
    """One CSV and one SVG per metric for every sweep directory in ``inputs``."""
    inputs = [Path(p) for p in inputs]
    tables = []
    for d in inputs:
        res = d / "results.csv"
        if not res.exists():
            raise ValueError(f"{d} has no results.csv")
        rows = load_csv(res)
        if not rows:
            raise ValueError(f"sweep {d} is empty")
        tables.append((d, rows))
    if not tables:
        raise ValueError("nothing to report: no sweep directories given")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for d, rows in tables:
        axis = rows[0]["axis"]
        stem = f"{axis}_{d.name}"
        written.append(write_csv(rows, out / f"{stem}.csv"))
        for m in METRICS:
            written.append(metric_plot(rows, axis, m, out / f"{stem}_{m}.svg"))
    summary = {str(d): {"cells": len(rows), "ok": len(_ok(rows))} for d, rows in tables}
    (out / "summary.json").write_text(json.dumps(summary, indent=1))
    return written


__all__ = ["report", "triptych", "metric_plot", "loss_curve_plot", "run_triptych", "CSV_COLUMNS"]
