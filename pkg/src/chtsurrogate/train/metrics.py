"""Field-accuracy metrics over all pixels of all samples, in physical units."""

import numpy as np
from scipy.stats import rankdata

from ..datapipe.raster import GridField


def _pair(preds, targets):
    p = np.asarray(preds, dtype=np.float64).ravel()
    t = np.asarray(targets, dtype=np.float64).ravel()
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch: {np.shape(preds)} vs {np.shape(targets)}")
    return p, t


def r2(preds, targets):
    p, t = _pair(preds, targets)
    ss_tot = np.sum((t - t.mean()) ** 2)
    if ss_tot == 0:
        raise ValueError("R^2 is undefined for constant targets")
    return float(1.0 - np.sum((t - p) ** 2) / ss_tot)


def rmse(preds, targets):
    p, t = _pair(preds, targets)
    return float(np.sqrt(np.mean((p - t) ** 2)))


def scc(preds, targets):
    """Spearman rank correlation with average ranks for ties."""
    p, t = _pair(preds, targets)
    if np.all(t == t[0]):
        raise ValueError("SCC is undefined for constant targets")
    rp, rt = rankdata(p) - (len(p) + 1) / 2, rankdata(t) - (len(t) + 1) / 2
    den = np.sqrt(np.sum(rp * rp) * np.sum(rt * rt))
    if den == 0:
        raise ValueError("SCC is undefined for constant predictions")
    return float(np.clip(np.sum(rp * rt) / den, -1.0, 1.0))


def error_map(pred, target, pixel_size=1.0, name="error", units=""):
    """Signed per-pixel difference pred - target."""
    d = np.asarray(pred, dtype=np.float64) - np.asarray(target, dtype=np.float64)
    return GridField(d, pixel_size, name, units)


def evaluate(preds, targets):
    """Joint metrics plus per-sample metrics (samples along axis 0)."""
    preds, targets = np.asarray(preds), np.asarray(targets)
    out = {"r2": r2(preds, targets), "rmse": rmse(preds, targets), "scc": scc(preds, targets)}
    per = []
    for p, t in zip(preds, targets):
        rec = {"rmse": rmse(p, t)}
        try:
            rec.update(r2=r2(p, t), scc=scc(p, t))
        except ValueError:
            pass
        per.append(rec)
    out["per_sample"] = per
    return out
