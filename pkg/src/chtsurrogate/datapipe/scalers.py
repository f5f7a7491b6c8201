"""Min-max and z-score transforms fitted on the training split."""

from dataclasses import dataclass

import numpy as np

KINDS = ("minmax", "zscore", "none")

# per-field assignment: standardize velocity and temperature targets, min-max the
# velocity when it is fed to the temperature model, leave pressure untouched
TARGET_SCALERS = {"p": "none", "vel": "zscore", "T": "zscore"}
INPUT_SCALERS = {"vel": "minmax"}


@dataclass(frozen=True)
class ScalerParams:
    kind: str
    a: float = 0.0  # y_min or mean
    b: float = 1.0  # y_max or std

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown scaler kind {self.kind!r}")
        if self.kind == "minmax" and not self.b > self.a:
            raise ValueError("minmax scaler needs y_max > y_min")
        if self.kind == "zscore" and not self.b > 0:
            raise ValueError("zscore scaler needs std > 0")

    @property
    def gain(self):
        """Slope of the forward transform."""
        if self.kind == "minmax":
            return 1.0 / (self.b - self.a)
        if self.kind == "zscore":
            return 1.0 / self.b
        return 1.0

    @property
    def offset(self):
        return 0.0 if self.kind == "none" else -self.a * self.gain

    def to_dict(self):
        if self.kind == "minmax":
            return {"kind": "minmax", "y_min": self.a, "y_max": self.b}
        if self.kind == "zscore":
            return {"kind": "zscore", "mean": self.a, "std": self.b}
        return {"kind": "none"}

    @classmethod
    def from_dict(cls, d):
        if d["kind"] == "minmax":
            return cls("minmax", d["y_min"], d["y_max"])
        if d["kind"] == "zscore":
            return cls("zscore", d["mean"], d["std"])
        return cls("none")


def fit_scaler(values, kind):
    """Statistics over every value of the training fields (population std for z-score)."""
    y = np.asarray(values, dtype=np.float64).reshape(-1)
    if kind == "minmax":
        lo, hi = float(y.min()), float(y.max())
        if not hi > lo:
            raise ValueError("cannot fit minmax scaler: y_max == y_min")
        return ScalerParams("minmax", lo, hi)
    if kind == "zscore":
        mean = float(y.mean())
        std = float(np.sqrt(np.mean((y - mean) ** 2)))
        if not std > 0:
            raise ValueError("cannot fit zscore scaler: constant field (std = 0)")
        return ScalerParams("zscore", mean, std)
    if kind == "none":
        return ScalerParams("none")
    raise ValueError(f"unknown scaler kind {kind!r}")


def apply_scaler(values, params):
    y = np.asarray(values)
    if params.kind == "minmax":
        return (y - params.a) / (params.b - params.a)
    if params.kind == "zscore":
        return (y - params.a) / params.b
    return y


def invert_scaler(values, params):
    y = np.asarray(values)
    if params.kind == "minmax":
        return y * (params.b - params.a) + params.a
    if params.kind == "zscore":
        return y * params.b + params.a
    return y
