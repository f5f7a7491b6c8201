"""Characterization sweeps: one training per (axis value, repetition) cell."""

import csv
import json
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..datapipe.assemble import assemble_dataset, fit_scalers
from ..datapipe.dataset import DatasetManifest, load_dataset
from ..nn.model import FieldModel, ModelSpec, code_dimension, depth_for_code_pixels
from ..train.data import FieldData
from ..train.loop import TrainConfig, train

AXES = ("code_dimension", "dataset_size", "resolution", "flux")
FLUX_FACTORS = (0.1, 0.2, 0.4, 1.0, 2.0, 5.0, 10.0)
CSV_COLUMNS = ("axis", "value", "repetition", "seed", "status", "r2", "rmse", "scc", "param_count",
               "wall_time", "code_pixels", "n_blocks", "n_train", "resolution", "error")


@dataclass
class ModelTemplate:
    L_enc: int = 3
    L_bot: int = 4
    L_dec: int = 3
    n_blocks: int = 3
    K: int = 8
    IC: int = 16
    dropout: float = 0.0

    def spec(self, n_blocks=None, input_channels=1):
        n = self.n_blocks if n_blocks is None else n_blocks
        k = (n - 1) // 2
        L = (self.L_enc,) * k + (self.L_bot,) + (self.L_dec,) * k
        return ModelSpec(L, self.K, self.K, self.K, self.IC, self.dropout, input_channels)


@dataclass
class SweepSpec:
    axis: str
    values: list
    dataset: str = None          # rasterized dataset (code_dimension, dataset_size)
    datagen: str = None          # solver outputs (resolution, flux)
    n_x: int = 50
    role: str = "pressure"
    model: ModelTemplate = field(default_factory=ModelTemplate)
    train: TrainConfig = field(default_factory=TrainConfig)
    repetitions: int = 1
    seed: int = 0
    split_seed: int = 0
    fractions: tuple = (0.8, 0.1, 0.1)

    def __post_init__(self):
        if isinstance(self.model, dict):
            self.model = ModelTemplate(**self.model)
        if isinstance(self.train, dict):
            self.train = TrainConfig(**self.train)
        if self.axis not in AXES:
            raise ValueError(f"axis must be one of {AXES}")
        if not self.values:
            raise ValueError("sweep values must be non-empty")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        self.fractions = tuple(float(f) for f in self.fractions)
        cast = float if self.axis == "flux" else int
        self.values = [cast(v) for v in self.values]
        if self.axis == "flux":
            self.role = "temperature"
        if self.axis in ("resolution", "flux") and not self.datagen:
            raise ValueError(f"{self.axis} sweep needs a datagen directory")
        if self.axis in ("code_dimension", "dataset_size") and not (self.dataset or self.datagen):
            raise ValueError(f"{self.axis} sweep needs a dataset")

    def to_dict(self):
        d = asdict(self)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    @classmethod
    def load(cls, path, **overrides):
        d = json.loads(Path(path).read_text())
        d.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(d)


def cell_seed(seed, index, repetition):
    return int(np.random.SeedSequence([seed, index, repetition]).generate_state(1)[0])


def subset_training(manifest, arrays, n_train, seed):
    """Manifest keeping ``n_train`` of the training samples; val/test unchanged, scalers refitted."""
    train_ids = manifest.ids("train")
    if n_train > len(train_ids) or n_train < 1:
        raise ValueError(f"insufficient samples: asked for {n_train} training samples, "
                         f"{len(train_ids)} available")
    keep = set(np.random.default_rng(seed).permutation(train_ids)[:n_train].tolist())
    splits = {k: v for k, v in manifest.splits.items() if v != "train" or k in keep}
    fields = [f for f in manifest.scalers]
    m = DatasetManifest(**{**manifest.__dict__, "splits": splits})
    m.scalers, m.input_scalers = fit_scalers(arrays, m.ids("train"), fields)
    return m


# -- per-cell work -----------------------------------------------------------------------------

def _prepare_velocity(data_dir, cfg, cache):
    """Train (once) the frozen velocity network that feeds two-stage temperature models."""
    from ..autodiff.checkpoint import load_checkpoint
    from ..nn.model import model_from_config

    cache = Path(cache)
    if (cache / "metrics.json").exists():
        vm = model_from_config(cache / "model.json")
        return load_checkpoint(vm, cache / "checkpoint")
    data = FieldData(data_dir, "velocity")
    vm = FieldModel(cfg.model.spec(), data.resolution, "velocity", cfg.seed, solid_value=data.solid_value)
    vm, _ = train(vm, data, cfg.train, out=cache)
    return vm


def run_cell(cell):
    """Train and evaluate one cell described by a plain dict; returns a CSV row."""
    cfg = SweepSpec.from_dict(cell["spec"])
    row = {k: "" for k in CSV_COLUMNS}
    row.update(axis=cfg.axis, value=cell["value"], repetition=cell["repetition"], seed=cell["seed"])
    out = Path(cell["dir"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "cell.json").write_text(json.dumps(cell, indent=1, default=str))
    t0 = time.time()
    try:
        n_blocks = cfg.model.n_blocks
        dataset = cell.get("data_dir") or cfg.dataset
        loaded = load_dataset(dataset)
        full_vel_scaler = loaded[0].scalers.get("vel")
        if cfg.axis == "code_dimension":
            n_blocks = depth_for_code_pixels(tuple(loaded[0].resolution), int(cell["value"]))
        if cfg.axis == "dataset_size":
            loaded = (subset_training(loaded[0], loaded[1], int(cell["value"]), cell["seed"]), loaded[1])
        data = FieldData(loaded, cfg.role)
        spec = cfg.model.spec(n_blocks, 2 if cfg.role == "temperature" else 1)
        model = FieldModel(spec, data.resolution, cfg.role, cell["seed"], solid_value=data.solid_value)
        tc = TrainConfig(**{**cfg.train.to_dict(), "seed": cell["seed"]})
        vm = adapter = None
        if cfg.role == "temperature" and not tc.teacher_forcing:
            vm = _prepare_velocity(dataset, cfg, cell["velocity_dir"])
            # the shared velocity network speaks the units of the full training split
            adapter = data.velocity_adapter(full_vel_scaler)
        _, rec = train(model, data, tc, out=out, velocity_model=vm, adapter=adapter)
        h, w = code_dimension(data.resolution, n_blocks)
        row.update(status="ok", r2=rec.r2, rmse=rec.rmse, scc=rec.scc, param_count=rec.param_count,
                   code_pixels=h * w, n_blocks=n_blocks, n_train=len(data.ids("train")),
                   resolution="x".join(map(str, data.resolution)))
    except Exception as e:  # failed cells are reported, never dropped
        row.update(status="failed", error=f"{type(e).__name__}: {e}")
        (out / "error.txt").write_text(traceback.format_exc())
    row["wall_time"] = time.time() - t0
    return row


# -- sweep driver -------------------------------------------------------------------------------

def _data_dir_for(cfg, value, out):
    """Dataset directory for one axis value, re-rasterizing or re-solving when needed."""
    from ..solver.datagen import resolve_flux

    if cfg.axis == "resolution":
        d = out / "data" / f"nx{int(value)}"
        if not (d / "manifest.json").exists():
            assemble_dataset(cfg.datagen, d, int(value), seed=cfg.split_seed, fractions=cfg.fractions)
        return d
    if cfg.axis == "flux":
        d = out / "data" / f"flux{float(value):g}"
        if not (d / "manifest.json").exists():
            gen = resolve_flux(cfg.datagen, out / "data" / f"flux{float(value):g}_solver", float(value))
            assemble_dataset(gen, d, cfg.n_x, seed=cfg.split_seed, fractions=cfg.fractions)
        return d
    if cfg.dataset:
        return Path(cfg.dataset)
    d = out / "data" / f"nx{cfg.n_x}"
    if not (d / "manifest.json").exists():
        assemble_dataset(cfg.datagen, d, cfg.n_x, seed=cfg.split_seed, fractions=cfg.fractions)
    return d


def _check_value(cfg, value, data_dir):
    from ..datapipe.dataset import load_manifest

    if cfg.axis == "code_dimension":
        depth_for_code_pixels(tuple(load_manifest(data_dir).resolution), int(value))
    elif cfg.axis == "dataset_size":
        n = len(load_manifest(data_dir).ids("train"))
        if not 1 <= int(value) <= n:
            raise ValueError(f"insufficient samples: {value} training samples requested, {n} available")


def plan_cells(cfg, out):
    out = Path(out)
    cells = []
    for i, value in enumerate(cfg.values):
        data_dir = _data_dir_for(cfg, value, out)
        _check_value(cfg, value, data_dir)
        for rep in range(cfg.repetitions):
            seed = cell_seed(cfg.seed, i, rep)
            cells.append({"spec": cfg.to_dict(), "value": value, "repetition": rep, "seed": seed,
                          "data_dir": str(data_dir), "dir": str(out / "cells" / f"{cfg.axis}_{value}_r{rep}"),
                          "velocity_dir": str(out / "velocity_model")})
    return cells


def write_csv(rows, path):
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=CSV_COLUMNS)
        w.writeheader()
        for r in rows:
            w.writerow({k: r.get(k, "") for k in CSV_COLUMNS})
    return path


def load_csv(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def run_sweep(cfg, out, jobs=1):
    """Run every cell; writes ``sweep.json`` and ``results.csv`` and returns the rows."""
    if isinstance(cfg, dict):
        cfg = SweepSpec.from_dict(cfg)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep.json").write_text(json.dumps(cfg.to_dict(), indent=1))
    cells = plan_cells(cfg, out)
    if cfg.role == "temperature" and not cfg.train.teacher_forcing:
        # every flux factor shares the flow; train the velocity network once up front
        base = cells[0]["data_dir"] if cfg.axis != "flux" else _data_dir_for(cfg, 1.0, out)
        _prepare_velocity(base, cfg, out / "velocity_model")
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            rows = list(ex.map(run_cell, cells))
    else:
        rows = [run_cell(c) for c in cells]
    write_csv(rows, out / "results.csv")
    return rows


def sweep_code_dimension(cfg, out, jobs=1):
    return run_sweep(SweepSpec.from_dict({**cfg.to_dict(), "axis": "code_dimension"}), out, jobs)


def sweep_dataset_size(cfg, out, jobs=1):
    return run_sweep(SweepSpec.from_dict({**cfg.to_dict(), "axis": "dataset_size"}), out, jobs)


def sweep_resolution(cfg, out, jobs=1):
    return run_sweep(SweepSpec.from_dict({**cfg.to_dict(), "axis": "resolution"}), out, jobs)


def sweep_flux(cfg, out, jobs=1):
    return run_sweep(SweepSpec.from_dict({**cfg.to_dict(), "axis": "flux"}), out, jobs)
