"""Turn a datagen directory into a rasterized, split and scaled dataset."""

import hashlib
import json
from pathlib import Path

import numpy as np

from .dataset import DatasetManifest, save_dataset, split_dataset
from .raster import UnstructuredMesh, coverage, geometry_to_image, rasterize
from .scalers import INPUT_SCALERS, TARGET_SCALERS, fit_scaler

UNITS = {"geometry": "1", "p": "Pa", "u": "m/s", "v": "m/s", "vel": "m/s", "T": "K"}


def sample_images(sample, n_x, fields):
    """Geometry image plus rasterized ``fields`` of one solved sample."""
    from ..solver.datagen import load_sample  # solver depends on nothing here; keep import lazy

    s = load_sample(sample) if not isinstance(sample, dict) else sample
    grid, domain = s["grid"], s["domain"]
    x_edges = np.arange(grid.nx + 1) * grid.h
    y_edges = np.arange(grid.ny + 1) * grid.h
    mesh = UnstructuredMesh.from_structured(x_edges, y_edges, {f: s["fields"][f] for f in fields},
                                            bbox=domain.bbox)
    cov = coverage(mesh, n_x)
    out = {"geometry": geometry_to_image(s["layout"], n_x, domain.bbox).values}
    for f in fields:
        out[f] = rasterize(mesh, f, n_x, UNITS.get(f, ""), cov).values
    return out, cov[4]


def fit_scalers(arrays, train_ids, fields):
    targets = {f: fit_scaler(np.stack([arrays[f][i] for i in train_ids]), TARGET_SCALERS.get(f, "none"))
               for f in fields}
    inputs = {f: fit_scaler(np.stack([arrays[f][i] for i in train_ids]), kind)
              for f, kind in INPUT_SCALERS.items() if f in fields}
    return targets, inputs


def assemble_dataset(datagen_dir, out, n_x, fields=("p", "vel", "T"), seed=0, fractions=(0.8, 0.1, 0.1)):
    """Rasterize every converged sample at ``n_x`` columns, split, fit scalers and save."""
    from ..solver.datagen import load_sample, sample_ids

    datagen_dir = Path(datagen_dir)
    fields = list(fields)
    arrays = {f: {} for f in ["geometry"] + fields}
    status, excluded, px = {}, [], None
    for sid in sample_ids(datagen_dir):
        s = load_sample(datagen_dir / sid)
        if not s["status"].get("converged"):
            excluded.append(sid)
            continue
        imgs, px = sample_images(s, n_x, fields)
        for f, v in imgs.items():
            arrays[f][sid] = v
        status[sid] = {"converged": True, "source": sid}
    ids = list(status)
    if not ids:
        raise ValueError(f"no converged samples in {datagen_dir}")
    manifest = split_dataset(ids, fractions, seed)
    manifest.resolution = next(iter(arrays["geometry"].values())).shape
    manifest.pixel_size = px
    manifest.fields = {f: {"units": UNITS.get(f, "")} for f in arrays}
    manifest.scalers, manifest.input_scalers = fit_scalers(arrays, manifest.ids("train"), fields)
    cfg_path = datagen_dir / "datagen.json"
    cfg = cfg_path.read_bytes() if cfg_path.exists() else b""
    manifest.provenance = {"source": str(datagen_dir), "generator_config_sha256": hashlib.sha256(cfg).hexdigest(),
                           "generator_config": json.loads(cfg) if cfg else {}, "excluded": excluded}
    manifest.seeds["split"] = seed
    save_dataset(out, manifest, arrays, status)
    return manifest
