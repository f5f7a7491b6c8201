"""On-disk dataset: ``manifest.json`` plus ``samples/<id>/<field>.f32`` raw arrays.

Arrays are little-endian float32 images of shape (n_y, n_x). The manifest
records resolution, field units, scaler parameters, the split of every
sample, seeds, provenance and a SHA-256 checksum per array file.
"""

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .scalers import ScalerParams

VERSION = 1
SPLITS = ("train", "val", "test")


class DatasetError(ValueError):
    pass


@dataclass
class DatasetManifest:
    resolution: tuple = (0, 0)
    pixel_size: float = 0.0
    fields: dict = field(default_factory=dict)        # name -> {"units": str}
    scalers: dict = field(default_factory=dict)       # name -> ScalerParams (targets)
    input_scalers: dict = field(default_factory=dict)  # name -> ScalerParams (network inputs)
    splits: dict = field(default_factory=dict)        # sample id -> split
    seeds: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    checksums: dict = field(default_factory=dict)     # sample id -> {field: sha256}
    version: int = VERSION

    def ids(self, split=None):
        return [k for k, v in self.splits.items() if split is None or v == split]

    def validate(self):
        if self.version != VERSION:
            raise DatasetError(f"manifest version {self.version} is not supported (expected {VERSION})")
        for sid, s in self.splits.items():
            if s not in SPLITS:
                raise DatasetError(f"sample {sid} has unknown split {s!r}")
        if len(self.resolution) != 2 or min(self.resolution) < 1:
            raise DatasetError(f"bad resolution {self.resolution}")
        return self

    def to_dict(self):
        return {
            "version": self.version,
            "resolution": list(self.resolution),
            "pixel_size": self.pixel_size,
            "fields": self.fields,
            "scalers": {k: v.to_dict() for k, v in self.scalers.items()},
            "input_scalers": {k: v.to_dict() for k, v in self.input_scalers.items()},
            "splits": [{"id": k, "split": v} for k, v in self.splits.items()],
            "seeds": self.seeds,
            "provenance": self.provenance,
            "checksums": self.checksums,
        }

    @classmethod
    def from_dict(cls, d):
        required = ("version", "resolution", "fields", "scalers", "splits", "checksums")
        missing = [k for k in required if k not in d]
        if missing:
            raise DatasetError(f"manifest is missing {missing}")
        if not isinstance(d["splits"], list):
            raise DatasetError("manifest 'splits' must be a list of {id, split}")
        ids = [e["id"] for e in d["splits"]]
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})
            raise DatasetError(f"samples assigned to more than one split: {dup}")
        return cls(
            resolution=tuple(d["resolution"]),
            pixel_size=d.get("pixel_size", 0.0),
            fields=d["fields"],
            scalers={k: ScalerParams.from_dict(v) for k, v in d["scalers"].items()},
            input_scalers={k: ScalerParams.from_dict(v) for k, v in d.get("input_scalers", {}).items()},
            splits={e["id"]: e["split"] for e in d["splits"]},
            seeds=d.get("seeds", {}),
            provenance=d.get("provenance", {}),
            checksums=d["checksums"],
            version=d["version"],
        ).validate()


def split_dataset(samples, fractions=(0.8, 0.1, 0.1), seed=0):
    """Shuffle ``samples`` (ids) into train/val/test; rounding leftovers go to train."""
    samples = list(samples)
    if len(fractions) != 3 or abs(sum(fractions) - 1.0) > 1e-9 or min(fractions) < 0:
        raise ValueError(f"fractions must be three non-negative numbers summing to 1, got {fractions}")
    n = len(samples)
    if n < 3 and sum(f > 0 for f in fractions) > 1:
        raise ValueError("need at least 3 samples")
    n_val = int(np.floor(fractions[1] * n + 1e-9))
    n_test = int(np.floor(fractions[2] * n + 1e-9))
    n_train = n - n_val - n_test
    for name, f, k in zip(SPLITS, fractions, (n_train, n_val, n_test)):
        if f > 0 and k == 0:
            raise ValueError(f"split {name!r} would be empty with {n} samples")
    order = np.random.default_rng(seed).permutation(n)
    labels = ["train"] * n_train + ["val"] * n_val + ["test"] * n_test
    splits = {samples[i]: labels[r] for r, i in enumerate(order)}
    splits = {s: splits[s] for s in samples}
    return DatasetManifest(splits=splits, seeds={"split": seed})


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def save_dataset(directory, manifest, arrays, status=None):
    """Write ``arrays`` ({field: {sample id: (n_y, n_x) array}}) and the manifest."""
    directory = Path(directory)
    (directory / "samples").mkdir(parents=True, exist_ok=True)
    checksums = {}
    for sid in manifest.splits:
        sdir = directory / "samples" / sid
        sdir.mkdir(exist_ok=True)
        checksums[sid] = {}
        for name, per_sample in arrays.items():
            arr = np.asarray(per_sample[sid], dtype="<f4")
            if arr.shape != tuple(manifest.resolution):
                raise DatasetError(f"{name} of {sid} has shape {arr.shape}, expected {manifest.resolution}")
            path = sdir / f"{name}.f32"
            arr.tofile(path)
            checksums[sid][name] = _sha256(path)
        st = (status or {}).get(sid, {"converged": True})
        (sdir / "status.json").write_text(json.dumps(st, indent=1))
    manifest.checksums = checksums
    manifest.validate()
    (directory / "manifest.json").write_text(json.dumps(manifest.to_dict(), indent=1))
    return directory


def load_manifest(directory):
    path = Path(directory) / "manifest.json"
    if not path.exists():
        raise DatasetError(f"no manifest.json in {directory}")
    return DatasetManifest.from_dict(json.loads(path.read_text()))


def load_dataset(directory, fields=None, verify=True):
    """Return (manifest, {field: {sample id: array}}), verifying checksums."""
    directory = Path(directory)
    manifest = load_manifest(directory)
    names = list(manifest.checksums[next(iter(manifest.checksums))]) if manifest.checksums else []
    names = names if fields is None else list(fields)
    out = {name: {} for name in names}
    for sid in manifest.splits:
        sums = manifest.checksums.get(sid)
        if sums is None:
            raise DatasetError(f"sample {sid} has no checksum entry")
        for name in names:
            path = directory / "samples" / sid / f"{name}.f32"
            if not path.exists():
                raise DatasetError(f"missing file {name}.f32 for sample {sid}")
            if verify and _sha256(path) != sums.get(name):
                raise DatasetError(f"checksum mismatch for {name}.f32 of sample {sid}")
            out[name][sid] = np.fromfile(path, dtype="<f4").reshape(manifest.resolution)
    return manifest, out


def stack(arrays, ids):
    """(N, n_y, n_x) float32 stack of one field over ``ids``."""
    return np.stack([arrays[i] for i in ids]).astype(np.float32)
