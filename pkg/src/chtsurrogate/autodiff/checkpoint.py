"""Checkpoint directory: ``weights.bin`` (little-endian float32) + ``weights.json``."""

import json
from pathlib import Path

import numpy as np

FORMAT = "chtsurrogate-weights/1"


def save_checkpoint(module, directory):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries, offset = [], 0
    with open(directory / "weights.bin", "wb") as fh:
        for name, p in module.named_parameters():
            raw = np.ascontiguousarray(p.data, dtype="<f4").tobytes()
            fh.write(raw)
            entries.append({"name": name, "role": p.role, "shape": list(p.shape), "offset": offset})
            offset += len(raw)
    meta = {"format": FORMAT, "total_bytes": offset, "parameters": entries}
    (directory / "weights.json").write_text(json.dumps(meta, indent=1))
    return directory


def load_checkpoint(module, directory):
    """Fill ``module``'s parameters in place; names, roles and shapes must match."""
    directory = Path(directory)
    meta = json.loads((directory / "weights.json").read_text())
    if meta.get("format") != FORMAT:
        raise ValueError(f"unsupported checkpoint format {meta.get('format')!r}")
    blob = np.fromfile(directory / "weights.bin", dtype="<f4")
    if blob.nbytes != meta["total_bytes"]:
        raise ValueError("weights.bin size does not match weights.json")
    params = list(module.named_parameters())
    if len(params) != len(meta["parameters"]):
        raise ValueError(f"checkpoint has {len(meta['parameters'])} parameters, model has {len(params)}")
    for (name, p), e in zip(params, meta["parameters"]):
        if e["name"] != name or e["role"] != p.role or tuple(e["shape"]) != p.shape:
            raise ValueError(f"checkpoint entry {e['name']} does not match model parameter {name}")
        start = e["offset"] // 4
        p.data[...] = blob[start:start + p.data.size].reshape(p.shape)
    return module
