"""DeepEDH: dense encoder-decoder with skips, output mask and two-stage coupling."""

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..autodiff import functional as F
from ..autodiff.layers import Module, ModuleList
from ..autodiff.tensor import Tensor, no_grad
from .blocks import (
    DenseBlock,
    DenseBlockSpec,
    DecodeTransition,
    EncodeTransition,
    InitialConv,
    ceil_half,
    final_decode,
    output_padding_for,
)

ROLES = ("pressure", "velocity", "temperature")


@dataclass(frozen=True)
class ModelSpec:
    """Architecture description; ``L_dense`` lists encoder, bottleneck and decoder block depths."""

    L_dense: tuple
    K_enc: int
    K_bot: int
    K_dec: int
    IC: int
    dropout: float = 0.0
    input_channels: int = 1
    skip_connections: bool = True
    output_mask: bool = True

    def __post_init__(self):
        object.__setattr__(self, "L_dense", tuple(int(v) for v in self.L_dense))
        if len(self.L_dense) % 2 == 0:
            raise ValueError(f"L_dense must have odd length, got {list(self.L_dense)}")
        if min(self.K_enc, self.K_bot, self.K_dec, self.IC) < 1 or min(self.L_dense) < 0:
            raise ValueError("growth rates and IC must be >= 1 and layer counts >= 0")
        if self.input_channels not in (1, 2, 3):
            raise ValueError("input_channels must be 1, 2 or 3")

    @property
    def n_enc(self):
        return (len(self.L_dense) - 1) // 2

    @property
    def n_blocks(self):
        return len(self.L_dense)

    def to_dict(self):
        d = asdict(self)
        d["L_dense"] = list(self.L_dense)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    @classmethod
    def uniform(cls, L_enc, L_bot, L_dec, n_enc, K, IC, **kw):
        """Spec with ``n_enc`` identical encoder/decoder blocks and one growth rate."""
        return cls((L_enc,) * n_enc + (L_bot,) + (L_dec,) * n_enc, K, K, K, IC, **kw)


def size_chain(resolution, n_halvings):
    """Extents after 0..n_halvings ceil-halvings."""
    h, w = resolution
    chain = [(h, w)]
    for _ in range(n_halvings):
        h, w = ceil_half(h), ceil_half(w)
        chain.append((h, w))
    return chain


def code_dimension(resolution, n_dense_blocks):
    """Bottleneck extents (h, w) for a depth of ``n_dense_blocks`` dense blocks."""
    if n_dense_blocks < 1 or n_dense_blocks % 2 == 0:
        raise ValueError("number of dense blocks must be odd and >= 1")
    if min(resolution) < 1:
        raise ValueError("extent reached 0")
    return size_chain(resolution, 1 + (n_dense_blocks - 1) // 2)[-1]


def depth_for_code_pixels(resolution, pixels, max_blocks=31):
    """Smallest odd depth whose bottleneck has exactly ``pixels`` pixels."""
    for n in range(1, max_blocks + 1, 2):
        h, w = code_dimension(resolution, n)
        if h * w == pixels:
            return n
        if h * w == 1:
            break
    raise ValueError(f"code dimension of {pixels} px is not reachable at resolution {resolution}")


class FieldModel(Module):
    """A DeepEDH network for one output field at a fixed resolution."""

    def __init__(self, spec, resolution, role="pressure", seed=0, dtype=np.float32, solid_value=0.0):
        super().__init__()
        if role not in ROLES:
            raise ValueError(f"role must be one of {ROLES}")
        resolution = (int(resolution[0]), int(resolution[1]))
        n_enc = spec.n_enc
        self.chain = size_chain(resolution, n_enc + 1)
        if min(resolution) < 2 or self.chain[-2] == (1, 1):
            raise ValueError(f"resolution {resolution} too small for {spec.n_blocks} dense blocks")
        self.spec, self.role, self.resolution, self.seed = spec, role, resolution, seed
        self.dtype = np.dtype(dtype)
        # value the mask pins solid pixels to: the scaled image of a physical zero
        self.solid_value = float(solid_value)
        rng = np.random.default_rng(seed)
        self.dropout_rng = np.random.default_rng([seed, 1])

        def dense(c, L, K):
            return DenseBlock(c, DenseBlockSpec(L, K, spec.dropout), rng, self.dropout_rng, dtype)

        self.initial = InitialConv(spec.input_channels, spec.IC, rng, dtype)
        c = spec.IC
        self.enc_dense, self.enc_trans = ModuleList(), ModuleList()
        skip_channels = []
        for i in range(n_enc):
            block = dense(c, spec.L_dense[i], spec.K_enc)
            self.enc_dense.append(block)
            skip_channels.append(block.out_channels)
            trans = EncodeTransition(block.out_channels, rng, dtype)
            self.enc_trans.append(trans)
            c = trans.out_channels
        self.bottleneck = dense(c, spec.L_dense[n_enc], spec.K_bot)
        c = self.bottleneck.out_channels
        self.dec_trans, self.dec_dense = ModuleList(), ModuleList()
        self.output_paddings = []
        for i in range(n_enc):
            src, dst = self.chain[n_enc + 1 - i], self.chain[n_enc - i]
            op = (output_padding_for(src[0], dst[0]), output_padding_for(src[1], dst[1]))
            self.output_paddings.append(op)
            trans = DecodeTransition(c, op, rng, dtype=dtype)
            self.dec_trans.append(trans)
            c = trans.out_channels
            if spec.skip_connections:
                c += skip_channels[n_enc - 1 - i]
            block = dense(c, spec.L_dense[n_enc + 1 + i], spec.K_dec)
            self.dec_dense.append(block)
            c = block.out_channels
        self.final = final_decode(c, self.chain[1], self.chain[0], rng, dtype)
        self.output_paddings.append(self.final.output_padding)
        self.assign_names()

    @property
    def masked(self):
        return self.spec.output_mask and self.role != "temperature"

    @property
    def code_dimension(self):
        return self.chain[-1]

    def forward(self, x, training=None, trace=None):
        """Map (N, input_channels, n_y, n_x) to (N, 1, n_y, n_x).

        ``trace``, when a list, collects (stage name, activation shape) pairs.
        """
        if training is not None:
            self.train(training)
        if not isinstance(x, Tensor):
            x = Tensor(np.asarray(x, dtype=self.dtype))
        expected = (self.spec.input_channels,) + self.resolution
        if x.ndim != 4 or x.shape[1:] != expected:
            raise ValueError(f"expected input (N, {expected[0]}, {expected[1]}, {expected[2]}), got {x.shape}")

        def note(name, t):
            if trace is not None:
                trace.append((name, t.shape))
            return t

        h = note("initial", self.initial(x))
        skips = []
        for i, (block, trans) in enumerate(zip(self.enc_dense, self.enc_trans), 1):
            h = note(f"enc_dense{i}", block(h))
            skips.append(h)
            h = note(f"encode{i}", trans(h))
        h = note("bottleneck", self.bottleneck(h))
        for i, (trans, block) in enumerate(zip(self.dec_trans, self.dec_dense), 1):
            h = note(f"decode{i}", trans(h))
            if self.spec.skip_connections:
                h = F.concat_channels(h, skips[-i])
            h = note(f"dec_dense{i}", block(h))
        out = note("output", self.final(h))
        if self.masked:
            delta = (1.0 - x.data[:, :1]).astype(out.dtype)
            out = F.mul(out, Tensor(delta))
            if self.solid_value != 0.0:
                out = F.add(out, Tensor(((1.0 - delta) * self.solid_value).astype(out.dtype)))
        return out

    def predict(self, x, batch_size=16):
        """Eval-mode forward without graph recording, in batches."""
        self.eval()
        outs = []
        with no_grad():
            for s in range(0, len(x), batch_size):
                outs.append(self.forward(np.asarray(x[s:s + batch_size], dtype=self.dtype)).data)
        return np.concatenate(outs, axis=0)

    def config(self):
        return {"spec": self.spec.to_dict(), "resolution": list(self.resolution),
                "role": self.role, "seed": self.seed, "solid_value": self.solid_value}


def build_model(spec, resolution, role="pressure", seed=0, dtype=np.float32, solid_value=0.0):
    return FieldModel(spec, resolution, role, seed, dtype, solid_value)


def forward(model, x, training=False):
    return model.forward(x, training=training)


def param_count(model):
    """Trainable scalars: conv kernels, biases and batch-norm scale/shift."""
    return int(sum(p.size for p in model.parameters(trainable_only=True)))


def save_model_config(model_or_config, path):
    cfg = model_or_config.config() if isinstance(model_or_config, FieldModel) else model_or_config
    Path(path).write_text(json.dumps(cfg, indent=1))


def load_model_config(path):
    cfg = json.loads(Path(path).read_text())
    return {
        "spec": ModelSpec.from_dict(cfg["spec"]),
        "resolution": tuple(cfg["resolution"]),
        "role": cfg.get("role", "pressure"),
        "seed": cfg.get("seed", 0),
        "solid_value": cfg.get("solid_value", 0.0),
    }


def model_from_config(path_or_dict, dtype=np.float32):
    cfg = load_model_config(path_or_dict) if not isinstance(path_or_dict, dict) else path_or_dict
    if isinstance(cfg["spec"], dict):
        cfg = dict(cfg, spec=ModelSpec.from_dict(cfg["spec"]))
    return build_model(cfg["spec"], cfg["resolution"], cfg["role"], cfg.get("seed", 0), dtype,
                       cfg.get("solid_value", 0.0))


@dataclass
class VelocityAdapter:
    """Affine map from velocity-model output units to temperature-model input units."""

    gain: float = 1.0
    offset: float = 0.0

    def __call__(self, v):
        return v * self.gain + self.offset


def two_stage_predict(geometry, velocity_model, temperature_model, adapter=None,
                      freeze_velocity=True, training=False):
    """Temperature from geometry via the velocity prediction as a second channel.

    With ``freeze_velocity`` the velocity network runs in eval mode without
    recording a graph, so no gradient can reach its parameters.
    """
    if temperature_model.spec.input_channels != 2:
        raise ValueError("temperature model must take 2 input channels (geometry, velocity)")
    if velocity_model.spec.input_channels != 1:
        raise ValueError("velocity model must take the geometry channel only")
    if not isinstance(geometry, Tensor):
        geometry = Tensor(np.asarray(geometry, dtype=temperature_model.dtype))
    if freeze_velocity:
        velocity_model.eval()
        with no_grad():
            vel = velocity_model.forward(geometry)
    else:
        vel = velocity_model.forward(geometry, training=training)
    if adapter is not None:
        vel = F.add(F.mul(vel, float(adapter.gain)), float(adapter.offset))
    if freeze_velocity:
        vel = Tensor(vel.data.astype(temperature_model.dtype))
    x = F.concat_channels(geometry, vel)
    return temperature_model.forward(x, training=training)
