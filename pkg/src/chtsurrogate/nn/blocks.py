"""DeepEDH building blocks with exact channel and spatial bookkeeping.

Every block is pre-activation (batch norm, then ReLU, then convolution) and
convolutions carry no bias; the trainable set is kernels plus batch-norm
scale and shift.
"""

from dataclasses import dataclass

import numpy as np

from ..autodiff import functional as F
from ..autodiff.layers import BatchNorm2d, Conv2d, ConvTranspose2d, Module, ModuleList


def ceil_half(n):
    return (n + 1) // 2


def output_padding_for(h, target):
    """Output padding that makes a k3/s2/p1 transpose conv map ``h`` to ``target``."""
    op = target - (2 * h - 1)
    if op not in (0, 1):
        raise ValueError(f"extent {target} is not reachable from {h} (need {2 * h - 1} or {2 * h})")
    return op


@dataclass(frozen=True)
class DenseBlockSpec:
    L: int
    K: int
    dropout: float = 0.0

    def __post_init__(self):
        if self.L < 0 or self.K < 1 or not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"invalid dense block spec {self}")

    def out_channels(self, c):
        return c + self.K * self.L


class _PreAct(Module):
    """bn -> relu -> conv."""

    def __init__(self, conv, channels, dtype):
        super().__init__()
        self.bn = BatchNorm2d(channels, dtype=dtype)
        self.conv = conv

    def forward(self, x):
        return self.conv(F.relu(self.bn(x)))


class DenseLayer(Module):
    def __init__(self, in_channels, K, dropout, rng, dropout_rng, dtype):
        super().__init__()
        self.unit = _PreAct(Conv2d(in_channels, K, 3, 1, 1, rng=rng, dtype=dtype), in_channels, dtype)
        self.p = dropout
        self._drop_rng = dropout_rng

    def forward(self, x):
        return F.dropout(self.unit(x), self.p, self.training, self._drop_rng)


class DenseBlock(Module):
    """L layers; layer i sees C + K(i-1) channels and appends K more."""

    def __init__(self, in_channels, spec, rng, dropout_rng=None, dtype=np.float32):
        super().__init__()
        self.spec = spec
        self.in_channels = in_channels
        self.out_channels = spec.out_channels(in_channels)
        dropout_rng = dropout_rng if dropout_rng is not None else np.random.default_rng(0)
        self.layers = ModuleList(
            DenseLayer(in_channels + spec.K * i, spec.K, spec.dropout, rng, dropout_rng, dtype)
            for i in range(spec.L)
        )

    def forward(self, x):
        if x.shape[1] != self.in_channels:
            raise ValueError(f"dense block built for {self.in_channels} channels, got {x.shape[1]}")
        feats = [x]
        for layer in self.layers:
            cur = feats[0] if len(feats) == 1 else F.concat_channels(feats)
            feats.append(layer(cur))
        return feats[0] if len(feats) == 1 else F.concat_channels(feats)


class EncodeTransition(Module):
    """Halve channels (floor) with a 1x1 conv, then halve space (ceil) with a k3/s2 conv."""

    def __init__(self, in_channels, rng, dtype=np.float32):
        super().__init__()
        if in_channels < 2:
            raise ValueError("encode transition needs at least 2 channels")
        half = in_channels // 2
        self.in_channels, self.out_channels = in_channels, half
        self.reduce = _PreAct(Conv2d(in_channels, half, 1, rng=rng, dtype=dtype), in_channels, dtype)
        self.down = _PreAct(Conv2d(half, half, 3, 2, 1, rng=rng, dtype=dtype), half, dtype)

    def forward(self, x):
        return self.down(self.reduce(x))


class DecodeTransition(Module):
    """Halve channels with a 1x1 conv, then double space with a k3/s2/p1 transpose conv.

    ``output_padding`` is fixed at construction from the encoder size chain.
    With ``out_channels`` set (final layer) the transpose conv emits that many
    maps; the 1x1 stage is dropped when halving would leave no channels.
    """

    def __init__(self, in_channels, output_padding, rng, out_channels=None, dtype=np.float32):
        super().__init__()
        half = in_channels // 2
        if out_channels is None and half < 1:
            raise ValueError("decode transition needs at least 2 channels")
        self.in_channels = in_channels
        self.output_padding = tuple(int(v) for v in output_padding)
        mid = in_channels
        if half >= 1:
            self.reduce = _PreAct(Conv2d(in_channels, half, 1, rng=rng, dtype=dtype), in_channels, dtype)
            mid = half
        else:
            self.reduce = None
        self.out_channels = half if out_channels is None else out_channels
        up = ConvTranspose2d(mid, self.out_channels, 3, 2, 1, self.output_padding, rng=rng, dtype=dtype)
        self.up = _PreAct(up, mid, dtype)

    def forward(self, x):
        if self.reduce is not None:
            x = self.reduce(x)
        return self.up(x)


class InitialConv(Module):
    """k7/s2/p3 convolution to IC feature maps."""

    def __init__(self, in_channels, IC, rng, dtype=np.float32):
        super().__init__()
        if IC < 1:
            raise ValueError("IC must be >= 1")
        self.out_channels = IC
        self.conv = Conv2d(in_channels, IC, 7, 2, 3, rng=rng, dtype=dtype)

    def forward(self, x):
        return self.conv(x)


def final_decode(in_channels, hw, target_hw, rng, dtype=np.float32):
    """Build the last decode layer mapping (C, h, w) to (1, target_h, target_w)."""
    op = (output_padding_for(hw[0], target_hw[0]), output_padding_for(hw[1], target_hw[1]))
    return DecodeTransition(in_channels, op, rng, out_channels=1, dtype=dtype)
