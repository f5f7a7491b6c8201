"""Parameter containers: a small Module base and the three layer types DeepEDH uses."""

import numpy as np

from . import functional as F
from .tensor import Parameter


class Module:
    """Holds parameters and child modules in registration order."""

    def __init__(self):
        object.__setattr__(self, "_children", {})
        object.__setattr__(self, "training", True)

    def __setattr__(self, name, value):
        if isinstance(value, (Parameter, Module)):
            self._children[name] = value
        object.__setattr__(self, name, value)

    def add_module(self, name, module):
        setattr(self, name, module)
        return module

    def named_parameters(self, prefix=""):
        for name, child in self._children.items():
            full = f"{prefix}{name}"
            if isinstance(child, Parameter):
                yield full, child
            else:
                yield from child.named_parameters(full + ".")

    def parameters(self, trainable_only=False):
        return [p for _, p in self.named_parameters() if p.trainable or not trainable_only]

    def modules(self):
        yield self
        for child in self._children.values():
            if isinstance(child, Module):
                yield from child.modules()

    def assign_names(self, prefix=""):
        for name, p in self.named_parameters(prefix):
            p.name = name
        return self

    def train(self, mode=True):
        for m in self.modules():
            object.__setattr__(m, "training", bool(mode))
        return self

    def eval(self):
        return self.train(False)

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


class ModuleList(Module):
    def __init__(self, items=()):
        super().__init__()
        self._items = []
        for m in items:
            self.append(m)

    def append(self, module):
        setattr(self, str(len(self._items)), module)
        self._items.append(module)

    def __iter__(self):
        return iter(self._items)

    def __len__(self):
        return len(self._items)

    def __getitem__(self, i):
        return self._items[i]


def he_normal(rng, shape, fan_in, dtype):
    return (rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)).astype(dtype)


class Conv2d(Module):
    def __init__(self, in_channels, out_channels, k, stride=1, padding=0, bias=False,
                 rng=None, dtype=np.float32):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng()
        self.stride, self.padding = stride, padding
        shape = (out_channels, in_channels, k, k)
        self.weight = Parameter(he_normal(rng, shape, in_channels * k * k, dtype), "conv-kernel")
        self.bias = Parameter(np.zeros(out_channels, dtype), "bias") if bias else None

    def forward(self, x):
        return F.conv2d(x, self.weight, self.bias, self.stride, self.padding)


class ConvTranspose2d(Module):
    def __init__(self, in_channels, out_channels, k, stride=1, padding=0, output_padding=(0, 0),
                 bias=False, rng=None, dtype=np.float32):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng()
        self.stride, self.padding = stride, padding
        self.output_padding = tuple(output_padding)
        shape = (in_channels, out_channels, k, k)
        self.weight = Parameter(he_normal(rng, shape, in_channels * k * k, dtype), "conv-kernel")
        self.bias = Parameter(np.zeros(out_channels, dtype), "bias") if bias else None

    def forward(self, x):
        return F.conv_transpose2d(x, self.weight, self.bias, self.stride, self.padding,
                                  self.output_padding)


class BatchNorm2d(Module):
    def __init__(self, channels, eps=1e-5, momentum=0.1, dtype=np.float32):
        super().__init__()
        self.eps, self.momentum = eps, momentum
        self.scale = Parameter(np.ones(channels, dtype), "bn-scale")
        self.shift = Parameter(np.zeros(channels, dtype), "bn-shift")
        self.running_mean = Parameter(np.zeros(channels, dtype), "bn-running-stat")
        self.running_var = Parameter(np.ones(channels, dtype), "bn-running-stat")

    def forward(self, x):
        return F.batch_norm(x, self.scale, self.shift, self.running_mean, self.running_var,
                            self.training, self.eps, self.momentum)
