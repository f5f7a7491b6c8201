from . import functional
from .checkpoint import load_checkpoint, save_checkpoint
from .functional import (
    add,
    batch_norm,
    concat_channels,
    conv2d,
    conv_transpose2d,
    dropout,
    elementwise_mul,
    mean,
    mul,
    relu,
    square,
    sub,
)
from .layers import BatchNorm2d, Conv2d, ConvTranspose2d, Module, ModuleList
from .tensor import Parameter, Tape, Tensor, is_grad_enabled, no_grad, set_debug

__all__ = [
    "Tensor", "Parameter", "Tape", "no_grad", "is_grad_enabled", "set_debug",
    "functional", "add", "sub", "mul", "elementwise_mul", "square", "mean", "relu",
    "dropout", "concat_channels", "conv2d", "conv_transpose2d", "batch_norm",
    "Module", "ModuleList", "Conv2d", "ConvTranspose2d", "BatchNorm2d",
    "save_checkpoint", "load_checkpoint",
]
