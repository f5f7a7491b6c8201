from .blocks import (
    DecodeTransition,
    DenseBlock,
    DenseBlockSpec,
    EncodeTransition,
    InitialConv,
    final_decode,
    output_padding_for,
)
from .model import (
    FieldModel,
    ModelSpec,
    VelocityAdapter,
    build_model,
    code_dimension,
    depth_for_code_pixels,
    forward,
    load_model_config,
    model_from_config,
    param_count,
    save_model_config,
    size_chain,
    two_stage_predict,
)

__all__ = [
    "DenseBlockSpec", "DenseBlock", "EncodeTransition", "DecodeTransition", "InitialConv",
    "final_decode", "output_padding_for", "ModelSpec", "FieldModel", "build_model", "forward",
    "code_dimension", "depth_for_code_pixels", "size_chain", "param_count", "two_stage_predict",
    "VelocityAdapter", "save_model_config", "load_model_config", "model_from_config",
]
