"""Rasterization, scaling, splitting and on-disk storage of field datasets."""

from .assemble import assemble_dataset, sample_images
from .dataset import (
    DatasetError,
    DatasetManifest,
    load_dataset,
    load_manifest,
    save_dataset,
    split_dataset,
    stack,
)
from .raster import (
    GridField,
    UnstructuredMesh,
    coverage,
    disk_rect_area,
    geometry_to_image,
    ny_for,
    rasterize,
    rasterize_values,
)
from .scalers import INPUT_SCALERS, TARGET_SCALERS, ScalerParams, apply_scaler, fit_scaler, invert_scaler
