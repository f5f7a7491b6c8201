"""Sweeps, Hyperband search and reporting."""

from .hyperband import DEFAULT_SPACE, deepedh_evaluator, hyperband_search, sample_config, successive_halving
from .report import loss_curve_plot, metric_plot, report, run_triptych, triptych
from .sweeps import (
    AXES,
    FLUX_FACTORS,
    ModelTemplate,
    SweepSpec,
    cell_seed,
    load_csv,
    plan_cells,
    run_cell,
    run_sweep,
    subset_training,
    sweep_code_dimension,
    sweep_dataset_size,
    sweep_flux,
    sweep_resolution,
    write_csv,
)
