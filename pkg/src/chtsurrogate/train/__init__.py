"""Training loop, optimizer, scheduler and evaluation metrics."""

from .data import ROLE_FIELD, FieldData
from .loop import MetricsRecord, TrainConfig, evaluate_model, train, write_run
from .losses import l2_penalty_value, mse_l2_loss
from .metrics import error_map, evaluate, r2, rmse, scc
from .optim import Adam, AdamState, adam_step
from .scheduler import PlateauScheduler, plateau_scheduler
