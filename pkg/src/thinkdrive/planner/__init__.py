"""Planner pipeline: networks, objective, training, inference, checkpoints."""

from .checkpoint import (Checkpoint, CheckpointError, load_checkpoint,
                         load_planner, planner_from_checkpoint,
                         save_checkpoint)
from .inference import MODES, InferResult, ThinkDecision, infer
from .model import Planner, patchify, segment_trajectory
from .objective import (auto_think_loss, l1_error, latent_consistency_loss,
                        refinement_gain, thinking_flag, total_loss,
                        trajectory_loss)
from .training import (MetricsLog, StepMetrics, TrainingDiverged,
                       encode_targets, fit, make_batch, train_step)

__all__ = [
    "Checkpoint", "CheckpointError", "InferResult", "MODES", "MetricsLog",
    "Planner", "StepMetrics", "ThinkDecision", "TrainingDiverged",
    "auto_think_loss", "encode_targets", "fit", "infer", "l1_error",
    "latent_consistency_loss", "load_checkpoint", "load_planner",
    "make_batch", "patchify", "planner_from_checkpoint", "refinement_gain",
    "save_checkpoint", "segment_trajectory", "thinking_flag", "total_loss",
    "train_step", "trajectory_loss",
]
