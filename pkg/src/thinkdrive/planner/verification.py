"""End-to-end gradient verification on a miniature configuration.

The check compares the recorded-graph gradient of the full training
objective against central finite differences, per parameter coordinate.
Latent-consistency targets are precomputed and held fixed: they are data by
definition (gradient is stopped through them), so the function being
differentiated closes over them.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from ..autodiff import GradCheckReport, grad_check
from ..config import RunConfig
from .model import Planner
from .training import batch_loss, encode_targets

MINIATURE_OVERRIDES = dict(
    grid_size=8,
    latent_tokens=4,
    channels=16,
    heads=2,
    mlp_hidden=8,
    encoder_layers=1,
    world_model_layers=1,
    ff_mult=2,
    batch_size=2,
)


def miniature_config(cfg: RunConfig | None = None) -> RunConfig:
    """Shrink a config to gradient-check size, keeping the objective intact."""
    cfg = RunConfig() if cfg is None else cfg
    return dataclasses.replace(cfg, **MINIATURE_OVERRIDES).validate()


def synthetic_batch(cfg: RunConfig, batch: int, seed: int) -> dict:
    """Random batch in the observation domain: grids in [-1, 1], plausible labels."""
    rng = np.random.default_rng(seed)
    g, t = cfg.grid_size, cfg.horizon_steps
    labels = np.empty((batch, t, 3))
    labels[:, :, 0] = np.cumsum(rng.uniform(0.5, 3.0, (batch, t)), axis=1)
    labels[:, :, 1] = rng.uniform(-2.0, 2.0, (batch, t))
    labels[:, :, 2] = rng.uniform(-0.5, 0.5, (batch, t))
    return {
        "grids": rng.uniform(-1.0, 1.0, (batch, g, g, 5)),
        "speeds": rng.uniform(0.0, cfg.v_max, batch),
        "labels": labels,
        "future_grids": rng.uniform(-1.0, 1.0, (batch, t, g, g, 5)),
        "future_speeds": rng.uniform(0.0, cfg.v_max, (batch, t)),
    }


def end_to_end_grad_check(cfg: RunConfig | None = None, h: float = 1e-5,
                          tol: float = 1e-4, seed: int = 0) -> GradCheckReport:
    """Finite-difference check of the whole objective on the miniature model."""
    mini = miniature_config(cfg)
    planner = Planner(mini, seed=seed)
    batch = synthetic_batch(mini, mini.batch_size, seed + 1)
    targets = encode_targets(planner, batch)

    def f():
        return batch_loss(planner, batch, targets)[0]

    return grad_check(f, planner.params(), h=h, tol=tol)
