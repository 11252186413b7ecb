"""Training loop: gated imitation with latent consistency and gate supervision.

Per step (whole batch at once):
  1. encode the observation and propose a trajectory,
  2. segment it, roll the world model along the segments, refine via the
     summarizer,
  3. score both trajectories against the expert label, derive the
     improvement ratio and thinking flag,
  4. encode the matching future observations into gradient-free targets,
  5. combine the gated trajectory loss, latent consistency loss and gate
     cross-entropy, backprop, Adam step.

Training is sequential and fully deterministic for a fixed seed: shuffles
are seeded per epoch, so a resumed run replays the exact schedule.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, fields

import numpy as np

from ..autodiff import Tape, recording
from ..config import RunConfig
from ..optim import AdamState, adam_step
from ..simworld.dataset import Dataset
from .model import Planner
from .objective import (auto_think_loss, l1_error, latent_consistency_loss,
                        refinement_gain, thinking_flag, total_loss,
                        trajectory_loss)


class TrainingDiverged(RuntimeError):
    """Loss became NaN/Inf; the last good checkpoint stays on disk."""


@dataclass
class StepMetrics:
    step: int
    loss: float
    l_traj: float
    l_lat: float
    l_auto: float
    mean_gain: float
    think_rate: float

    @staticmethod
    def csv_header() -> list[str]:
        return [f.name for f in fields(StepMetrics)]

    def csv_row(self) -> list:
        return [getattr(self, f.name) for f in fields(StepMetrics)]


def make_batch(dataset: Dataset, indices: np.ndarray) -> dict:
    return {
        "grids": dataset.grids[indices],
        "speeds": dataset.speeds[indices],
        "labels": dataset.labels[indices],
        "future_grids": dataset.future_grids[indices],
        "future_speeds": dataset.future_speeds[indices],
    }


def encode_targets(planner: Planner, batch: dict) -> list[np.ndarray]:
    """Gradient-free latents of the k*N-tick future observations."""
    cfg = planner.cfg
    k, n = cfg.cot_steps, cfg.segment_length
    ticks = [i * n - 1 for i in range(1, k + 1)]  # future axis is t+1 .. t+T
    fg = batch["future_grids"][:, ticks]
    fs = batch["future_speeds"][:, ticks]
    b = fg.shape[0]
    flat_g = fg.reshape(b * k, *fg.shape[2:])
    flat_s = fs.reshape(b * k)
    z = planner.encode_scene(flat_g, flat_s).data
    z = z.reshape(b, k, cfg.latent_tokens, cfg.channels)
    return [z[:, i] for i in range(k)]


def batch_loss(planner: Planner, batch: dict,
               targets: list[np.ndarray] | None = None) -> tuple:
    """Mean objective over a batch plus the per-term diagnostics.

    ``targets`` may be precomputed; they are data (no gradient flows through
    them), so a caller doing finite differences must hold them fixed.
    """
    cfg = planner.cfg
    reduction = cfg.l1_reduction
    if targets is None:
        targets = encode_targets(planner, batch)

    z = planner.encode_scene(batch["grids"], batch["speeds"])
    w = planner.propose_trajectory(z)
    chain = planner.cot_rollout(z, w)
    w_ref = planner.summarize(chain, w)

    e_init = l1_error(w, batch["labels"], reduction)
    e_ref = l1_error(w_ref, batch["labels"], reduction)
    gain = refinement_gain(e_init.data, e_ref.data, cfg.epsilon)
    flag = thinking_flag(gain, cfg.alpha).astype(np.float64)

    l_lat = latent_consistency_loss(chain, targets, reduction)
    l_traj = trajectory_loss(flag, e_ref, e_init)
    score = planner.think_score(z)
    l_auto = auto_think_loss(score, flag)
    per_sample = total_loss(l_traj, l_lat, l_auto,
                            cfg.lambda_lat, cfg.lambda_auto)
    loss = per_sample.mean()
    diag = {
        "l_traj": float(l_traj.mean().data),
        "l_lat": float(l_lat.mean().data),
        "l_auto": float(l_auto.mean().data),
        "mean_gain": float(np.mean(gain)),
        "think_rate": float(np.mean(flag)),
    }
    return loss, diag


def train_step(planner: Planner, batch: dict, adam: AdamState,
               cfg: RunConfig | None = None) -> StepMetrics:
    """One optimisation step over a batch; returns the metrics record."""
    targets = encode_targets(planner, batch)  # outside the tape: no gradient
    tape = Tape()
    with recording(tape):
        loss, diag = batch_loss(planner, batch, targets)

    if not math.isfinite(float(loss.data)):
        raise TrainingDiverged(
            f"non-finite loss at step {adam.step + 1}: "
            f"l_traj={diag['l_traj']:.4g} l_lat={diag['l_lat']:.4g} "
            f"l_auto={diag['l_auto']:.4g}"
        )
    planner.registry.zero_grad()
    tape.backward(loss)
    adam_step(planner.params(), adam)
    return StepMetrics(
        step=adam.step,
        loss=float(loss.data),
        l_traj=diag["l_traj"],
        l_lat=diag["l_lat"],
        l_auto=diag["l_auto"],
        mean_gain=diag["mean_gain"],
        think_rate=diag["think_rate"],
    )


class MetricsLog:
    """CSV accumulator for sampled step metrics."""

    def __init__(self, path: str | None):
        self.path = path
        self.rows: list[StepMetrics] = []

    def append(self, m: StepMetrics) -> None:
        self.rows.append(m)

    def write(self) -> None:
        if self.path is None:
            return
        with open(self.path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(StepMetrics.csv_header())
            for m in self.rows:
                writer.writerow(m.csv_row())


def fit(planner: Planner, dataset: Dataset, adam: AdamState,
        epochs: int | None = None,
        metrics_path: str | None = None,
        checkpoint_fn=None) -> list[StepMetrics]:
    """Run the epoch loop; returns the logged metrics rows.

    ``checkpoint_fn(planner, adam)`` is invoked after every epoch (and
    before raising on divergence), so the last good state is always saved.
    Resuming: the epoch schedule is derived from the Adam step counter, so a
    restart from a checkpoint replays the remaining epochs exactly.
    """
    cfg = planner.cfg
    epochs = cfg.epochs if epochs is None else epochs
    n = len(dataset)
    batch = min(cfg.batch_size, n)
    steps_per_epoch = math.ceil(n / batch)
    start_epoch = adam.step // steps_per_epoch
    log = MetricsLog(metrics_path)
    rows: list[StepMetrics] = []
    try:
        for epoch in range(start_epoch, epochs):
            order = np.random.default_rng(
                [cfg.train_seed, epoch]).permutation(n)
            for i in range(steps_per_epoch):
                idx = order[i * batch:(i + 1) * batch]
                metrics = train_step(planner, make_batch(dataset, idx), adam)
                rows.append(metrics)
                if metrics.step % cfg.log_interval == 0:
                    log.append(metrics)
            if checkpoint_fn is not None:
                checkpoint_fn(planner, adam)
    finally:
        log.write()
    return rows
