"""Single-frame inference with mode selection and stage timing.

Modes:
  * ``auto``  — run the difficulty gate; think only when the score reaches
    the threshold tau.
  * ``all``   — always roll out and refine (the always-think variant).
  * ``none``  — never think; return the one-shot proposal (the plain
    backbone behaviour; bitwise equal to the policy head output).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..config import RunConfig
from ..simworld.raster import Observation
from .model import Planner

MODES = ("auto", "all", "none")


@dataclass(frozen=True)
class ThinkDecision:
    score: float            # difficulty score in [0, 1]
    flag: bool              # True when the thinking branch ran
    mode: str               # selected mode: "thinking" or "instant"
    gain: float | None = None  # improvement ratio; only known at train time


@dataclass
class InferResult:
    trajectory: np.ndarray       # (T, 3) executed plan, ego frame
    initial: np.ndarray          # (T, 3) one-shot proposal
    decision: ThinkDecision
    timing: dict[str, float] = field(default_factory=dict)


def infer(planner: Planner, obs: Observation, mode: str = "auto",
          tau: float | None = None) -> InferResult:
    """Plan one frame. Read-only over the parameters; safe to run anywhere."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    cfg: RunConfig = planner.cfg
    tau = cfg.tau if tau is None else tau
    timing: dict[str, float] = {}
    t_begin = time.perf_counter()

    t0 = time.perf_counter()
    z = planner.encode_observation(obs)
    timing["encode"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    w = planner.propose_trajectory(z)
    initial = np.array(w.data[0])
    timing["propose"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    score = float(planner.think_score(z).data[0])
    timing["gate"] = time.perf_counter() - t0

    if mode == "all":
        think = True
    elif mode == "none":
        think = False
    else:
        think = score >= tau

    if think:
        t0 = time.perf_counter()
        chain = planner.cot_rollout(z, w)
        timing["rollout"] = time.perf_counter() - t0
        t0 = time.perf_counter()
        refined = planner.summarize(chain, w)
        timing["summarize"] = time.perf_counter() - t0
        trajectory = np.array(refined.data[0])
    else:
        timing["rollout"] = 0.0
        timing["summarize"] = 0.0
        trajectory = initial

    timing["total"] = time.perf_counter() - t_begin
    decision = ThinkDecision(
        score=score,
        flag=think,
        mode="thinking" if think else "instant",
    )
    return InferResult(trajectory=trajectory, initial=initial,
                       decision=decision, timing=timing)
