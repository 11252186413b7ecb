"""Run configuration: flat key=value files, typed defaults, and digests.

Every tunable constant in the package lives here.  A config file is a plain
text file with one ``key = value`` assignment per line (``#`` starts a
comment).  Unknown keys are rejected so that a stale config cannot silently
drift against the code.

The *digest* identifies everything that affects trained parameters and
simulator content: model architecture, hyperparameters, simulator constants
and training-data settings.  Evaluation-only settings (scenario seeds,
horizon, output paths) are excluded so one checkpoint can be evaluated under
different benchmark selections without tripping the compatibility check.
"""

from __future__ import annotations

import dataclasses
import hashlib
import os
from dataclasses import dataclass, fields

ENV_CONFIG_PATH = "THINKDRIVE_CONFIG"

# Fields that do not influence training results or dataset contents.
_EVAL_ONLY_FIELDS = {
    "eval_scenarios",
    "eval_seed",
    "eval_easy_fraction",
    "eval_horizon_ticks",
}


class ConfigError(ValueError):
    """Raised for unknown keys, malformed lines, or invalid field values."""


@dataclass
class RunConfig:
    # --- simulator ---
    dt: float = 0.5                 # seconds per tick
    horizon_steps: int = 8          # T: waypoints per plan
    grid_size: int = 32             # raster cells per side
    window_m: float = 48.0          # metric extent covered by the raster
    v_max: float = 12.0             # speed clamp, m/s
    accel_max: float = 4.0          # |a| clamp, m/s^2
    yaw_rate_max: float = 1.5       # |omega| clamp, rad/s
    jerk_max: float = 8.0           # comfort bound, m/s^3
    ttc_window_s: float = 1.0       # constant-velocity projection horizon
    ego_length: float = 4.2
    ego_width: float = 1.8
    episode_ticks: int = 40

    # --- model architecture ---
    latent_tokens: int = 16         # L
    channels: int = 64              # C
    heads: int = 4                  # H
    encoder_layers: int = 1
    world_model_layers: int = 2
    ff_mult: int = 2                # transformer feed-forward expansion
    mlp_hidden: int = 64
    traj_scale: float = 30.0        # metres represented by one raw head unit
    offset_scale: float = 3.0       # metres per raw refinement-offset unit
    include_z0: bool = True         # summarizer sees the pre-rollout latent
    l1_reduction: str = "sum"       # "sum" (default) or "mean" over elements

    # --- objective / gating ---
    alpha: float = 0.25             # gain threshold for the thinking flag
    lambda_lat: float = 0.1
    lambda_auto: float = 0.1
    epsilon: float = 1e-6           # stabiliser in the improvement ratio
    cot_steps: int = 4              # K; segment length N = horizon_steps // K
    tau: float = 0.5                # inference threshold on the difficulty score

    # --- training ---
    learning_rate: float = 1e-3
    epochs: int = 12
    batch_size: int = 32
    train_seed: int = 0
    log_interval: int = 10

    # --- training data ---
    train_keyframes: int = 2000
    easy_fraction: float = 0.7
    data_seed: int = 1000           # first scenario seed for the training set

    # --- evaluation (excluded from the digest) ---
    eval_scenarios: int = 200
    eval_seed: int = 900000         # first scenario seed for the benchmark
    eval_easy_fraction: float = 0.5
    eval_horizon_ticks: int = 40

    @property
    def segment_length(self) -> int:
        """N: waypoints per reasoning segment."""
        return self.horizon_steps // self.cot_steps

    def validate(self) -> "RunConfig":
        if self.cot_steps < 1 or self.horizon_steps % self.cot_steps != 0:
            raise ConfigError(
                f"horizon_steps={self.horizon_steps} is not divisible by "
                f"cot_steps={self.cot_steps}"
            )
        if self.channels % self.heads != 0:
            raise ConfigError(
                f"channels={self.channels} not divisible by heads={self.heads}"
            )
        side = int(round(self.latent_tokens ** 0.5))
        if side * side != self.latent_tokens:
            raise ConfigError("latent_tokens must be a perfect square (patch grid)")
        if self.grid_size % side != 0:
            raise ConfigError(
                f"grid_size={self.grid_size} not divisible by patch grid {side}"
            )
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must lie in (0, 1)")
        if self.epsilon <= 0:
            raise ConfigError("epsilon must be positive")
        if self.lambda_lat < 0 or self.lambda_auto < 0:
            raise ConfigError("loss weights must be non-negative")
        if self.l1_reduction not in ("sum", "mean"):
            raise ConfigError("l1_reduction must be 'sum' or 'mean'")
        if not 0.0 <= self.easy_fraction <= 1.0:
            raise ConfigError("easy_fraction must lie in [0, 1]")
        if self.episode_ticks <= self.horizon_steps:
            raise ConfigError("episode_ticks must exceed horizon_steps")
        return self


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _parse_value(key: str, raw: str):
    ftype = _FIELD_TYPES[key]
    raw = raw.strip()
    if ftype == "bool":
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    if ftype == "int":
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigError(f"{key}: expected an integer, got {raw!r}") from exc
    if ftype == "float":
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigError(f"{key}: expected a number, got {raw!r}") from exc
    return raw


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config(text: str) -> RunConfig:
    """Parse ``key = value`` lines into a validated RunConfig."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = stripped.split("=", 1)
        key = key.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate config key {key!r}")
        values[key] = _parse_value(key, raw)
    return RunConfig(**values).validate()


def serialize_config(cfg: RunConfig) -> str:
    """Canonical text form; parse(serialize(cfg)) reproduces cfg exactly."""
    lines = [
        f"{f.name} = {_format_value(getattr(cfg, f.name))}" for f in fields(RunConfig)
    ]
    return "\n".join(lines) + "\n"


def load_config(path: str | None = None, overrides: list[str] | None = None) -> RunConfig:
    """Load a config file (or defaults) and apply ``key=value`` overrides.

    Resolution order: explicit ``path`` argument, then the environment
    variable ``THINKDRIVE_CONFIG``, then built-in defaults.
    """
    if path is None:
        path = os.environ.get(ENV_CONFIG_PATH)
    if path:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = parse_config(fh.read())
    else:
        cfg = RunConfig()
    if overrides:
        cfg = apply_overrides(cfg, overrides)
    return cfg.validate()


def apply_overrides(cfg: RunConfig, overrides: list[str]) -> RunConfig:
    updates = {}
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        key = key.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown config key {key!r}")
        updates[key] = _parse_value(key, raw)
    return dataclasses.replace(cfg, **updates).validate()


def config_digest(cfg: RunConfig) -> str:
    """Hex digest over every field that affects training or dataset content."""
    lines = [
        f"{f.name} = {_format_value(getattr(cfg, f.name))}"
        for f in fields(RunConfig)
        if f.name not in _EVAL_ONLY_FIELDS
    ]
    blob = "\n".join(lines).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()
