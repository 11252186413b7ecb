"""Desk-scale end-to-end driving planner.

A one-shot policy proposes a trajectory from an ego-centric raster
observation; a learned latent world model rolls the scene forward along the
plan segment by segment; a summarizer turns the rollout into waypoint
offsets; and a difficulty gate decides per frame whether that extra
reasoning is worth the latency.  Everything runs on a hand-rolled float64
reverse-mode autodiff engine and a bundled synthetic 2D driving simulator.
"""

from .config import (RunConfig, config_digest, load_config, parse_config,
                     serialize_config)

__version__ = "0.1.0"

__all__ = [
    "RunConfig", "config_digest", "load_config", "parse_config",
    "serialize_config", "__version__",
]
