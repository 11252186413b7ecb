"""Ego-centric raster observations.

The grid covers a square metric window centred on the ego, axes aligned with
the ego heading: grid axis 0 runs along +x (forward), axis 1 along +y
(left).  Cell (i, j) spans

    x in [(i - G/2) * cell, (i + 1 - G/2) * cell)
    y in [(j - G/2) * cell, (j + 1 - G/2) * cell)

with cell = window / G, so the ego origin sits at the corner of the four
central cells and belongs to cell (G/2, G/2) by the half-open convention.

Channels: 0 drivable corridor, 1 agent occupancy, 2 agent velocity x,
3 agent velocity y (ego frame, normalised by v_max), 4 route line.  Masks
are exactly 0/1; velocity channels are clipped to [-1, 1].  Grids are
float32 so stored datasets round-trip bitwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import world_to_frame
from .scenarios import Scenario
from .world import WorldState

CHANNELS = 5
CH_DRIVABLE, CH_OCCUPANCY, CH_VEL_X, CH_VEL_Y, CH_ROUTE = range(CHANNELS)


@dataclass(frozen=True)
class Observation:
    grid: np.ndarray   # (G, G, CHANNELS) float32
    speed: float       # ego speed, m/s


def _cell_centers(grid_size: int, window_m: float) -> np.ndarray:
    cell = window_m / grid_size
    coords = (np.arange(grid_size) - grid_size / 2 + 0.5) * cell
    xs, ys = np.meshgrid(coords, coords, indexing="ij")
    return np.stack([xs, ys], axis=-1)  # (G, G, 2), ego frame


def render_observation(scenario: Scenario, state: WorldState,
                       grid_size: int = 32, window_m: float = 48.0,
                       v_max: float = 12.0) -> Observation:
    """Rasterise the world around the ego. Deterministic."""
    cell = window_m / grid_size
    centers = _cell_centers(grid_size, window_m).reshape(-1, 2)
    rot = np.array([
        [math.cos(state.ego_theta), -math.sin(state.ego_theta)],
        [math.sin(state.ego_theta), math.cos(state.ego_theta)],
    ])
    world_pts = centers @ rot.T + state.ego_pos

    grid = np.zeros((grid_size * grid_size, CHANNELS), dtype=np.float64)
    dist = scenario.route.distance_field(world_pts)
    grid[:, CH_DRIVABLE] = (dist <= scenario.half_width).astype(np.float64)
    grid[:, CH_ROUTE] = (dist <= 0.75 * cell).astype(np.float64)

    for a_state, agent in zip(state.agents, scenario.agents):
        ax, ay, atheta = a_state[0], a_state[1], a_state[2]
        length, width = agent.dims
        local = world_to_frame(world_pts, np.array([ax, ay]), atheta)
        inside = (np.abs(local[:, 0]) <= 0.5 * length) & \
                 (np.abs(local[:, 1]) <= 0.5 * width)
        if not inside.any():
            continue
        vel_ego = rot.T @ a_state[3:5]
        grid[inside, CH_OCCUPANCY] = 1.0
        grid[inside, CH_VEL_X] = np.clip(vel_ego[0] / v_max, -1.0, 1.0)
        grid[inside, CH_VEL_Y] = np.clip(vel_ego[1] / v_max, -1.0, 1.0)

    out = grid.reshape(grid_size, grid_size, CHANNELS).astype(np.float32)
    return Observation(grid=out, speed=float(state.ego_speed))


class HorizonError(ValueError):
    """Requested future tick lies beyond the recorded episode."""


def future_observation(scenario: Scenario, log: list[WorldState], tick: int,
                       k: int, n: int, grid_size: int = 32,
                       window_m: float = 48.0, v_max: float = 12.0) -> Observation:
    """Observation k*n ticks past ``tick`` along a recorded execution."""
    if k < 1:
        raise ValueError(f"reasoning step k must be >= 1, got {k}")
    target = tick + k * n
    if target >= len(log):
        raise HorizonError(
            f"tick {tick} + {k}*{n} = {target} exceeds episode length {len(log)}"
        )
    return render_observation(scenario, log[target], grid_size, window_m, v_max)
