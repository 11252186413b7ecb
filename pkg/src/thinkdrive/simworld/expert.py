"""Scripted expert: pure-pursuit steering plus car-following speed control.

The longitudinal target blends three caps:
  * the scenario cruise speed,
  * a curvature limit over a braking-distance lookahead window,
  * an IDM-style following law against the most constraining obstacle.

Obstacle selection is predictive: agents are evaluated at a few future
offsets (their scripts are closed-form in time), and any agent that will sit
inside the corridor ahead of the ego within that window constrains the gap.
The expert is a label generator, so looking at agent schedules is fair.

Labels are kinematically feasible by construction: the expert drives the
same clamped controller as everything else, and a label is simply the
relative poses of the expert's own future states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..autodiff import wrap_to_pi
from .scenarios import Scenario, agent_state
from .world import DT, WorldState, init_state, pose_to_ego_frame, step_world

# controller constants
LOOKAHEAD_GAIN = 1.0
LOOKAHEAD_MIN = 3.0
LOOKAHEAD_MAX = 8.0
LATERAL_ACCEL_MAX = 3.0       # m/s^2, sets the curvature speed cap
CURVE_WINDOW = 30.0           # m of route scanned for upcoming curvature
IDM_ACCEL = 2.0               # comfortable acceleration
IDM_DECEL = 3.5               # comfortable braking
IDM_MIN_GAP = 3.0             # standstill gap, m
IDM_HEADWAY = 1.5             # desired time headway, s
OBSTACLE_LATERAL_MARGIN = 1.8  # corridor half-width for obstacle relevance, m
# Pedestrians walk slowly from far away, so they need a longer anticipation
# horizon than vehicles to leave braking distance.
PREDICTION_HORIZON = {"pedestrian": 6.0}
PREDICTION_HORIZON_DEFAULT = 3.0
PREDICTION_STEP = 0.5         # s
OBSTACLE_RANGE = 45.0         # m, obstacles farther ahead are ignored


@dataclass(frozen=True)
class ExpertLabel:
    """Ground-truth plan: (T, 3) waypoints in the ego frame at label time."""

    waypoints: np.ndarray


def _lead_gap(scenario: Scenario, s_ego: float, t: float) -> float | None:
    """Bumper-to-bumper gap to the most constraining obstacle ahead."""
    best = None
    for agent in scenario.agents:
        horizon = PREDICTION_HORIZON.get(agent.kind, PREDICTION_HORIZON_DEFAULT)
        steps = int(round(horizon / PREDICTION_STEP))
        for tau in (i * PREDICTION_STEP for i in range(steps + 1)):
            st = agent_state(scenario, agent, t + tau)
            s_a, lat_a = scenario.route.project(st[:2])
            if abs(lat_a) > OBSTACLE_LATERAL_MARGIN:
                continue
            gap = s_a - s_ego - 0.5 * agent.dims[0] - 2.1
            if gap <= -2.0 or gap > OBSTACLE_RANGE:
                continue
            gap = max(gap, 0.05)
            if best is None or gap < best:
                best = gap
    return best


def _idm_accel(v: float, v_target: float, gap: float | None) -> float:
    free = 1.0 - (v / max(v_target, 0.1)) ** 4
    if gap is None:
        return IDM_ACCEL * free
    s_star = IDM_MIN_GAP + v * IDM_HEADWAY + v * v / (2.0 * math.sqrt(IDM_ACCEL * IDM_DECEL))
    return IDM_ACCEL * (free - (s_star / gap) ** 2)


def expert_command(scenario: Scenario, state: WorldState,
                   v_max: float = 12.0) -> np.ndarray:
    """Next-waypoint command (ego frame) for the current state."""
    route = scenario.route
    s_ego, _ = route.project(state.ego_pos)
    v = state.ego_speed

    # curvature-limited speed over the upcoming window
    kappa = route.max_curvature(s_ego + 2.0, s_ego + CURVE_WINDOW)
    v_curve = math.sqrt(LATERAL_ACCEL_MAX / kappa) if kappa > 1e-6 else v_max
    v_target = min(scenario.cruise_speed, v_curve, v_max)

    accel = _idm_accel(v, v_target, _lead_gap(scenario, s_ego, state.time))
    accel = min(max(accel, -4.0), 4.0)
    v_next = min(max(v + accel * DT, 0.0), v_max)

    # pure pursuit toward a speed-scaled lookahead point
    lookahead = min(max(LOOKAHEAD_GAIN * max(v, v_next), LOOKAHEAD_MIN),
                    LOOKAHEAD_MAX)
    target_world = route.point_at(s_ego + lookahead)
    dx = target_world[0] - state.ego_x
    dy = target_world[1] - state.ego_y
    bearing = float(wrap_to_pi(math.atan2(dy, dx) - state.ego_theta))

    step = v_next * DT
    return np.array([step * math.cos(bearing), step * math.sin(bearing)])


def simulate_expert(scenario: Scenario, state: WorldState, ticks: int,
                    accel_max: float = 4.0, yaw_rate_max: float = 1.5,
                    v_max: float = 12.0, dt: float = DT) -> list[WorldState]:
    """Roll the expert controller forward; returns ticks+1 states."""
    log = [state]
    for _ in range(ticks):
        cmd = expert_command(scenario, log[-1], v_max)
        log.append(step_world(scenario, log[-1], cmd, accel_max,
                              yaw_rate_max, v_max, dt))
    return log


def label_from_log(log: list[WorldState], tick: int, horizon: int) -> ExpertLabel:
    """Relative future poses of a recorded execution as a (T, 3) label."""
    if tick + horizon >= len(log):
        raise ValueError(
            f"label at tick {tick} needs {horizon} future states, log has "
            f"{len(log) - tick - 1}"
        )
    anchor = log[tick]
    wps = np.stack([
        pose_to_ego_frame(anchor, log[tick + i].ego_pose)
        for i in range(1, horizon + 1)
    ])
    return ExpertLabel(waypoints=wps)


def expert_plan(scenario: Scenario, state: WorldState, horizon: int = 8,
                v_max: float = 12.0, dt: float = DT) -> ExpertLabel:
    """Simulate the expert ``horizon`` ticks ahead and return the label."""
    log = simulate_expert(scenario, state, horizon, v_max=v_max, dt=dt)
    return label_from_log(log, 0, horizon)


def run_expert_episode(scenario: Scenario, ticks: int,
                       v_max: float = 12.0, dt: float = DT) -> list[WorldState]:
    """Full expert-controlled episode from the scenario start."""
    return simulate_expert(scenario, init_state(scenario), ticks,
                           v_max=v_max, dt=dt)
