"""World state and the fixed-step kinematic ego controller."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..autodiff import wrap_to_pi
from .scenarios import Scenario, agent_states

DT = 0.5  # seconds per tick, fixed across the package


@dataclass(frozen=True)
class WorldState:
    """Snapshot of the simulation: time, ego pose/speed, agent states (A, 5)."""

    time: float
    ego_x: float
    ego_y: float
    ego_theta: float
    ego_speed: float
    agents: np.ndarray

    @property
    def ego_pose(self) -> np.ndarray:
        return np.array([self.ego_x, self.ego_y, self.ego_theta])

    @property
    def ego_pos(self) -> np.ndarray:
        return np.array([self.ego_x, self.ego_y])


def init_state(scenario: Scenario) -> WorldState:
    heading = scenario.route.heading_at(0.0)
    start = scenario.route.point_at(0.0)
    return WorldState(
        time=0.0,
        ego_x=float(start[0]),
        ego_y=float(start[1]),
        ego_theta=float(heading),
        ego_speed=float(scenario.ego_speed0),
        agents=agent_states(scenario, 0.0),
    )


def step_world(scenario: Scenario, state: WorldState, command: np.ndarray,
               accel_max: float = 4.0, yaw_rate_max: float = 1.5,
               v_max: float = 12.0, dt: float = DT) -> WorldState:
    """Advance one tick tracking ``command``, a waypoint in the ego frame.

    The ego is a kinematic point: speed moves toward the commanded distance
    per tick under an acceleration clamp, heading turns toward the waypoint
    bearing under a yaw-rate clamp.  Infeasible commands are absorbed by the
    clamps.  Scripted agents advance by their closed-form schedules.
    """
    command = np.asarray(command, dtype=np.float64)
    wx, wy = float(command[0]), float(command[1])
    dist = math.hypot(wx, wy)

    v_des = min(dist / dt, v_max)
    accel = min(max((v_des - state.ego_speed) / dt, -accel_max), accel_max)
    v_new = min(max(state.ego_speed + accel * dt, 0.0), v_max)

    if dist > 1e-9:
        bearing = math.atan2(wy, wx)  # relative to current heading
        dtheta = min(max(float(wrap_to_pi(bearing)), -yaw_rate_max * dt),
                     yaw_rate_max * dt)
    else:
        dtheta = 0.0
    theta_new = float(wrap_to_pi(state.ego_theta + dtheta))

    x_new = state.ego_x + v_new * dt * math.cos(theta_new)
    y_new = state.ego_y + v_new * dt * math.sin(theta_new)
    t_new = state.time + dt
    return WorldState(
        time=t_new,
        ego_x=x_new,
        ego_y=y_new,
        ego_theta=theta_new,
        ego_speed=v_new,
        agents=agent_states(scenario, t_new),
    )


def waypoint_to_world(state: WorldState, waypoint: np.ndarray) -> np.ndarray:
    """Map an ego-frame waypoint (x, y[, theta]) to world coordinates."""
    c, s = math.cos(state.ego_theta), math.sin(state.ego_theta)
    wx = state.ego_x + c * waypoint[0] - s * waypoint[1]
    wy = state.ego_y + s * waypoint[0] + c * waypoint[1]
    if len(waypoint) > 2:
        return np.array([wx, wy, float(wrap_to_pi(state.ego_theta + waypoint[2]))])
    return np.array([wx, wy])


def pose_to_ego_frame(state: WorldState, pose: np.ndarray) -> np.ndarray:
    """Express a world pose (x, y, theta) in the current ego frame."""
    c, s = math.cos(state.ego_theta), math.sin(state.ego_theta)
    dx = pose[0] - state.ego_x
    dy = pose[1] - state.ego_y
    return np.array([
        c * dx + s * dy,
        -s * dx + c * dy,
        float(wrap_to_pi(pose[2] - state.ego_theta)),
    ])
