"""Scenario templates: route geometry, scripted agents, randomised parameters.

Easy scenarios are empty or sparsely populated straight/gently-curved roads;
hard scenarios are one of five scripted conflict templates.  Every sampled
parameter is drawn inside the documented ``TEMPLATE_BOUNDS`` range and
recorded on the scenario for auditability.  Generation is a pure function of
(seed, difficulty): identical calls return identical scenarios.

Agent motion is a closed-form function of time (scripts never react to the
ego vehicle), which keeps episodes replayable and future states queryable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Route, build_route

EASY_TEMPLATES = ("straight", "curve")
HARD_TEMPLATES = ("lead_brake", "cut_in", "crossing_ped", "sharp_turn",
                  "parked_corridor")

# Dimensions (length, width) per agent kind, metres.
AGENT_DIMS = {
    "vehicle": (4.4, 1.8),
    "pedestrian": (0.6, 0.6),
    "parked": (4.4, 1.7),
}

# Sampled-parameter ranges per template.  The generation audit asserts every
# recorded sample falls inside these bounds.
TEMPLATE_BOUNDS: dict[str, dict[str, tuple[float, float]]] = {
    "straight": {
        "feature_len": (80.0, 120.0),
        "half_width": (2.4, 3.0),
        "cruise": (5.0, 9.0),
        "lead_gap": (35.0, 50.0),
        "lead_speed_factor": (0.95, 1.05),
    },
    "curve": {
        "radius": (80.0, 200.0),
        "angle": (0.35, 0.9),
        "half_width": (2.4, 3.0),
        "cruise": (5.0, 8.0),
    },
    "lead_brake": {
        "half_width": (2.4, 3.0),
        "cruise": (6.0, 9.0),
        "gap0": (18.0, 30.0),
        "lead_speed_factor": (0.9, 1.1),
        "t_brake": (2.0, 5.0),
        "decel": (3.0, 5.0),
    },
    "cut_in": {
        "half_width": (2.4, 3.0),
        "cruise": (6.0, 9.0),
        "lane_offset": (1.2, 2.0),
        "gap0": (6.0, 14.0),
        "speed_factor": (0.85, 1.05),
        "t_start": (1.0, 3.0),
        "merge_duration": (1.5, 3.0),
        "slow_factor": (0.3, 0.6),
    },
    "crossing_ped": {
        "half_width": (2.4, 3.0),
        "cruise": (6.0, 9.0),
        "t_arrive": (3.0, 5.5),
        "start_offset": (5.0, 8.0),
        "walk_speed": (1.0, 2.0),
    },
    "sharp_turn": {
        "half_width": (2.4, 3.0),
        "cruise": (6.0, 9.0),
        "entry_len": (20.0, 35.0),
        "radius": (6.0, 10.0),
        "lead_gap_after": (10.0, 20.0),
        "lead_speed_factor": (0.3, 0.5),
    },
    "parked_corridor": {
        "half_width": (2.5, 2.8),
        "cruise": (5.0, 8.0),
        "radius": (60.0, 120.0),
        "angle": (0.4, 0.8),
        "start_s": (15.0, 25.0),
        "spacing": (8.0, 12.0),
        "lat_margin": (0.15, 0.5),
        "walk_speed": (0.8, 1.5),
    },
}

MIN_ROUTE_LENGTH = 280.0  # covers v_max * episode duration with margin


@dataclass(frozen=True)
class Agent:
    kind: str        # vehicle | pedestrian | parked
    behavior: str    # parked | follow_route | cut_in | cross
    params: dict = field(default_factory=dict)

    @property
    def dims(self) -> tuple[float, float]:
        return AGENT_DIMS[self.kind]


@dataclass
class Scenario:
    seed: int
    difficulty: str
    template: str
    route: Route
    half_width: float
    cruise_speed: float
    ego_speed0: float
    agents: list[Agent]
    params: dict[str, float]

    @property
    def dynamic_agent_count(self) -> int:
        return sum(1 for a in self.agents if a.behavior != "parked")


def _uniform(rng, bounds, key):
    lo, hi = bounds[key]
    return float(rng.uniform(lo, hi))


def _sign(rng) -> float:
    return 1.0 if rng.random() < 0.5 else -1.0


def _with_tail(legs: list[tuple]) -> list[tuple]:
    """Append a straight tail so every route reaches MIN_ROUTE_LENGTH."""
    total = 0.0
    for leg in legs:
        if leg[0] == "straight":
            total += leg[1]
        else:
            total += abs(leg[2]) * leg[1]
    tail = max(MIN_ROUTE_LENGTH - total, 10.0)
    return legs + [("straight", tail)]


def generate_scenario(seed: int, difficulty: str) -> Scenario:
    """Deterministically build one scenario for (seed, difficulty)."""
    if difficulty not in ("easy", "hard"):
        raise ValueError(f"difficulty must be 'easy' or 'hard', got {difficulty!r}")
    rng = np.random.default_rng([int(seed), 0 if difficulty == "easy" else 1])
    if difficulty == "easy":
        template = EASY_TEMPLATES[int(rng.integers(len(EASY_TEMPLATES)))]
    else:
        template = HARD_TEMPLATES[int(rng.integers(len(HARD_TEMPLATES)))]
    bounds = TEMPLATE_BOUNDS[template]
    params: dict[str, float] = {}
    agents: list[Agent] = []

    half_width = _uniform(rng, bounds, "half_width")
    cruise = _uniform(rng, bounds, "cruise")
    params["half_width"] = half_width
    params["cruise"] = cruise

    if template == "straight":
        feature_len = _uniform(rng, bounds, "feature_len")
        params["feature_len"] = feature_len
        legs = [("straight", feature_len)]
        if rng.random() < 0.3:
            gap = _uniform(rng, bounds, "lead_gap")
            factor = _uniform(rng, bounds, "lead_speed_factor")
            params["lead_gap"] = gap
            params["lead_speed_factor"] = factor
            agents.append(Agent("vehicle", "follow_route", {
                "s0": gap, "v0": cruise * factor,
            }))
    elif template == "curve":
        radius = _uniform(rng, bounds, "radius")
        angle = _uniform(rng, bounds, "angle") * _sign(rng)
        params["radius"] = radius
        params["angle"] = abs(angle)
        legs = [("straight", 15.0), ("arc", radius, angle)]
    elif template == "lead_brake":
        gap0 = _uniform(rng, bounds, "gap0")
        factor = _uniform(rng, bounds, "lead_speed_factor")
        t_brake = _uniform(rng, bounds, "t_brake")
        decel = _uniform(rng, bounds, "decel")
        params.update(gap0=gap0, lead_speed_factor=factor, t_brake=t_brake,
                      decel=decel)
        legs = [("straight", 120.0)]
        agents.append(Agent("vehicle", "follow_route", {
            "s0": gap0, "v0": cruise * factor, "t_brake": t_brake,
            "decel": decel, "v_end": 0.0,
        }))
    elif template == "cut_in":
        side = _sign(rng)
        lane_offset = _uniform(rng, bounds, "lane_offset")
        gap0 = _uniform(rng, bounds, "gap0")
        factor = _uniform(rng, bounds, "speed_factor")
        t_start = _uniform(rng, bounds, "t_start")
        duration = _uniform(rng, bounds, "merge_duration")
        slow = _uniform(rng, bounds, "slow_factor")
        params.update(lane_offset=lane_offset, gap0=gap0, speed_factor=factor,
                      t_start=t_start, merge_duration=duration,
                      slow_factor=slow)
        legs = [("straight", 120.0)]
        agents.append(Agent("vehicle", "cut_in", {
            "s0": gap0, "v0": cruise * factor,
            "lat0": side * (half_width + lane_offset),
            "t_start": t_start, "duration": duration,
            "v_slow": cruise * slow, "decel": 2.0,
        }))
    elif template == "crossing_ped":
        t_arrive = _uniform(rng, bounds, "t_arrive")
        y0 = _uniform(rng, bounds, "start_offset")
        walk = _uniform(rng, bounds, "walk_speed")
        side = _sign(rng)
        params.update(t_arrive=t_arrive, start_offset=y0, walk_speed=walk)
        s_cross = cruise * t_arrive
        t_start = max(t_arrive - y0 / walk, 0.0)
        legs = [("straight", 120.0)]
        agents.append(Agent("pedestrian", "cross", {
            "s_c": s_cross, "y0": -side * y0, "y1": side * y0,
            "v_walk": walk, "t_start": t_start,
        }))
    elif template == "sharp_turn":
        entry = _uniform(rng, bounds, "entry_len")
        radius = _uniform(rng, bounds, "radius")
        side = _sign(rng)
        gap_after = _uniform(rng, bounds, "lead_gap_after")
        factor = _uniform(rng, bounds, "lead_speed_factor")
        params.update(entry_len=entry, radius=radius, lead_gap_after=gap_after,
                      lead_speed_factor=factor)
        legs = [("straight", entry), ("arc", radius, side * math.pi / 2)]
        arc_len = radius * math.pi / 2
        agents.append(Agent("vehicle", "follow_route", {
            "s0": entry + arc_len + gap_after, "v0": cruise * factor,
        }))
    elif template == "parked_corridor":
        radius = _uniform(rng, bounds, "radius")
        angle = _uniform(rng, bounds, "angle") * _sign(rng)
        start_s = _uniform(rng, bounds, "start_s")
        spacing = _uniform(rng, bounds, "spacing")
        lat_margin = _uniform(rng, bounds, "lat_margin")
        walk = _uniform(rng, bounds, "walk_speed")
        n_parked = int(rng.integers(4, 8))
        params.update(radius=radius, angle=abs(angle), start_s=start_s,
                      spacing=spacing, lat_margin=lat_margin, walk_speed=walk,
                      n_parked=float(n_parked))
        legs = [("straight", 12.0), ("arc", radius, angle)]
        lat_mag = half_width - lat_margin
        # keep a passable gap: parked cars hug the corridor edge
        lat_mag = max(lat_mag, 2.0)
        slots = []
        for i in range(n_parked):
            s_i = start_s + i * spacing
            side_i = 1.0 if i % 2 == 0 else -1.0
            slots.append((s_i, side_i))
            agents.append(Agent("parked", "parked", {
                "s0": s_i, "lat0": side_i * lat_mag,
            }))
        # a pedestrian steps out from behind a mid-corridor parked car
        s_ped, side_ped = slots[n_parked // 2]
        t_arrive = s_ped / cruise
        y0 = side_ped * (lat_mag + 1.0)
        t_start = max(t_arrive - abs(y0) / walk, 0.0)
        agents.append(Agent("pedestrian", "cross", {
            "s_c": s_ped + 2.5, "y0": y0, "y1": -y0, "v_walk": walk,
            "t_start": t_start,
        }))
    else:  # pragma: no cover
        raise AssertionError(template)

    route = build_route(_with_tail(legs))
    return Scenario(
        seed=int(seed),
        difficulty=difficulty,
        template=template,
        route=route,
        half_width=half_width,
        cruise_speed=cruise,
        ego_speed0=cruise,
        agents=agents,
        params=params,
    )


# ---------------------------------------------------------------------------
# scripted agent kinematics (closed-form in t)


def _arc_position(p: dict, t: float) -> tuple[float, float]:
    """(s, v) for a follow_route profile with an optional braking phase."""
    s0, v0 = p["s0"], p["v0"]
    t_brake = p.get("t_brake")
    if t_brake is None or t <= t_brake:
        return s0 + v0 * t, v0
    decel = p["decel"]
    v_end = p.get("v_end", 0.0)
    tau = t - t_brake
    tau_stop = (v0 - v_end) / decel
    base = s0 + v0 * t_brake
    if tau <= tau_stop:
        return base + v0 * tau - 0.5 * decel * tau * tau, v0 - decel * tau
    brake_dist = (v0 * v0 - v_end * v_end) / (2.0 * decel)
    return base + brake_dist + v_end * (tau - tau_stop), v_end


def _cut_in_lateral(p: dict, t: float) -> tuple[float, float]:
    """Lateral offset and its rate during a cosine-eased merge."""
    lat0, t_start, dur = p["lat0"], p["t_start"], p["duration"]
    if t <= t_start:
        return lat0, 0.0
    u = (t - t_start) / dur
    if u >= 1.0:
        return 0.0, 0.0
    lat = lat0 * 0.5 * (1.0 + math.cos(math.pi * u))
    rate = -lat0 * 0.5 * math.pi * math.sin(math.pi * u) / dur
    return lat, rate


def _cut_in_arc(p: dict, t: float) -> tuple[float, float]:
    """(s, v) for a cut-in vehicle: cruise, then decelerate to v_slow."""
    merge_end = p["t_start"] + p["duration"]
    s0, v0 = p["s0"], p["v0"]
    if t <= merge_end:
        return s0 + v0 * t, v0
    decel, v_slow = p["decel"], p["v_slow"]
    tau = t - merge_end
    tau_slow = max(v0 - v_slow, 0.0) / decel
    base = s0 + v0 * merge_end
    if tau <= tau_slow:
        return base + v0 * tau - 0.5 * decel * tau * tau, v0 - decel * tau
    slow_dist = (v0 * v0 - v_slow * v_slow) / (2.0 * decel)
    return base + slow_dist + v_slow * (tau - tau_slow), v_slow


def agent_state(scenario: Scenario, agent: Agent, t: float) -> np.ndarray:
    """Pose and velocity (x, y, theta, vx, vy) of one agent at time t."""
    route = scenario.route
    p = agent.params
    if agent.behavior == "parked":
        pos = route.offset_point(p["s0"], p["lat0"])
        theta = route.heading_at(p["s0"])
        return np.array([pos[0], pos[1], theta, 0.0, 0.0])
    if agent.behavior == "follow_route":
        s, v = _arc_position(p, t)
        pos = route.point_at(s)
        theta = route.heading_at(s)
        return np.array([pos[0], pos[1], theta,
                         v * math.cos(theta), v * math.sin(theta)])
    if agent.behavior == "cut_in":
        s, v = _cut_in_arc(p, t)
        lat, lat_rate = _cut_in_lateral(p, t)
        theta = route.heading_at(s)
        pos = route.point_at(s) + lat * route.normal_at(s)
        vel = v * np.array([math.cos(theta), math.sin(theta)])
        vel = vel + lat_rate * route.normal_at(s)
        return np.array([pos[0], pos[1], theta, vel[0], vel[1]])
    if agent.behavior == "cross":
        y0, y1, v_walk, t_start = p["y0"], p["y1"], p["v_walk"], p["t_start"]
        direction = 1.0 if y1 > y0 else -1.0
        travel = v_walk * max(t - t_start, 0.0)
        lat = y0 + direction * min(travel, abs(y1 - y0))
        walking = 0.0 < travel < abs(y1 - y0)
        normal = scenario.route.normal_at(p["s_c"])
        pos = route.point_at(p["s_c"]) + lat * normal
        heading_route = route.heading_at(p["s_c"])
        theta = heading_route + direction * math.pi / 2.0
        vel = (v_walk * direction * normal) if walking else np.zeros(2)
        return np.array([pos[0], pos[1], theta, vel[0], vel[1]])
    raise ValueError(f"unknown behavior {agent.behavior!r}")


def agent_states(scenario: Scenario, t: float) -> np.ndarray:
    """All agent states at time t, shape (A, 5)."""
    if not scenario.agents:
        return np.zeros((0, 5))
    return np.stack([agent_state(scenario, a, t) for a in scenario.agents])
