"""Synthetic 2D driving world: scenarios, stepping, rasters, expert, dataset."""

from .dataset import (Dataset, DatasetFormatError, episode_plan,
                      generate_dataset, interleaved_flags, load_dataset,
                      manifest_text, save_dataset)
from .expert import (ExpertLabel, expert_command, expert_plan, label_from_log,
                     run_expert_episode, simulate_expert)
from .geometry import Route, build_route, rect_corners, rects_overlap
from .raster import (CHANNELS, CH_DRIVABLE, CH_OCCUPANCY, CH_ROUTE, CH_VEL_X,
                     CH_VEL_Y, HorizonError, Observation, future_observation,
                     render_observation)
from .scenarios import (AGENT_DIMS, EASY_TEMPLATES, HARD_TEMPLATES,
                        TEMPLATE_BOUNDS, Agent, Scenario, agent_state,
                        agent_states, generate_scenario)
from .world import (DT, WorldState, init_state, pose_to_ego_frame, step_world,
                    waypoint_to_world)

__all__ = [
    "AGENT_DIMS", "Agent", "CHANNELS", "CH_DRIVABLE", "CH_OCCUPANCY",
    "CH_ROUTE", "CH_VEL_X", "CH_VEL_Y", "DT", "Dataset", "DatasetFormatError",
    "EASY_TEMPLATES", "ExpertLabel", "HARD_TEMPLATES", "HorizonError",
    "Observation", "Route", "Scenario", "TEMPLATE_BOUNDS", "WorldState",
    "agent_state", "agent_states", "build_route", "episode_plan",
    "expert_command", "expert_plan", "future_observation", "generate_dataset",
    "generate_scenario", "init_state", "interleaved_flags", "label_from_log",
    "load_dataset", "manifest_text", "pose_to_ego_frame", "rect_corners",
    "rects_overlap", "render_observation", "run_expert_episode",
    "save_dataset", "simulate_expert", "step_world", "waypoint_to_world",
]
