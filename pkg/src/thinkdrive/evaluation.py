"""Closed-loop evaluation: receding-horizon driving, submetrics, reports.

Per scenario the planner replans every tick and the ego tracks the first
waypoint of the returned plan.  After the episode five submetrics are
computed:

  * NC   — 1 iff the ego footprint never overlaps an agent footprint,
  * DAC  — 1 iff the ego centre stays inside the drivable corridor,
  * EP   — ego arc-length progress relative to the expert's on the same
           scenario and horizon, clipped to [0, 1],
  * TTC  — 1 iff a constant-velocity projection never predicts a footprint
           overlap within the projection window at any tick,
  * Comf — 1 iff realised |accel| and |jerk| stay within the bounds.

The aggregate score multiplies the two gate metrics by a weighted sum:
NC * DAC * (5*EP + 5*TTC + 2*Comf) / 12.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .config import RunConfig
from .planner.inference import InferResult, infer
from .planner.model import Planner
from .simworld.dataset import interleaved_flags
from .simworld.geometry import rect_corners, rects_overlap
from .simworld.raster import render_observation
from .simworld.scenarios import Scenario, generate_scenario
from .simworld.world import WorldState, init_state, step_world
from .simworld.expert import run_expert_episode


@dataclass(frozen=True)
class SubMetrics:
    nc: float    # {0, 1}
    dac: float   # {0, 1}
    ep: float    # [0, 1]
    ttc: float   # {0, 1}
    comf: float  # {0, 1}


def pdms(m: SubMetrics) -> float:
    """NC * DAC * (5*EP + 5*TTC + 2*Comf) / 12, all inputs range-checked."""
    for name, value, binary in (("nc", m.nc, True), ("dac", m.dac, True),
                                ("ep", m.ep, False), ("ttc", m.ttc, True),
                                ("comf", m.comf, True)):
        if binary and value not in (0.0, 1.0):
            raise ValueError(f"{name} must be 0 or 1, got {value}")
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {value}")
    return m.nc * m.dac * (5.0 * m.ep + 5.0 * m.ttc + 2.0 * m.comf) / 12.0


@dataclass
class Trace:
    """Everything needed to replay/plot one closed-loop episode."""

    seed: int
    difficulty: str
    template: str
    half_width: float
    route: list          # (P, 2) centerline polyline
    expert_path: list    # (E, 2) expert ego positions
    ego_poses: list      # per tick [x, y, theta, v]
    plans_initial: list  # per tick (T, 2) world-frame positions
    plans_final: list    # per tick (T, 2) world-frame positions
    modes: list          # per tick "thinking" | "instant"
    agents: list         # per tick (A, 3) poses
    agent_kinds: list    # (A,) agent kind strings

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(asdict(self), fh)

    @staticmethod
    def load(path: str) -> "Trace":
        with open(path, "r", encoding="utf-8") as fh:
            return Trace(**json.load(fh))


def _plan_to_world(state: WorldState, plan: np.ndarray) -> list:
    c, s = np.cos(state.ego_theta), np.sin(state.ego_theta)
    rot = np.array([[c, -s], [s, c]])
    return (np.asarray(plan)[:, :2] @ rot.T + state.ego_pos).tolist()


def _footprints(scenario: Scenario, state: WorldState) -> list[np.ndarray]:
    return [
        rect_corners(row[0], row[1], row[2], *agent.dims)
        for row, agent in zip(state.agents, scenario.agents)
    ]


def _projected_collision(scenario: Scenario, state: WorldState,
                         window_s: float, ego_dims: tuple[float, float]) -> bool:
    """Constant-velocity projection of ego and agents over the window."""
    ego_vel = state.ego_speed * np.array([np.cos(state.ego_theta),
                                          np.sin(state.ego_theta)])
    for tau in np.arange(0.1, window_s + 1e-9, 0.1):
        ex, ey = state.ego_pos + ego_vel * tau
        ego_rect = rect_corners(ex, ey, state.ego_theta, *ego_dims)
        for row, agent in zip(state.agents, scenario.agents):
            ax, ay = row[0] + row[3] * tau, row[1] + row[4] * tau
            if rects_overlap(ego_rect, rect_corners(ax, ay, row[2], *agent.dims)):
                return True
    return False


def run_closed_loop(planner_fn, scenario: Scenario, horizon_ticks: int,
                    cfg: RunConfig,
                    expert_log: list[WorldState] | None = None
                    ) -> tuple[SubMetrics, Trace, list[InferResult]]:
    """Drive ``planner_fn`` (obs -> InferResult) through one episode."""
    if expert_log is None:
        expert_log = run_expert_episode(scenario, horizon_ticks,
                                        v_max=cfg.v_max, dt=cfg.dt)
    state = init_state(scenario)
    states = [state]
    results: list[InferResult] = []
    trace = Trace(
        seed=scenario.seed, difficulty=scenario.difficulty,
        template=scenario.template, half_width=scenario.half_width,
        route=scenario.route.points[::4].tolist(),
        expert_path=[[s.ego_x, s.ego_y] for s in expert_log],
        ego_poses=[], plans_initial=[], plans_final=[], modes=[],
        agents=[], agent_kinds=[a.kind for a in scenario.agents],
    )
    for _ in range(horizon_ticks):
        obs = render_observation(scenario, state, cfg.grid_size,
                                 cfg.window_m, cfg.v_max)
        res = planner_fn(obs)
        results.append(res)
        trace.ego_poses.append([state.ego_x, state.ego_y, state.ego_theta,
                                state.ego_speed])
        trace.plans_initial.append(_plan_to_world(state, res.initial))
        trace.plans_final.append(_plan_to_world(state, res.trajectory))
        trace.modes.append(res.decision.mode)
        trace.agents.append(state.agents[:, :3].tolist())
        state = step_world(scenario, state, res.trajectory[0, :2],
                           cfg.accel_max, cfg.yaw_rate_max, cfg.v_max, cfg.dt)
        states.append(state)
    trace.ego_poses.append([state.ego_x, state.ego_y, state.ego_theta,
                            state.ego_speed])

    ego_dims = (cfg.ego_length, cfg.ego_width)
    nc, dac, ttc = 1.0, 1.0, 1.0
    for st in states:
        ego_rect = rect_corners(st.ego_x, st.ego_y, st.ego_theta, *ego_dims)
        if nc and any(rects_overlap(ego_rect, fp)
                      for fp in _footprints(scenario, st)):
            nc = 0.0
        if dac and abs(scenario.route.project(st.ego_pos)[1]) > scenario.half_width:
            dac = 0.0
        if ttc and _projected_collision(scenario, st, cfg.ttc_window_s, ego_dims):
            ttc = 0.0

    s_start = scenario.route.project(states[0].ego_pos)[0]
    s_end = scenario.route.project(states[-1].ego_pos)[0]
    expert_progress = scenario.route.project(expert_log[-1].ego_pos)[0] - s_start
    if expert_progress > 1e-6:
        ep = float(np.clip((s_end - s_start) / expert_progress, 0.0, 1.0))
    else:
        ep = 1.0  # the expert demanded no progress

    speeds = np.array([st.ego_speed for st in states])
    accel = np.diff(speeds) / cfg.dt
    jerk = np.diff(accel) / cfg.dt
    comf = 1.0 if (np.all(np.abs(accel) <= cfg.accel_max + 1e-9)
                   and np.all(np.abs(jerk) <= cfg.jerk_max + 1e-9)) else 0.0

    return SubMetrics(nc=nc, dac=dac, ep=ep, ttc=ttc, comf=comf), trace, results


# ---------------------------------------------------------------------------
# benchmark over a scenario set


@dataclass
class ScenarioResult:
    seed: int
    difficulty: str
    template: str
    metrics: SubMetrics
    pdms: float
    think_rate: float
    mode: str
    stage_ms: dict[str, float] = field(default_factory=dict)


@dataclass
class PdmsReport:
    mode: str
    rows: list[ScenarioResult]
    latency_ms: dict[str, dict[str, float]]  # stage -> {p50, p90, mean}

    @property
    def mean_pdms(self) -> float:
        return float(np.mean([r.pdms for r in self.rows]))

    @property
    def mean_submetrics(self) -> SubMetrics:
        return SubMetrics(
            nc=float(np.mean([r.metrics.nc for r in self.rows])),
            dac=float(np.mean([r.metrics.dac for r in self.rows])),
            ep=float(np.mean([r.metrics.ep for r in self.rows])),
            ttc=float(np.mean([r.metrics.ttc for r in self.rows])),
            comf=float(np.mean([r.metrics.comf for r in self.rows])),
        )

    @property
    def think_rate(self) -> float:
        return float(np.mean([r.think_rate for r in self.rows]))


def benchmark_specs(cfg: RunConfig) -> list[tuple[int, str]]:
    """Held-out (seed, difficulty) pairs for the evaluation benchmark."""
    easy = interleaved_flags(cfg.eval_scenarios, cfg.eval_easy_fraction)
    return [
        (cfg.eval_seed + i, "easy" if easy[i] else "hard")
        for i in range(cfg.eval_scenarios)
    ]


def _percentiles(samples: list[float]) -> dict[str, float]:
    arr = np.array(samples) * 1000.0
    if arr.size == 0:
        return {"p50": 0.0, "p90": 0.0, "mean": 0.0}
    return {
        "p50": float(np.percentile(arr, 50)),
        "p90": float(np.percentile(arr, 90)),
        "mean": float(arr.mean()),
    }


def benchmark(planner: Planner, specs: list[tuple[int, str]], mode: str,
              cfg: RunConfig | None = None,
              expert_logs: dict[int, list[WorldState]] | None = None,
              trace_sink=None) -> PdmsReport:
    """Closed-loop evaluation over a scenario set, merged in given order."""
    cfg = planner.cfg if cfg is None else cfg
    if not specs:
        raise ValueError("the scenario set is empty")
    rows: list[ScenarioResult] = []
    stage_samples: dict[str, list[float]] = {}
    for seed, difficulty in specs:
        scenario = generate_scenario(seed, difficulty)
        expert_log = None if expert_logs is None else expert_logs.get(seed)
        if expert_log is None:
            expert_log = run_expert_episode(scenario, cfg.eval_horizon_ticks,
                                            v_max=cfg.v_max, dt=cfg.dt)
            if expert_logs is not None:
                expert_logs[seed] = expert_log

        def planner_fn(obs):
            return infer(planner, obs, mode=mode, tau=cfg.tau)

        metrics, trace, results = run_closed_loop(
            planner_fn, scenario, cfg.eval_horizon_ticks, cfg, expert_log)
        stage_ms = {}
        for stage in ("encode", "propose", "gate", "rollout", "summarize",
                      "total"):
            samples = [r.timing[stage] for r in results]
            stage_samples.setdefault(stage, []).extend(samples)
            stage_ms[stage] = float(np.median(samples) * 1000.0)
        rows.append(ScenarioResult(
            seed=seed, difficulty=difficulty, template=scenario.template,
            metrics=metrics, pdms=pdms(metrics),
            think_rate=float(np.mean([r.decision.flag for r in results])),
            mode=mode, stage_ms=stage_ms,
        ))
        if trace_sink is not None:
            trace_sink(trace)
    latency = {stage: _percentiles(s) for stage, s in stage_samples.items()}
    return PdmsReport(mode=mode, rows=rows, latency_ms=latency)


def measure_latency(planner: Planner, cfg: RunConfig, mode: str,
                    frames: int = 500, scenario_seeds: int = 5) -> np.ndarray:
    """Per-frame wall-clock seconds over pre-rendered frames, single-threaded."""
    observations = []
    specs = benchmark_specs(cfg)[:scenario_seeds]
    for seed, difficulty in specs:
        scenario = generate_scenario(seed, difficulty)
        log = run_expert_episode(scenario, cfg.eval_horizon_ticks,
                                 v_max=cfg.v_max, dt=cfg.dt)
        observations.extend(
            render_observation(scenario, st, cfg.grid_size, cfg.window_m,
                               cfg.v_max)
            for st in log
        )
    times = np.empty(frames)
    for i in range(frames):
        obs = observations[i % len(observations)]
        t0 = time.perf_counter()
        infer(planner, obs, mode=mode, tau=cfg.tau)
        times[i] = time.perf_counter() - t0
    return times


# ---------------------------------------------------------------------------
# report files


def report_text(report: PdmsReport) -> str:
    lines = [
        "thinkdrive benchmark report",
        f"mode = {report.mode}",
        f"scenarios = {len(report.rows)}",
        f"mean_pdms = {report.mean_pdms:.6f}",
        f"think_rate = {report.think_rate:.6f}",
    ]
    m = report.mean_submetrics
    lines += [
        f"mean_nc = {m.nc:.6f}",
        f"mean_dac = {m.dac:.6f}",
        f"mean_ep = {m.ep:.6f}",
        f"mean_ttc = {m.ttc:.6f}",
        f"mean_comf = {m.comf:.6f}",
        "",
        "# latency percentiles are wall-clock and vary run to run",
    ]
    for stage, st in report.latency_ms.items():
        lines.append(
            f"latency.{stage} = p50 {st['p50']:.3f} ms, p90 {st['p90']:.3f} ms, "
            f"mean {st['mean']:.3f} ms"
        )
    lines.append("")
    for r in report.rows:
        lines += [
            f"[scenario {r.seed}]",
            f"difficulty = {r.difficulty}",
            f"template = {r.template}",
            f"nc = {r.metrics.nc:.0f}",
            f"dac = {r.metrics.dac:.0f}",
            f"ep = {r.metrics.ep:.6f}",
            f"ttc = {r.metrics.ttc:.0f}",
            f"comf = {r.metrics.comf:.0f}",
            f"pdms = {r.pdms:.6f}",
            f"think_rate = {r.think_rate:.6f}",
            "",
        ]
    return "\n".join(lines)


def report_csv(report: PdmsReport, include_latency: bool = True) -> str:
    """Machine-readable rows; latency columns are wall-clock measurements."""
    stages = ("encode", "propose", "gate", "rollout", "summarize", "total")
    header = ["seed", "difficulty", "template", "nc", "dac", "ep", "ttc",
              "comf", "pdms", "mode", "think_rate"]
    if include_latency:
        header += [f"latency_{s}_ms" for s in stages]
    out = [",".join(header)]
    for r in report.rows:
        row = [str(r.seed), r.difficulty, r.template,
               f"{r.metrics.nc:.0f}", f"{r.metrics.dac:.0f}",
               f"{r.metrics.ep:.9f}", f"{r.metrics.ttc:.0f}",
               f"{r.metrics.comf:.0f}", f"{r.pdms:.9f}", r.mode,
               f"{r.think_rate:.6f}"]
        if include_latency:
            row += [f"{r.stage_ms[s]:.4f}" for s in stages]
        out.append(",".join(row))
    return "\n".join(out) + "\n"
