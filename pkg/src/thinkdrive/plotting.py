"""Static SVG rendering of closed-loop traces, plus a CSV coordinate twin.

The affine transform from world metres (x, y) to SVG pixels is

    sx = pad + (x - min_x) * scale
    sy = pad + (max_y - y) * scale

with the constants embedded as ``data-*`` attributes on the root element, so
coordinates can be inverted exactly.  Layers are SVG groups with stable ids:
corridor, centerline, agents, expert-path, executed-path, initial-plan,
refined-plan, legend.
"""

from __future__ import annotations

import numpy as np

from .evaluation import Trace

LAYER_STYLE = {
    "expert-path": ("#888888", "4 3"),
    "executed-path": ("#1f4f9f", None),
    "initial-plan": ("#d08020", "6 3"),
    "refined-plan": ("#208040", None),
}

AGENT_COLORS = {"vehicle": "#b03030", "pedestrian": "#a030a0",
                "parked": "#707070"}


def _polyline(points, color, dash=None, width=1.6) -> str:
    pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in points)
    dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
    return (f'<polyline fill="none" stroke="{color}" stroke-width="{width}"'
            f'{dash_attr} points="{pts}" />')


def trace_to_svg(trace: Trace, plan_tick: int = 0,
                 width_px: int = 900) -> tuple[str, str]:
    """Render a trace; returns (svg text, csv text of world coordinates)."""
    route = np.asarray(trace.route, dtype=float)
    ego = np.asarray(trace.ego_poses, dtype=float)
    expert = np.asarray(trace.expert_path, dtype=float)
    plan_tick = min(max(plan_tick, 0), len(trace.plans_initial) - 1)
    plan_init = np.asarray(trace.plans_initial[plan_tick], dtype=float)
    plan_ref = np.asarray(trace.plans_final[plan_tick], dtype=float)

    all_pts = [route, ego[:, :2], expert, plan_init, plan_ref]
    for tick_agents in trace.agents:
        if tick_agents:
            all_pts.append(np.asarray(tick_agents, dtype=float)[:, :2])
    stack = np.concatenate([p for p in all_pts if len(p)], axis=0)
    min_x, min_y = (float(v) for v in stack.min(axis=0) - 5.0)
    max_x, max_y = (float(v) for v in stack.max(axis=0) + 5.0)
    pad = 20.0
    scale = float((width_px - 2 * pad) / max(max_x - min_x, 1e-6))
    height_px = int(2 * pad + (max_y - min_y) * scale)

    def to_svg(points) -> np.ndarray:
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        sx = pad + (points[:, 0] - min_x) * scale
        sy = pad + (max_y - points[:, 1]) * scale
        return np.stack([sx, sy], axis=1)

    csv_rows = ["layer,index,x,y"]

    def record(layer: str, points) -> None:
        for i, (x, y) in enumerate(np.asarray(points, dtype=float).reshape(-1, 2)):
            csv_rows.append(f"{layer},{i},{float(x)!r},{float(y)!r}")

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width_px}" '
        f'height="{height_px}" data-pad="{pad!r}" data-scale="{scale!r}" '
        f'data-min-x="{min_x!r}" data-max-y="{max_y!r}">',
        f'<rect width="{width_px}" height="{height_px}" fill="#fbfbf8" />',
    ]

    # drivable corridor as a thick stroke under everything else
    corridor_width = 2.0 * trace.half_width * scale
    parts.append('<g id="corridor">')
    parts.append(_polyline(to_svg(route), "#e4e9da", width=corridor_width))
    parts.append("</g>")
    parts.append('<g id="centerline">')
    parts.append(_polyline(to_svg(route), "#c8c8b8", "2 6", 1.0))
    parts.append("</g>")
    record("centerline", route)

    parts.append('<g id="agents">')
    for tick, tick_agents in enumerate(trace.agents):
        if not tick_agents:
            continue
        opacity = 0.15 + 0.6 * tick / max(len(trace.agents) - 1, 1)
        for idx, pose in enumerate(tick_agents):
            kind = trace.agent_kinds[idx]
            color = AGENT_COLORS.get(kind, "#b03030")
            x, y = to_svg([pose[:2]])[0]
            r = 2.5 if kind == "pedestrian" else 3.5
            parts.append(
                f'<circle cx="{x:.2f}" cy="{y:.2f}" r="{r}" fill="{color}" '
                f'opacity="{opacity:.2f}" />'
            )
    parts.append("</g>")

    named = {
        "expert-path": expert,
        "executed-path": ego[:, :2],
        "initial-plan": plan_init,
        "refined-plan": plan_ref,
    }
    for layer, pts in named.items():
        color, dash = LAYER_STYLE[layer]
        parts.append(f'<g id="{layer}">')
        if len(pts):
            parts.append(_polyline(to_svg(pts), color, dash, 2.0))
        parts.append("</g>")
        record(layer, pts)

    parts.append('<g id="legend">')
    y0 = 18
    for i, (layer, (color, dash)) in enumerate(LAYER_STYLE.items()):
        y = y0 + 16 * i
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        parts.append(
            f'<line x1="{width_px - 170}" y1="{y}" x2="{width_px - 140}" '
            f'y2="{y}" stroke="{color}" stroke-width="2.5"{dash_attr} />'
        )
        parts.append(
            f'<text x="{width_px - 132}" y="{y + 4}" font-size="11" '
            f'font-family="sans-serif">{layer}</text>'
        )
    parts.append("</g>")
    parts.append("</svg>")
    return "\n".join(parts), "\n".join(csv_rows) + "\n"


def write_plot(trace_path: str, out_path: str, plan_tick: int = 0) -> None:
    trace = Trace.load(trace_path)
    svg, csv_text = trace_to_svg(trace, plan_tick)
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write(svg)
    csv_path = out_path.rsplit(".", 1)[0] + ".csv"
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write(csv_text)
