"""Planar geometry helpers: polyline routes, frames, rectangle overlap."""

from __future__ import annotations

import math

import numpy as np

Array = np.ndarray


def rotation(theta: float) -> Array:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def world_to_frame(points: Array, origin: Array, theta: float) -> Array:
    """Express world points in the frame at ``origin`` with heading ``theta``."""
    return (np.asarray(points) - np.asarray(origin)) @ rotation(theta)


def frame_to_world(points: Array, origin: Array, theta: float) -> Array:
    return np.asarray(points) @ rotation(theta).T + np.asarray(origin)


def rect_corners(cx: float, cy: float, theta: float,
                 length: float, width: float) -> Array:
    """Corners of an oriented rectangle, counter-clockwise, shape (4, 2)."""
    hl, hw = 0.5 * length, 0.5 * width
    local = np.array([[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]])
    return frame_to_world(local, np.array([cx, cy]), theta)


def _project_onto_axes(corners: Array, axes: Array) -> tuple[Array, Array]:
    proj = corners @ axes.T
    return proj.min(axis=0), proj.max(axis=0)


def rects_overlap(a: Array, b: Array) -> bool:
    """Separating-axis test for two convex quadrilaterals (4, 2)."""
    for corners in (a, b):
        edges = np.roll(corners, -1, axis=0) - corners
        axes = np.stack([-edges[:, 1], edges[:, 0]], axis=1)
        amin, amax = _project_onto_axes(a, axes)
        bmin, bmax = _project_onto_axes(b, axes)
        if np.any(amax < bmin) or np.any(bmax < amin):
            return False
    return True


class Route:
    """A polyline centerline with arc-length parameterisation.

    Points are (P, 2) with strictly increasing cumulative arc length.
    Headings and curvature are per-vertex; lateral offsets are signed with
    left of the travel direction positive.
    """

    def __init__(self, points: Array):
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] != 2:
            raise ValueError("route needs at least two 2-d points")
        seg = np.diff(pts, axis=0)
        seg_len = np.hypot(seg[:, 0], seg[:, 1])
        if np.any(seg_len <= 1e-9):
            raise ValueError("route points must strictly advance")
        self.points = pts
        self.seg = seg
        self.seg_len = seg_len
        self.cum_s = np.concatenate([[0.0], np.cumsum(seg_len)])
        self.seg_heading = np.arctan2(seg[:, 1], seg[:, 0])
        # per-vertex curvature from heading change between adjacent segments
        dh = np.diff(self.seg_heading)
        dh = (dh + math.pi) % (2 * math.pi) - math.pi
        ds = 0.5 * (seg_len[:-1] + seg_len[1:])
        kappa_mid = dh / ds
        self.vertex_curvature = np.concatenate([[0.0], kappa_mid, [0.0]])

    @property
    def length(self) -> float:
        return float(self.cum_s[-1])

    def _locate(self, s: float) -> tuple[int, float]:
        s = min(max(s, 0.0), self.length)
        i = int(np.searchsorted(self.cum_s, s, side="right") - 1)
        i = min(i, len(self.seg_len) - 1)
        t = (s - self.cum_s[i]) / self.seg_len[i]
        return i, t

    def point_at(self, s: float) -> Array:
        i, t = self._locate(s)
        return self.points[i] + t * self.seg[i]

    def heading_at(self, s: float) -> float:
        i, _ = self._locate(s)
        return float(self.seg_heading[i])

    def normal_at(self, s: float) -> Array:
        h = self.heading_at(s)
        return np.array([-math.sin(h), math.cos(h)])

    def offset_point(self, s: float, lateral: float) -> Array:
        return self.point_at(s) + lateral * self.normal_at(s)

    def curvature_at(self, s: float) -> float:
        i, t = self._locate(s)
        return float((1 - t) * self.vertex_curvature[i] + t * self.vertex_curvature[i + 1])

    def max_curvature(self, s0: float, s1: float) -> float:
        """Largest |curvature| over the arc window [s0, s1]."""
        lo = np.searchsorted(self.cum_s, min(s0, s1), side="left")
        hi = np.searchsorted(self.cum_s, max(s0, s1), side="right")
        window = self.vertex_curvature[max(lo - 1, 0):hi + 1]
        if window.size == 0:
            return 0.0
        return float(np.max(np.abs(window)))

    def project(self, point: Array) -> tuple[float, float]:
        """Arc length and signed lateral offset of the closest route point."""
        p = np.asarray(point, dtype=np.float64)
        rel = p - self.points[:-1]
        t = np.einsum("ij,ij->i", rel, self.seg) / (self.seg_len ** 2)
        t = np.clip(t, 0.0, 1.0)
        closest = self.points[:-1] + t[:, None] * self.seg
        d2 = np.sum((p - closest) ** 2, axis=1)
        i = int(np.argmin(d2))
        s = float(self.cum_s[i] + t[i] * self.seg_len[i])
        diff = p - closest[i]
        cross = self.seg[i, 0] * diff[1] - self.seg[i, 1] * diff[0]
        lat = math.copysign(math.sqrt(d2[i]), cross) if d2[i] > 0 else 0.0
        return s, lat

    def distance_field(self, points: Array) -> Array:
        """Unsigned distance from each query point to the polyline.

        Vectorised over both query points (M, 2) and segments; used by the
        rasteriser for the drivable-corridor and route-line channels.
        """
        pts = np.asarray(points, dtype=np.float64)
        # prefilter segments whose start lies near the query cloud
        lo = pts.min(axis=0) - 2.0
        hi = pts.max(axis=0) + 2.0
        starts = self.points[:-1]
        ends = self.points[1:]
        near = ~(
            ((starts < lo) & (ends < lo)).any(axis=1)
            | ((starts > hi) & (ends > hi)).any(axis=1)
        )
        if not near.any():
            near = np.ones(len(starts), dtype=bool)
        a = starts[near]
        seg = self.seg[near]
        seg_len2 = (self.seg_len[near] ** 2)
        rel = pts[:, None, :] - a[None, :, :]
        t = np.clip(np.einsum("mij,ij->mi", rel, seg) / seg_len2, 0.0, 1.0)
        closest = a[None, :, :] + t[..., None] * seg[None, :, :]
        d2 = np.sum((pts[:, None, :] - closest) ** 2, axis=2)
        return np.sqrt(d2.min(axis=1))


def build_route(legs: list[tuple], start: Array | None = None,
                heading: float = 0.0, resolution: float = 1.0) -> Route:
    """Assemble a route from ("straight", length) and ("arc", radius, angle) legs.

    Positive arc angles turn left.  The polyline is sampled at roughly
    ``resolution`` metres.
    """
    pos = np.array([0.0, 0.0]) if start is None else np.asarray(start, dtype=float)
    theta = heading
    points = [pos.copy()]
    for leg in legs:
        if leg[0] == "straight":
            _, length = leg
            n = max(int(math.ceil(length / resolution)), 1)
            for i in range(1, n + 1):
                points.append(pos + (length * i / n) * np.array([math.cos(theta), math.sin(theta)]))
            pos = points[-1].copy()
        elif leg[0] == "arc":
            _, radius, angle = leg
            n = max(int(math.ceil(abs(angle) * radius / resolution)), 2)
            sign = 1.0 if angle >= 0 else -1.0
            center = pos + radius * np.array([-math.sin(theta) * sign, math.cos(theta) * sign]) * 1.0
            # rotate around the centre
            start_angle = math.atan2(pos[1] - center[1], pos[0] - center[0])
            for i in range(1, n + 1):
                a = start_angle + angle * i / n
                points.append(center + radius * np.array([math.cos(a), math.sin(a)]))
            theta = theta + angle
            pos = points[-1].copy()
        else:
            raise ValueError(f"unknown leg kind {leg[0]!r}")
    return Route(np.array(points))
