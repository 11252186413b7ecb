"""Keyframe dataset: generation, binary file format, manifest.

One record per keyframe of an expert-controlled episode: the observation,
the expert continuation as a (T, 3) label, and the observations of the next
T ticks of the same execution (the latent-consistency targets; storing every
tick keeps one dataset usable for any segment count dividing T).

File format "FXDS", version 1, little-endian throughout:

    magic            4 bytes  b"FXDS"
    version          u32
    digest           u32 length + utf-8 (config digest, hex)
    config           u32 length + utf-8 (canonical config text)
    grid_size        u32
    channels         u32
    horizon          u32
    record_count     u32
    records          record_count x (u32 payload length + payload)

Record payload:

    seed             u64
    difficulty       u8   (0 easy, 1 hard)
    template         u16 length + utf-8
    tick             u32
    speed            f64
    grid             grid_size^2 * channels f32
    label            horizon * 3 f64
    futures          horizon x (f64 speed + grid block)
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from ..config import RunConfig, config_digest, serialize_config
from .expert import label_from_log, run_expert_episode
from .raster import CHANNELS, render_observation
from .scenarios import generate_scenario

MAGIC = b"FXDS"
VERSION = 1


class DatasetFormatError(ValueError):
    """Raised for bad magic, version, or truncated records."""


@dataclass
class Dataset:
    """In-memory keyframe dataset (arrays share one leading record axis)."""

    grids: np.ndarray          # (R, G, G, CH) float32
    speeds: np.ndarray         # (R,) float64
    labels: np.ndarray         # (R, T, 3) float64
    future_grids: np.ndarray   # (R, T, G, G, CH) float32
    future_speeds: np.ndarray  # (R, T) float64
    difficulty: np.ndarray     # (R,) uint8, 0 easy / 1 hard
    seeds: np.ndarray          # (R,) uint64
    ticks: np.ndarray          # (R,) uint32
    templates: list[str]

    def __len__(self) -> int:
        return len(self.speeds)


def interleaved_flags(count: int, fraction: float) -> np.ndarray:
    """Boolean flags with an exact evenly-interleaved True fraction."""
    idx = np.arange(count + 1)
    floors = np.floor(idx * fraction).astype(int)
    return (np.diff(floors) == 1)


def episode_plan(cfg: RunConfig) -> list[tuple[int, str]]:
    """(seed, difficulty) per training episode, easy/hard interleaved."""
    frames_per_ep = cfg.episode_ticks - cfg.horizon_steps + 1
    n_eps = math.ceil(cfg.train_keyframes / frames_per_ep)
    easy = interleaved_flags(n_eps, cfg.easy_fraction)
    return [
        (cfg.data_seed + i, "easy" if easy[i] else "hard")
        for i in range(n_eps)
    ]


def generate_dataset(cfg: RunConfig) -> Dataset:
    """Expert-driven keyframes; a pure function of the config."""
    grids, speeds, labels = [], [], []
    fgrids, fspeeds = [], []
    difficulty, seeds, ticks, templates = [], [], [], []
    horizon = cfg.horizon_steps
    frames_per_ep = cfg.episode_ticks - horizon + 1
    remaining = cfg.train_keyframes
    for seed, diff in episode_plan(cfg):
        if remaining <= 0:
            break
        scenario = generate_scenario(seed, diff)
        log = run_expert_episode(scenario, cfg.episode_ticks,
                                 v_max=cfg.v_max, dt=cfg.dt)
        frames = [
            render_observation(scenario, st, cfg.grid_size, cfg.window_m,
                               cfg.v_max)
            for st in log
        ]
        take = min(frames_per_ep, remaining)
        for t in range(take):
            grids.append(frames[t].grid)
            speeds.append(frames[t].speed)
            labels.append(label_from_log(log, t, horizon).waypoints)
            fgrids.append(np.stack([frames[t + j].grid
                                    for j in range(1, horizon + 1)]))
            fspeeds.append([frames[t + j].speed
                            for j in range(1, horizon + 1)])
            difficulty.append(0 if diff == "easy" else 1)
            seeds.append(seed)
            ticks.append(t)
            templates.append(scenario.template)
        remaining -= take
    return Dataset(
        grids=np.stack(grids),
        speeds=np.array(speeds, dtype=np.float64),
        labels=np.stack(labels),
        future_grids=np.stack(fgrids),
        future_speeds=np.array(fspeeds, dtype=np.float64),
        difficulty=np.array(difficulty, dtype=np.uint8),
        seeds=np.array(seeds, dtype=np.uint64),
        ticks=np.array(ticks, dtype=np.uint32),
        templates=templates,
    )


def _pack_str(s: str, width: str = "<I") -> bytes:
    raw = s.encode("utf-8")
    return struct.pack(width, len(raw)) + raw


def save_dataset(path: str, dataset: Dataset, cfg: RunConfig) -> None:
    g = cfg.grid_size
    horizon = cfg.horizon_steps
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(_pack_str(config_digest(cfg)))
        fh.write(_pack_str(serialize_config(cfg)))
        fh.write(struct.pack("<IIII", g, CHANNELS, horizon, len(dataset)))
        for i in range(len(dataset)):
            payload = bytearray()
            payload += struct.pack("<QB", int(dataset.seeds[i]),
                                   int(dataset.difficulty[i]))
            payload += _pack_str(dataset.templates[i], "<H")
            payload += struct.pack("<I", int(dataset.ticks[i]))
            payload += struct.pack("<d", float(dataset.speeds[i]))
            payload += dataset.grids[i].astype("<f4").tobytes()
            payload += dataset.labels[i].astype("<f8").tobytes()
            for j in range(horizon):
                payload += struct.pack("<d", float(dataset.future_speeds[i, j]))
                payload += dataset.future_grids[i, j].astype("<f4").tobytes()
            fh.write(struct.pack("<I", len(payload)))
            fh.write(bytes(payload))


def load_dataset(path: str) -> tuple[Dataset, RunConfig]:
    with open(path, "rb") as fh:
        blob = fh.read()
    off = 0

    def take(n: int) -> bytes:
        nonlocal off
        if off + n > len(blob):
            raise DatasetFormatError("truncated dataset file")
        out = blob[off:off + n]
        off += n
        return out

    def take_str(width: str = "<I") -> str:
        n = struct.unpack(width, take(struct.calcsize(width)))[0]
        return take(n).decode("utf-8")

    if take(4) != MAGIC:
        raise DatasetFormatError("not a dataset file (bad magic)")
    version = struct.unpack("<I", take(4))[0]
    if version != VERSION:
        raise DatasetFormatError(f"unsupported dataset version {version}")
    digest = take_str()
    cfg_text = take_str()
    from ..config import parse_config  # local import to avoid cycles at init

    cfg = parse_config(cfg_text)
    if config_digest(cfg) != digest:
        raise DatasetFormatError("dataset digest does not match embedded config")
    g, ch, horizon, count = struct.unpack("<IIII", take(16))
    if ch != CHANNELS:
        raise DatasetFormatError(f"unexpected channel count {ch}")

    grid_items = g * g * ch
    grids = np.empty((count, g, g, ch), dtype=np.float32)
    speeds = np.empty(count)
    labels = np.empty((count, horizon, 3))
    fgrids = np.empty((count, horizon, g, g, ch), dtype=np.float32)
    fspeeds = np.empty((count, horizon))
    difficulty = np.empty(count, dtype=np.uint8)
    seeds = np.empty(count, dtype=np.uint64)
    ticks = np.empty(count, dtype=np.uint32)
    templates: list[str] = []
    for i in range(count):
        struct.unpack("<I", take(4))  # payload length (redundant, skipped)
        seed, diff = struct.unpack("<QB", take(9))
        seeds[i] = seed
        difficulty[i] = diff
        templates.append(take_str("<H"))
        ticks[i] = struct.unpack("<I", take(4))[0]
        speeds[i] = struct.unpack("<d", take(8))[0]
        grids[i] = np.frombuffer(take(grid_items * 4), dtype="<f4").reshape(g, g, ch)
        labels[i] = np.frombuffer(take(horizon * 3 * 8), dtype="<f8").reshape(horizon, 3)
        for j in range(horizon):
            fspeeds[i, j] = struct.unpack("<d", take(8))[0]
            fgrids[i, j] = np.frombuffer(take(grid_items * 4), dtype="<f4").reshape(g, g, ch)
    dataset = Dataset(grids, speeds, labels, fgrids, fspeeds, difficulty,
                      seeds, ticks, templates)
    return dataset, cfg


def manifest_text(dataset: Dataset, cfg: RunConfig) -> str:
    lines = [
        "thinkdrive dataset manifest",
        f"format_version = {VERSION}",
        f"config_digest = {config_digest(cfg)}",
        f"records = {len(dataset)}",
        f"easy_records = {int(np.sum(dataset.difficulty == 0))}",
        f"hard_records = {int(np.sum(dataset.difficulty == 1))}",
    ]
    counts: dict[str, int] = {}
    for t in dataset.templates:
        counts[t] = counts.get(t, 0) + 1
    for name in sorted(counts):
        lines.append(f"template.{name} = {counts[name]}")
    return "\n".join(lines) + "\n"
