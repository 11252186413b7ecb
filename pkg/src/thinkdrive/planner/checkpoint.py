"""Checkpoint file format "FXCK": parameters, optimizer state, step counter.

Layout, little-endian throughout:

    magic        4 bytes  b"FXCK"
    version      u32
    digest       u32 length + utf-8 (config digest, hex)
    config       u32 length + utf-8 (canonical config text)
    n_tensors    u32
    tensors      n_tensors named-tensor records
    step         u64

Named-tensor record:

    name         u32 length + utf-8
    rank         u32
    dims         rank x u64
    dtype        u8 (0 = float64, 1 = float32)
    payload      product(dims) values, little-endian

Parameters come first in registry order, then the Adam first moments under
``adam.m.<name>`` and second moments under ``adam.v.<name>``.  Everything is
written as float64, so save -> load -> save is bitwise stable; float32
records are accepted on read (widened to float64).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from ..config import RunConfig, config_digest, parse_config, serialize_config
from ..optim import AdamState
from .model import Planner

MAGIC = b"FXCK"
VERSION = 1
_DTYPE_TAGS = {0: "<f8", 1: "<f4"}


class CheckpointError(ValueError):
    """Bad magic/version, digest mismatch, or truncated data."""


@dataclass
class Checkpoint:
    cfg: RunConfig
    digest: str
    params: dict[str, np.ndarray]
    adam_m: dict[str, np.ndarray]
    adam_v: dict[str, np.ndarray]
    step: int


def _write_str(fh, s: str) -> None:
    raw = s.encode("utf-8")
    fh.write(struct.pack("<I", len(raw)))
    fh.write(raw)


def _write_tensor(fh, name: str, arr: np.ndarray) -> None:
    _write_str(fh, name)
    fh.write(struct.pack("<I", arr.ndim))
    for d in arr.shape:
        fh.write(struct.pack("<Q", d))
    fh.write(struct.pack("<B", 0))
    fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def save_checkpoint(path: str, planner: Planner, adam: AdamState) -> None:
    cfg = planner.cfg
    params = planner.registry.state_dict()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        _write_str(fh, config_digest(cfg))
        _write_str(fh, serialize_config(cfg))
        names = list(params)
        total = len(names) + sum(1 for n in names if n in adam.m) * 2
        fh.write(struct.pack("<I", total))
        for name in names:
            _write_tensor(fh, name, params[name])
        for name in names:
            if name in adam.m:
                _write_tensor(fh, f"adam.m.{name}", adam.m[name])
        for name in names:
            if name in adam.v:
                _write_tensor(fh, f"adam.v.{name}", adam.v[name])
        fh.write(struct.pack("<Q", adam.step))


def load_checkpoint(path: str) -> Checkpoint:
    with open(path, "rb") as fh:
        blob = fh.read()
    off = 0

    def take(n: int) -> bytes:
        nonlocal off
        if off + n > len(blob):
            raise CheckpointError("truncated checkpoint file")
        out = blob[off:off + n]
        off += n
        return out

    def take_str() -> str:
        (n,) = struct.unpack("<I", take(4))
        return take(n).decode("utf-8")

    if take(4) != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    (version,) = struct.unpack("<I", take(4))
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    digest = take_str()
    cfg = parse_config(take_str())
    if config_digest(cfg) != digest:
        raise CheckpointError("checkpoint digest does not match embedded config")

    (n_tensors,) = struct.unpack("<I", take(4))
    tensors: dict[str, np.ndarray] = {}
    for _ in range(n_tensors):
        name = take_str()
        (rank,) = struct.unpack("<I", take(4))
        dims = [struct.unpack("<Q", take(8))[0] for _ in range(rank)]
        (tag,) = struct.unpack("<B", take(1))
        if tag not in _DTYPE_TAGS:
            raise CheckpointError(f"unknown dtype tag {tag}")
        dtype = _DTYPE_TAGS[tag]
        count = int(np.prod(dims)) if dims else 1
        arr = np.frombuffer(take(count * np.dtype(dtype).itemsize), dtype=dtype)
        tensors[name] = arr.astype(np.float64).reshape(dims)
    (step,) = struct.unpack("<Q", take(8))

    params = {k: v for k, v in tensors.items() if not k.startswith("adam.")}
    adam_m = {k[len("adam.m."):]: v for k, v in tensors.items()
              if k.startswith("adam.m.")}
    adam_v = {k[len("adam.v."):]: v for k, v in tensors.items()
              if k.startswith("adam.v.")}
    return Checkpoint(cfg=cfg, digest=digest, params=params,
                      adam_m=adam_m, adam_v=adam_v, step=step)


def planner_from_checkpoint(ckpt: Checkpoint) -> tuple[Planner, AdamState]:
    """Rebuild the model and optimizer exactly as saved."""
    planner = Planner(ckpt.cfg)
    planner.registry.load_state_dict(ckpt.params)
    adam = AdamState(lr=ckpt.cfg.learning_rate, step=ckpt.step)
    for name, arr in ckpt.adam_m.items():
        adam.m[name] = arr.copy()
    for name, arr in ckpt.adam_v.items():
        adam.v[name] = arr.copy()
    return planner, adam


def load_planner(path: str, expect_digest: str | None = None) -> tuple[Planner, AdamState, Checkpoint]:
    ckpt = load_checkpoint(path)
    if expect_digest is not None and ckpt.digest != expect_digest:
        raise CheckpointError(
            "checkpoint was trained under a different configuration: "
            f"digest {ckpt.digest[:12]}... != expected {expect_digest[:12]}..."
        )
    planner, adam = planner_from_checkpoint(ckpt)
    return planner, adam, ckpt
