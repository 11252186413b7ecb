"""The five planner networks and their forward operations.

All methods operate on batched tensors (leading batch axis B); the scene
latent is (B, L, C), trajectories are (B, T, 3).  Raw observations enter as
numpy arrays and are patchified outside the gradient graph, since inputs
never need gradients.

Networks:
  * scene encoder: patch projection + positional embedding + speed embedding
    + transformer layer(s) -> latent tokens
  * policy head: pooled latent -> full trajectory (heading via an
    atan2(sin, cos) pair, so it lands in (-pi, pi] by construction)
  * segment encoder: one trajectory segment -> a single extra token
  * world model: transformer stack over [latent tokens ; segment token],
    returning the updated latent tokens
  * summarizer: pooled rollout chain + trajectory embedding -> per-waypoint
    offsets added onto the proposal
  * difficulty gate: pooled latent -> scalar score in (0, 1)
"""

from __future__ import annotations

import math

import numpy as np

from .. import autodiff as ad
from ..autodiff import ShapeError, Tensor
from ..config import RunConfig
from ..neural import Mlp, ParamRegistry, TransformerLayer, init_params
from ..simworld.raster import CHANNELS, Observation


def patchify(grids: np.ndarray, tokens: int) -> np.ndarray:
    """Split (B, G, G, CH) grids into (B, tokens, patch_values) rows."""
    grids = np.asarray(grids, dtype=np.float64)
    single = grids.ndim == 3
    if single:
        grids = grids[None]
    b, g, g2, ch = grids.shape
    side = int(round(math.sqrt(tokens)))
    if side * side != tokens:
        raise ShapeError(f"token count {tokens} is not a perfect square")
    if g != g2 or g % side != 0:
        raise ShapeError(f"grid {g}x{g2} not divisible into {side}x{side} patches")
    ps = g // side
    out = (
        grids.reshape(b, side, ps, side, ps, ch)
        .transpose(0, 1, 3, 2, 4, 5)
        .reshape(b, tokens, ps * ps * ch)
    )
    return out[0] if single else out


def segment_trajectory(w, k: int) -> list[Tensor]:
    """Split a (B, T, 3) trajectory into k equal consecutive segments."""
    if not isinstance(w, Tensor):
        w = Tensor(w)
    t = w.shape[-2]
    if k < 1 or t % k != 0:
        raise ShapeError(f"trajectory length {t} is not divisible by k={k}")
    n = t // k
    return [ad.slice_axis(w, -2, i * n, (i + 1) * n) for i in range(k)]


def _split_xy_theta(w: Tensor) -> tuple[Tensor, Tensor]:
    return ad.slice_axis(w, -1, 0, 2), ad.slice_axis(w, -1, 2, 3)


class Planner:
    """Parameter container plus every forward operation of the pipeline."""

    def __init__(self, cfg: RunConfig, seed: int | None = None):
        cfg.validate()
        self.cfg = cfg
        L, C, H = cfg.latent_tokens, cfg.channels, cfg.heads
        T, K = cfg.horizon_steps, cfg.cot_steps
        N = cfg.segment_length
        side = int(round(math.sqrt(L)))
        patch_values = (cfg.grid_size // side) ** 2 * CHANNELS
        hidden = cfg.mlp_hidden

        reg = ParamRegistry()
        self.registry = reg
        self.patch_w = reg.add("encoder.patch.w", (patch_values, C),
                               "weight", fan_in=patch_values)
        self.patch_b = reg.add("encoder.patch.b", (C,), "bias")
        self.pos_emb = reg.add("encoder.pos", (L, C), "weight", fan_in=C)
        self.speed_proj = Mlp(reg, "encoder.speed", [1, C])
        self.encoder_blocks = [
            TransformerLayer(reg, f"encoder.block{i}", C, H, cfg.ff_mult)
            for i in range(cfg.encoder_layers)
        ]
        self.policy_head = Mlp(reg, "policy.head", [C, hidden, T * 4])
        self.segment_mlp = Mlp(reg, "world.segment", [N * 3, hidden, C])
        self.slot_emb = reg.add("world.slot", (L + 1, C), "weight", fan_in=C)
        self.world_blocks = [
            TransformerLayer(reg, f"world.block{i}", C, H, cfg.ff_mult)
            for i in range(cfg.world_model_layers)
        ]
        self.traj_emb = Mlp(reg, "summarizer.traj", [T * 3, C])
        pooled = (K + 1) if cfg.include_z0 else K
        self.offset_head = Mlp(reg, "summarizer.head",
                               [pooled * C + C, 2 * hidden, T * 3])
        self.gate_head = Mlp(reg, "gate.head", [C, hidden, 1])

        if seed is not None:
            init_params(reg, seed)

    # -- scene encoding -----------------------------------------------------

    def encode_scene(self, grids: np.ndarray, speeds: np.ndarray) -> Tensor:
        """Observation batch -> latent tokens (B, L, C). Deterministic."""
        cfg = self.cfg
        patches = patchify(grids, cfg.latent_tokens)
        if patches.ndim == 2:
            patches = patches[None]
        if patches.shape[-1] != self.patch_w.shape[0]:
            raise ShapeError(
                f"observation produces {patches.shape[-1]} values per patch, "
                f"encoder expects {self.patch_w.shape[0]}"
            )
        tokens = ad.matmul(Tensor(patches), self.patch_w) + self.patch_b
        tokens = tokens + self.pos_emb
        sp = np.asarray(speeds, dtype=np.float64).reshape(-1, 1) / cfg.v_max
        speed_tok = self.speed_proj(Tensor(sp))
        tokens = tokens + ad.reshape(speed_tok, (-1, 1, cfg.channels))
        for block in self.encoder_blocks:
            tokens = block(tokens)
        return tokens

    def encode_observation(self, obs: Observation) -> Tensor:
        """Single observation -> (1, L, C) latent."""
        return self.encode_scene(obs.grid[None], np.array([obs.speed]))

    # -- trajectory proposal -------------------------------------------------

    def propose_trajectory(self, z: Tensor) -> Tensor:
        """Latent -> (B, T, 3) trajectory; theta from an atan2(sin, cos) pair."""
        cfg = self.cfg
        pooled = ad.mean(z, axis=-2)
        raw = ad.reshape(self.policy_head(pooled), (-1, cfg.horizon_steps, 4))
        xy = ad.slice_axis(raw, -1, 0, 2) * cfg.traj_scale
        sin_c = ad.slice_axis(raw, -1, 2, 3)
        cos_c = ad.slice_axis(raw, -1, 3, 4)
        theta = ad.atan2(sin_c, cos_c)
        return ad.concat([xy, theta], axis=-1)

    # -- world-model rollout ---------------------------------------------------

    def _normalize_traj(self, w: Tensor) -> Tensor:
        xy, theta = _split_xy_theta(w)
        return ad.concat([xy * (1.0 / self.cfg.traj_scale), theta], axis=-1)

    def encode_segment(self, seg: Tensor) -> Tensor:
        """(B, N, 3) segment -> (B, 1, C) token."""
        n = self.cfg.segment_length
        if seg.shape[-2] != n or seg.shape[-1] != 3:
            raise ShapeError(
                f"segment must be ({n}, 3) per sample, got {seg.shape}"
            )
        flat = ad.reshape(self._normalize_traj(seg), (-1, n * 3))
        return ad.reshape(self.segment_mlp(flat), (-1, 1, self.cfg.channels))

    def wm_step(self, z: Tensor, seg: Tensor) -> Tensor:
        """One reasoning step: predicted latent after executing ``seg``."""
        cfg = self.cfg
        if z.shape[-2] != cfg.latent_tokens or z.shape[-1] != cfg.channels:
            raise ShapeError(
                f"latent must be ({cfg.latent_tokens}, {cfg.channels}) per "
                f"sample, got {z.shape}"
            )
        token = self.encode_segment(seg)
        seq = ad.concat([z, token], axis=-2) + self.slot_emb
        for block in self.world_blocks:
            seq = block(seq)
        return ad.slice_axis(seq, -2, 0, cfg.latent_tokens)

    def cot_rollout(self, z0: Tensor, w: Tensor, k: int | None = None) -> list[Tensor]:
        """Latent chain [z0, z1, ..., zK] under the segmented trajectory."""
        k = self.cfg.cot_steps if k is None else k
        chain = [z0]
        for seg in segment_trajectory(w, k):
            chain.append(self.wm_step(chain[-1], seg))
        return chain

    # -- refinement ------------------------------------------------------------

    def summarize(self, chain: list[Tensor], w: Tensor) -> Tensor:
        """Chain + proposal -> refined trajectory (offsets added to ``w``)."""
        cfg = self.cfg
        if len(chain) != cfg.cot_steps + 1:
            raise ShapeError(
                f"chain must hold {cfg.cot_steps + 1} latents, got {len(chain)}"
            )
        used = chain if cfg.include_z0 else chain[1:]
        pooled = ad.concat([ad.mean(zk, axis=-2) for zk in used], axis=-1)
        wflat = ad.reshape(self._normalize_traj(w), (-1, cfg.horizon_steps * 3))
        features = ad.concat([pooled, self.traj_emb(wflat)], axis=-1)
        offsets = ad.reshape(self.offset_head(features),
                             (-1, cfg.horizon_steps, 3))
        off_xy = ad.slice_axis(offsets, -1, 0, 2) * cfg.offset_scale
        off_theta = ad.slice_axis(offsets, -1, 2, 3)
        w_xy, w_theta = _split_xy_theta(w)
        return ad.concat(
            [w_xy + off_xy, ad.wrap_angle(w_theta + off_theta)], axis=-1
        )

    # -- difficulty gate ---------------------------------------------------------

    def think_score(self, z: Tensor) -> Tensor:
        """Latent -> difficulty score in [0, 1], shape (B,)."""
        pooled = ad.mean(z, axis=-2)
        return ad.reshape(ad.sigmoid(self.gate_head(pooled)), (-1,))

    # -- convenience ---------------------------------------------------------------

    def zero_summarizer_head(self) -> None:
        """Zero the offset head's output layer: refinement becomes identity."""
        self.offset_head.weights[-1].data[:] = 0.0
        self.offset_head.biases[-1].data[:] = 0.0

    def params(self) -> dict[str, Tensor]:
        return self.registry.tensors()
