"""Loss terms and gating rules for the planner.

Differentiable pieces take and return tensors with a leading batch axis
(scalars and single samples work too).  The improvement ratio and flag are
plain numpy: the flag gates which error term receives gradient, it never
carries gradient itself.
"""

from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..autodiff import ShapeError, Tensor


def _coerce(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def l1_error(w, w_gt, reduction: str = "sum") -> Tensor:
    """L1 distance between trajectories; heading residuals are wrapped.

    Sums |dx| + |dy| + |wrap(dtheta)| over all waypoints.  With
    ``reduction="mean"`` the sum is divided by the element count (rescale
    the loss weights accordingly).  Returns shape (B,) for batched input,
    a scalar tensor otherwise.
    """
    w, w_gt = _coerce(w), _coerce(w_gt)
    if w.shape != w_gt.shape:
        raise ShapeError(f"trajectory shapes differ: {w.shape} vs {w_gt.shape}")
    if w.shape[-1] != 3:
        raise ShapeError(f"trajectories must have (x, y, theta) rows, got {w.shape}")
    diff = w - w_gt
    pos = ad.slice_axis(diff, -1, 0, 2).abs()
    theta = ad.wrap_angle(ad.slice_axis(diff, -1, 2, 3)).abs()
    per_entry = ad.concat([pos, theta], axis=-1)
    out = per_entry.sum(-1).sum(-1)
    if reduction == "mean":
        out = out * (1.0 / (w.shape[-2] * 3))
    elif reduction != "sum":
        raise ValueError(f"unknown reduction {reduction!r}")
    return out


def refinement_gain(e_init, e_ref, eps: float = 1e-6) -> np.ndarray:
    """Relative error reduction (e_init - e_ref) / (e_init + eps).

    Negative when refinement hurts; exactly zero when both errors vanish.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    e_init = np.asarray(e_init, dtype=np.float64)
    e_ref = np.asarray(e_ref, dtype=np.float64)
    if np.any(e_init < 0) or np.any(e_ref < 0):
        raise ValueError("errors must be non-negative")
    return (e_init - e_ref) / (e_init + eps)


def thinking_flag(r, alpha: float = 0.25) -> np.ndarray:
    """Binary supervision: True iff the gain strictly exceeds alpha."""
    return np.asarray(r, dtype=np.float64) > alpha


def trajectory_loss(g, e_ref: Tensor, e_init: Tensor) -> Tensor:
    """g * e_ref + (1 - g) * e_init with g constant in {0, 1} per sample.

    Gradient flows only through the selected branch (multiplying by the
    constant 0 kills the other.)
    """
    g = np.asarray(g, dtype=np.float64)
    if not np.all((g == 0.0) | (g == 1.0)):
        raise ValueError("the thinking flag must be exactly 0 or 1")
    return g * _coerce(e_ref) + (1.0 - g) * _coerce(e_init)


def auto_think_loss(d, y) -> Tensor:
    """Binary cross-entropy of the difficulty score against the flag.

    The score is clamped to [1e-7, 1 - 1e-7] before the logarithms.
    """
    d = _coerce(d)
    y = np.asarray(y, dtype=np.float64)
    if not np.all((y == 0.0) | (y == 1.0)):
        raise ValueError("the target label must be exactly 0 or 1")
    dc = d.clip(1e-7, 1.0 - 1e-7)
    return -(y * dc.log() + (1.0 - y) * ad.sub(1.0, dc).log())


def latent_consistency_loss(chain: list[Tensor], targets: list,
                            reduction: str = "sum") -> Tensor:
    """Mean over steps of the L1 gap between rolled-out and target latents.

    ``targets`` holds K gradient-free latents matching chain[1:]; the
    pre-rollout element chain[0] has no target.
    """
    k = len(targets)
    if len(chain) != k + 1:
        raise ShapeError(
            f"chain of {len(chain)} latents needs {len(chain) - 1} targets, "
            f"got {k}"
        )
    if k == 0:
        raise ShapeError("at least one target latent is required")
    total = None
    for zk, target in zip(chain[1:], targets):
        target = target.data if isinstance(target, Tensor) else np.asarray(target)
        if zk.shape != target.shape:
            raise ShapeError(
                f"latent shape {zk.shape} does not match target {target.shape}"
            )
        term = (zk - Tensor(target)).abs().sum(-1).sum(-1)
        if reduction == "mean":
            term = term * (1.0 / (zk.shape[-2] * zk.shape[-1]))
        elif reduction != "sum":
            raise ValueError(f"unknown reduction {reduction!r}")
        total = term if total is None else total + term
    return total * (1.0 / k)


def total_loss(l_traj, l_lat, l_auto, lambda_lat: float = 0.1,
               lambda_auto: float = 0.1) -> Tensor:
    """Weighted objective: trajectory + consistency + gate supervision."""
    if lambda_lat < 0 or lambda_auto < 0:
        raise ValueError("loss weights must be non-negative")
    return _coerce(l_traj) + lambda_lat * _coerce(l_lat) \
        + lambda_auto * _coerce(l_auto)
