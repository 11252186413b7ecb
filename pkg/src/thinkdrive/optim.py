"""Adam with bias correction over named parameter collections."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import ShapeError, Tensor


@dataclass
class AdamState:
    """First/second-moment buffers plus the shared step counter.

    Buffers are keyed by parameter name and always shape-congruent with the
    parameter they track.  ``step`` increases by exactly one per update.
    """

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def ensure(self, name: str, shape: tuple[int, ...]) -> None:
        if name not in self.m:
            self.m[name] = np.zeros(shape, dtype=np.float64)
            self.v[name] = np.zeros(shape, dtype=np.float64)
        elif self.m[name].shape != shape:
            raise ShapeError(
                f"Adam buffer for {name!r} has shape {self.m[name].shape}, "
                f"parameter has {shape}"
            )


def adam_step(params: dict[str, Tensor], state: AdamState) -> None:
    """One in-place Adam update from the parameters' ``grad`` buffers.

    Parameters with a missing gradient are treated as zero-gradient (their
    moments still decay once buffers exist).  Deterministic: iteration
    follows the dict order of ``params``, which registries keep stable.
    """
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for name, p in params.items():
        g = p.grad
        if g is None:
            g = np.zeros_like(p.data)
        elif g.shape != p.data.shape:
            raise ShapeError(
                f"gradient for {name!r} has shape {g.shape}, parameter has "
                f"{p.data.shape}"
            )
        state.ensure(name, p.data.shape)
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        m_hat = m / bc1
        v_hat = v / bc2
        p.data -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
