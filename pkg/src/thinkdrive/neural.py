"""Reusable network blocks: parameter registry, MLP, transformer layer.

All forward functions accept arbitrary leading batch dimensions; the
documented shapes show the trailing (per-sample) part only.
"""

from __future__ import annotations

import math

import numpy as np

from . import autodiff as ad
from .autodiff import ShapeError, Tensor


class ParamRegistry:
    """Ordered, uniquely named parameter collection.

    Iteration order is insertion order, which is fixed by the architecture
    config, so optimizer sweeps and checkpoints are reproducible run to run.
    Each entry carries an init kind: ``weight`` (fan-in scaled uniform),
    ``bias`` (zeros) or ``gain`` (ones).
    """

    def __init__(self):
        self._params: dict[str, Tensor] = {}
        self._kinds: dict[str, tuple[str, int]] = {}

    def add(self, name: str, shape: tuple[int, ...], kind: str = "weight",
            fan_in: int | None = None) -> Tensor:
        if name in self._params:
            raise ValueError(f"duplicate parameter name {name!r}")
        if kind not in ("weight", "bias", "gain"):
            raise ValueError(f"unknown init kind {kind!r}")
        if kind == "weight" and fan_in is None:
            fan_in = shape[0] if len(shape) > 0 else 1
        t = Tensor(np.zeros(shape, dtype=np.float64), requires_grad=True)
        self._params[name] = t
        self._kinds[name] = (kind, fan_in or 0)
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def tensors(self) -> dict[str, Tensor]:
        return self._params

    def kind(self, name: str) -> str:
        return self._kinds[name][0]

    @property
    def total_size(self) -> int:
        return sum(p.size for p in self._params.values())

    def zero_grad(self) -> None:
        for p in self._params.values():
            p.grad = None

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self._params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        missing = set(self._params) - set(state)
        extra = set(state) - set(self._params)
        if missing or extra:
            raise KeyError(
                f"parameter name mismatch: missing={sorted(missing)} "
                f"extra={sorted(extra)}"
            )
        for name, p in self._params.items():
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != p.data.shape:
                raise ShapeError(
                    f"checkpoint shape {arr.shape} != parameter shape "
                    f"{p.data.shape} for {name!r}"
                )
            p.data = arr.copy()


def init_params(registry: ParamRegistry, seed: int) -> None:
    """Fan-in scaled uniform init: W ~ U(+-sqrt(3/fan_in)), so Var = 1/fan_in.

    Biases start at zero, layer-norm gains at one.  Draw order follows the
    registry order, so a fixed seed reproduces parameters bitwise.
    """
    rng = np.random.default_rng(seed)
    for name, p in registry.items():
        kind, fan_in = registry._kinds[name]
        if kind == "weight":
            bound = math.sqrt(3.0 / max(fan_in, 1))
            p.data = rng.uniform(-bound, bound, size=p.data.shape)
        elif kind == "bias":
            p.data = np.zeros(p.data.shape, dtype=np.float64)
        else:
            p.data = np.ones(p.data.shape, dtype=np.float64)


_ACTIVATIONS = {
    "gelu": ad.gelu,
    "relu": ad.relu,
    "sigmoid": ad.sigmoid,
}


class Mlp:
    """Affine stack with a fixed hidden activation (GELU by default)."""

    def __init__(self, registry: ParamRegistry, prefix: str, widths: list[int],
                 activation: str = "gelu"):
        if len(widths) < 2:
            raise ValueError("an MLP needs at least input and output widths")
        if activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.widths = list(widths)
        self.activation = activation
        self.weights: list[Tensor] = []
        self.biases: list[Tensor] = []
        for i, (w_in, w_out) in enumerate(zip(widths[:-1], widths[1:])):
            self.weights.append(
                registry.add(f"{prefix}.w{i}", (w_in, w_out), "weight", fan_in=w_in)
            )
            self.biases.append(registry.add(f"{prefix}.b{i}", (w_out,), "bias"))

    @property
    def param_count(self) -> int:
        return sum(a * b + b for a, b in zip(self.widths[:-1], self.widths[1:]))

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.widths[0]:
            raise ShapeError(
                f"MLP expects trailing width {self.widths[0]}, got {x.shape}"
            )
        act = _ACTIVATIONS[self.activation]
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            x = ad.matmul(x, w) + b
            if i < last:
                x = act(x)
        return x


class TransformerLayer:
    """Pre-norm residual block: x + MHSA(LN(x)), then x + FF(LN(x)).

    Operates on (S, C) sequences (leading batch dimensions allowed).
    """

    def __init__(self, registry: ParamRegistry, prefix: str, width: int,
                 heads: int, ff_mult: int = 2):
        if width % heads != 0:
            raise ShapeError(f"width {width} not divisible by heads {heads}")
        self.width = width
        self.heads = heads
        self.head_width = width // heads
        r, p = registry, prefix
        self.ln1_g = r.add(f"{p}.ln1.g", (width,), "gain")
        self.ln1_b = r.add(f"{p}.ln1.b", (width,), "bias")
        self.wq = r.add(f"{p}.attn.wq", (width, width), "weight", fan_in=width)
        self.bq = r.add(f"{p}.attn.bq", (width,), "bias")
        # no key bias: softmax is invariant to a per-query constant shift,
        # so its gradient is identically zero
        self.wk = r.add(f"{p}.attn.wk", (width, width), "weight", fan_in=width)
        self.wv = r.add(f"{p}.attn.wv", (width, width), "weight", fan_in=width)
        self.bv = r.add(f"{p}.attn.bv", (width,), "bias")
        self.wo = r.add(f"{p}.attn.wo", (width, width), "weight", fan_in=width)
        self.bo = r.add(f"{p}.attn.bo", (width,), "bias")
        self.ln2_g = r.add(f"{p}.ln2.g", (width,), "gain")
        self.ln2_b = r.add(f"{p}.ln2.b", (width,), "bias")
        ff = ff_mult * width
        self.w1 = r.add(f"{p}.ff.w1", (width, ff), "weight", fan_in=width)
        self.b1 = r.add(f"{p}.ff.b1", (ff,), "bias")
        self.w2 = r.add(f"{p}.ff.w2", (ff, width), "weight", fan_in=ff)
        self.b2 = r.add(f"{p}.ff.b2", (width,), "bias")

    def _attention(self, normed: Tensor) -> tuple[Tensor, list[Tensor]]:
        q = ad.matmul(normed, self.wq) + self.bq
        k = ad.matmul(normed, self.wk)
        v = ad.matmul(normed, self.wv) + self.bv
        scale = 1.0 / math.sqrt(self.head_width)
        contexts = []
        probs = []
        for h in range(self.heads):
            lo, hi = h * self.head_width, (h + 1) * self.head_width
            qh = ad.slice_axis(q, -1, lo, hi)
            kh = ad.slice_axis(k, -1, lo, hi)
            vh = ad.slice_axis(v, -1, lo, hi)
            scores = ad.matmul(qh, ad.transpose(kh, -1, -2)) * scale
            attn = ad.softmax(scores, axis=-1)
            probs.append(attn)
            contexts.append(ad.matmul(attn, vh))
        merged = ad.concat(contexts, axis=-1)
        return ad.matmul(merged, self.wo) + self.bo, probs

    def attention_probs(self, x: Tensor) -> list[np.ndarray]:
        """Per-head attention weights for inspection (rows sum to 1)."""
        if x.shape[-1] != self.width:
            raise ShapeError(f"expected width {self.width}, got {x.shape}")
        normed = ad.layer_norm(x, self.ln1_g, self.ln1_b)
        _, probs = self._attention(normed)
        return [p.data for p in probs]

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.width:
            raise ShapeError(f"expected width {self.width}, got {x.shape}")
        attn_out, _ = self._attention(ad.layer_norm(x, self.ln1_g, self.ln1_b))
        x = x + attn_out
        h = ad.layer_norm(x, self.ln2_g, self.ln2_b)
        ff = ad.matmul(ad.gelu(ad.matmul(h, self.w1) + self.b1), self.w2) + self.b2
        return x + ff
