"""The two-channel occupancy field.

A small fully connected trunk with softplus activations feeds two sigmoid
heads, one per instance (human/hand channel and object channel). Queries
carry per-view pixel-aligned features, normalized camera distances and
view-direction positional embeddings; view fusion is a plain mean so the
evaluation is invariant to duplicating identical views. Forward, reverse
mode gradients and the Adam-ready parameter layout are all explicit
float64 numpy so finite-difference checks stay tight.

Union and intersection field algebra: max and product of the two channels.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import NonUnitDirection, ShapeMismatch

FORMAT_VERSION = 1


# ---------------------------------------------------------------------------
# Positional embedding of view directions
# ---------------------------------------------------------------------------


def positional_embed(d, n_freq: int) -> np.ndarray:
    """Sinusoidal embedding [sin(2^k pi d), cos(2^k pi d)] for k < n_freq.

    Accepts one unit 3-vector or a batch (.., 3); output has 6 * n_freq
    trailing channels.
    """
    a = np.asarray(d, dtype=np.float64)
    norm = np.linalg.norm(a, axis=-1)
    if np.any(np.abs(norm - 1.0) > 1e-6):
        raise NonUnitDirection("positional_embed expects unit directions")
    if n_freq == 0:
        return np.zeros(a.shape[:-1] + (0,))
    parts = []
    for k in range(n_freq):
        ang = (2.0**k) * np.pi * a
        parts.append(np.sin(ang))
        parts.append(np.cos(ang))
    return np.concatenate(parts, axis=-1)


def embed_dim(n_freq: int) -> int:
    return 6 * n_freq


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------


@dataclass
class MlpParams:
    """Weights for the shared trunk plus the two sigmoid output heads."""

    trunk_w: list[np.ndarray]
    trunk_b: list[np.ndarray]
    head_w: list[np.ndarray]  # [human, object], each (hidden, 1)
    head_b: list[np.ndarray]  # [human, object], each (1,)

    @property
    def in_dim(self) -> int:
        return self.trunk_w[0].shape[0] if self.trunk_w else self.head_w[0].shape[0]

    def arrays(self) -> list[np.ndarray]:
        """Flat list of parameter arrays in a fixed order (optimizer layout)."""
        out = []
        for w, b in zip(self.trunk_w, self.trunk_b):
            out += [w, b]
        for w, b in zip(self.head_w, self.head_b):
            out += [w, b]
        return out

    def copy(self) -> "MlpParams":
        return MlpParams(
            [w.copy() for w in self.trunk_w],
            [b.copy() for b in self.trunk_b],
            [w.copy() for w in self.head_w],
            [b.copy() for b in self.head_b],
        )

    def zeros_like(self) -> "MlpParams":
        return MlpParams(
            [np.zeros_like(w) for w in self.trunk_w],
            [np.zeros_like(b) for b in self.trunk_b],
            [np.zeros_like(w) for w in self.head_w],
            [np.zeros_like(b) for b in self.head_b],
        )


def init_mlp_params(in_dim: int, hidden: int = 128, depth: int = 4, seed: int = 0) -> MlpParams:
    """He-style initialization of a `depth`-layer trunk plus two 1-unit heads."""
    rng = np.random.default_rng(seed)
    dims = [in_dim] + [hidden] * depth
    trunk_w, trunk_b = [], []
    for a, b in zip(dims[:-1], dims[1:]):
        trunk_w.append(rng.normal(scale=np.sqrt(2.0 / a), size=(a, b)))
        trunk_b.append(np.zeros(b))
    head_w = [rng.normal(scale=np.sqrt(1.0 / hidden), size=(hidden, 1)) for _ in range(2)]
    head_b = [np.zeros(1) for _ in range(2)]
    return MlpParams(trunk_w, trunk_b, head_w, head_b)


# ---------------------------------------------------------------------------
# Queries
# ---------------------------------------------------------------------------


class Fusion(Enum):
    MEAN = "mean"


@dataclass
class FieldQuery:
    """A batch of field queries with per-view conditioning.

    features: (n_views, n, c) pixel-aligned features
    depths:   (n_views, n) camera distances normalized by scene diagonal
    embeds:   (n_views, n, 6 * n_freq) view-direction embeddings
    points:   (n, 3) the query positions (kept for bookkeeping)
    """

    points: np.ndarray
    features: np.ndarray
    depths: np.ndarray
    embeds: np.ndarray

    def __post_init__(self):
        if self.features.ndim != 3 or self.depths.ndim != 2 or self.embeds.ndim != 3:
            raise ShapeMismatch("FieldQuery arrays must be (views, n, c) / (views, n)")
        if not (len(self.features) == len(self.depths) == len(self.embeds)) or len(self.features) < 1:
            raise ShapeMismatch("FieldQuery needs >= 1 aligned views")

    @property
    def n_points(self) -> int:
        return self.features.shape[1]

    def fused_input(self, fusion: Fusion = Fusion.MEAN) -> np.ndarray:
        """Mean over views of [features | depth | embedding], per point."""
        if fusion is not Fusion.MEAN:
            raise ValueError(f"unknown fusion {fusion}")
        per_view = np.concatenate(
            [self.features, self.depths[..., None], self.embeds], axis=-1
        )
        return per_view.mean(axis=0)


def query_input_dim(channels: int, n_freq: int) -> int:
    return channels + 1 + embed_dim(n_freq)


# ---------------------------------------------------------------------------
# Forward / backward
# ---------------------------------------------------------------------------


def _softplus(z: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, z)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class ForwardCache:
    x0: np.ndarray
    pre: list[np.ndarray]
    act: list[np.ndarray]
    s: tuple[np.ndarray, np.ndarray]


def eval_field(
    params: MlpParams,
    query: FieldQuery | np.ndarray,
    fusion: Fusion = Fusion.MEAN,
    return_cache: bool = False,
):
    """Evaluate both occupancy channels; returns (s_h, s_o) in (0, 1).

    Pure function of (params, query): repeated calls are bitwise identical.
    Pass `return_cache=True` to keep activations for `backward`.
    """
    x = query.fused_input(fusion) if isinstance(query, FieldQuery) else np.asarray(query, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != params.in_dim:
        raise ShapeMismatch(f"query dim {x.shape[1]} != param input dim {params.in_dim}")
    pre, act = [], []
    h = x
    for w, b in zip(params.trunk_w, params.trunk_b):
        z = h @ w + b
        pre.append(z)
        h = _softplus(z)
        act.append(h)
    s_h = _sigmoid(h @ params.head_w[0] + params.head_b[0])[:, 0]
    s_o = _sigmoid(h @ params.head_w[1] + params.head_b[1])[:, 0]
    if return_cache:
        return (s_h, s_o), ForwardCache(x0=x, pre=pre, act=act, s=(s_h, s_o))
    return s_h, s_o


def backward(params: MlpParams, cache: ForwardCache, grad_s_h, grad_s_o) -> MlpParams:
    """Exact reverse-mode parameter gradients given upstream dL/ds per point.

    Returns gradients in an MlpParams-shaped container.
    """
    grad_s_h = np.asarray(grad_s_h, dtype=np.float64).reshape(-1)
    grad_s_o = np.asarray(grad_s_o, dtype=np.float64).reshape(-1)
    n = cache.x0.shape[0]
    if len(grad_s_h) != n or len(grad_s_o) != n:
        raise ShapeMismatch("upstream gradient length must match the forward batch")
    g = params.zeros_like()
    h_last = cache.act[-1] if cache.act else cache.x0
    s_h, s_o = cache.s
    d_logit_h = (grad_s_h * s_h * (1.0 - s_h))[:, None]
    d_logit_o = (grad_s_o * s_o * (1.0 - s_o))[:, None]
    g.head_w[0][:] = h_last.T @ d_logit_h
    g.head_b[0][:] = d_logit_h.sum(axis=0)
    g.head_w[1][:] = h_last.T @ d_logit_o
    g.head_b[1][:] = d_logit_o.sum(axis=0)
    dh = d_logit_h @ params.head_w[0].T + d_logit_o @ params.head_w[1].T
    for i in range(len(params.trunk_w) - 1, -1, -1):
        dz = dh * _sigmoid(cache.pre[i])  # softplus' = sigmoid
        below = cache.act[i - 1] if i > 0 else cache.x0
        g.trunk_w[i][:] = below.T @ dz
        g.trunk_b[i][:] = dz.sum(axis=0)
        dh = dz @ params.trunk_w[i].T
    return g


# ---------------------------------------------------------------------------
# Union / intersection algebra
# ---------------------------------------------------------------------------


def union_value(s_h, s_o):
    """Occupancy of the union field: max of the channels."""
    return np.maximum(np.asarray(s_h, dtype=np.float64), np.asarray(s_o, dtype=np.float64))


def intersection_value(s_h, s_o):
    """Occupancy of the intersection field: product of the channels."""
    return np.asarray(s_h, dtype=np.float64) * np.asarray(s_o, dtype=np.float64)


# ---------------------------------------------------------------------------
# Parameter checkpoints: raw little-endian float64 + sidecar text header
# ---------------------------------------------------------------------------


def save_params(path_base: str | os.PathLike, params: MlpParams):
    arrays = params.arrays()
    with open(f"{path_base}.bin", "wb") as fh:
        for a in arrays:
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())
    with open(f"{path_base}.txt", "w", encoding="utf-8") as fh:
        fh.write(f"bifield-params {FORMAT_VERSION}\n")
        fh.write(f"trunk_layers {len(params.trunk_w)}\n")
        for i, (w, _) in enumerate(zip(params.trunk_w, params.trunk_b)):
            fh.write(f"trunk {i} {w.shape[0]} {w.shape[1]}\n")
        fh.write(f"heads 2 {params.head_w[0].shape[0]}\n")


def load_params(path_base: str | os.PathLike) -> MlpParams:
    with open(f"{path_base}.txt", "r", encoding="utf-8") as fh:
        lines = [ln.split() for ln in fh if ln.strip()]
    if lines[0][0] != "bifield-params" or int(lines[0][1]) != FORMAT_VERSION:
        raise ValueError("unsupported params header")
    n_layers = int(lines[1][1])
    shapes = []
    for i in range(n_layers):
        _, _, a, b = lines[2 + i]
        shapes.append((int(a), int(b)))
    hidden = int(lines[2 + n_layers][2])
    with open(f"{path_base}.bin", "rb") as fh:
        raw = np.frombuffer(fh.read(), dtype="<f8")
    trunk_w, trunk_b, head_w, head_b = [], [], [], []
    pos = 0

    def take(shape):
        nonlocal pos
        size = int(np.prod(shape))
        out = raw[pos : pos + size].reshape(shape).copy()
        pos += size
        return out

    for a, b in shapes:
        trunk_w.append(take((a, b)))
        trunk_b.append(take((b,)))
    for _ in range(2):
        head_w.append(take((hidden, 1)))
        head_b.append(take((1,)))
    if pos != len(raw):
        raise ValueError("params blob size does not match header")
    return MlpParams(trunk_w, trunk_b, head_w, head_b)
