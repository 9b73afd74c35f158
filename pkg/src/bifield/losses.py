"""Complementary training objectives.

Three terms, each with value and analytic gradients w.r.t. the predicted
channel occupancies (s_h, s_o):

- instance supervision: mean squared error of both channels against the
  per-instance ground truth carried by synthetic samples;
- union supervision: mean squared error of max(s_h, s_o) against the union
  ground truth carried by real-style samples;
- intersection penalty: mean of max(0, s_o - 0.5)^(1-gamma) *
  max(0, s_h - 0.5)^gamma, pushing co-occupied points apart. The rigidity
  coefficient gamma in [0, 1] steers which channel absorbs the push: at
  gamma = 1 the object-channel gradient is identically zero (only the
  human/hand retreats, the object stays rigid), at gamma = 0 the roles
  swap.

A term of the penalty vanishes whenever EITHER max(0, .) factor is zero,
regardless of a zero exponent; 0^0 is never evaluated as 1. With the
convention 0^0 = 1 a rigid configuration would penalize the human channel
even where the object is absent, defeating the point of a co-occupancy
penalty.

Routing: instance loss only for synthetic samples (object channel alone for
object-only sets), union and intersection losses only for real-union
samples. Sums are computed in a fixed order so training is reproducible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import MissingGroundTruth, MissingInstanceGroundTruth, ShapeMismatch
from .mesh import SampleSet, SampleSource


@dataclass(frozen=True)
class LossConfig:
    """Rigidity coefficient and component weights (paper default: plain sum)."""

    gamma_rig: float = 1.0
    w_i: float = 1.0
    w_u: float = 1.0
    w_in: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.gamma_rig <= 1.0:
            raise ValueError("gamma_rig must lie in [0, 1]")
        if min(self.w_i, self.w_u, self.w_in) < 0:
            raise ValueError("loss weights must be non-negative")


# Material tags -> rigidity coefficient, as annotated per object type.
MATERIAL_GAMMA = {"rigid": 1.0, "flexible": 0.75, "soft": 0.5}


@dataclass
class LossReport:
    """Per-batch loss components, their weighted total, and point gradients."""

    l_i: float
    l_u: float
    l_in: float
    l_total: float
    grad_s_h: np.ndarray
    grad_s_o: np.ndarray
    source: str = ""
    gamma_rig: float = 1.0

    def to_record(self, step: int) -> dict:
        return {
            "step": step,
            "l_i": self.l_i,
            "l_u": self.l_u,
            "l_in": self.l_in,
            "l_total": self.l_total,
            "gamma_rig": self.gamma_rig,
        }


def _as_pred(s_h, s_o):
    s_h = np.asarray(s_h, dtype=np.float64).reshape(-1)
    s_o = np.asarray(s_o, dtype=np.float64).reshape(-1)
    if len(s_h) != len(s_o):
        raise ShapeMismatch("prediction channels must have equal length")
    return s_h, s_o


def loss_instance(s_h, s_o, gt: SampleSet):
    """Per-instance MSE on both channels (object channel alone for
    object-only sets); returns (value, dL/ds_h, dL/ds_o)."""
    s_h, s_o = _as_pred(s_h, s_o)
    n = len(s_h)
    if gt.source is SampleSource.REAL_UNION:
        raise MissingInstanceGroundTruth(
            "real-union samples carry no instance channels; route them to the union loss"
        )
    if gt.occ_object is None or len(gt.occ_object) != n:
        raise MissingInstanceGroundTruth("object-channel ground truth missing or misaligned")
    g_o = gt.occ_object.astype(np.float64)
    d_h = np.zeros(n)
    r = s_o - g_o
    value = float(np.mean(r * r))
    d_o = 2.0 * r / n
    if gt.source is SampleSource.SYNTHETIC_INSTANCE:
        if gt.occ_human is None or len(gt.occ_human) != n:
            raise MissingInstanceGroundTruth("human-channel ground truth missing or misaligned")
        g_h = gt.occ_human.astype(np.float64)
        rh = s_h - g_h
        value += float(np.mean(rh * rh))
        d_h = 2.0 * rh / n
    return value, d_h, d_o


def loss_union(s_h, s_o, occ_union):
    """MSE of max(s_h, s_o) against the union ground truth.

    The subgradient routes to the argmax channel; exact ties split equally.
    Returns (value, dL/ds_h, dL/ds_o).
    """
    s_h, s_o = _as_pred(s_h, s_o)
    if occ_union is None:
        raise MissingGroundTruth("union ground truth missing")
    g = np.asarray(occ_union, dtype=np.float64).reshape(-1)
    if len(g) != len(s_h):
        raise ShapeMismatch("union ground truth misaligned with predictions")
    n = len(s_h)
    m = np.maximum(s_h, s_o)
    r = m - g
    value = float(np.mean(r * r))
    base = 2.0 * r / n
    h_wins = s_h > s_o
    o_wins = s_o > s_h
    tie = ~h_wins & ~o_wins
    d_h = np.where(h_wins, base, 0.0) + np.where(tie, 0.5 * base, 0.0)
    d_o = np.where(o_wins, base, 0.0) + np.where(tie, 0.5 * base, 0.0)
    return value, d_h, d_o


def loss_intersection(s_h, s_o, cfg: LossConfig):
    """Co-occupancy penalty mean(max(0, s_o-0.5)^(1-g) * max(0, s_h-0.5)^g).

    Zero-base convention: a point contributes 0 whenever either factor's
    base is zero, even under a zero exponent. Gradients at the gamma
    extremes are exactly zero on the protected channel (not merely small).
    Returns (value, dL/ds_h, dL/ds_o).
    """
    s_h, s_o = _as_pred(s_h, s_o)
    g = cfg.gamma_rig
    n = len(s_h)
    a = s_o - 0.5  # object excess
    b = s_h - 0.5  # human excess
    active = (a > 0.0) & (b > 0.0)
    d_h = np.zeros(n)
    d_o = np.zeros(n)
    if not active.any():
        return 0.0, d_h, d_o
    aa = a[active]
    bb = b[active]
    if g == 1.0:
        terms = bb
        d_h[active] = 1.0 / n
        # d_o stays identically zero: the object factor is the constant 1
    elif g == 0.0:
        terms = aa
        d_o[active] = 1.0 / n
    else:
        fa = aa ** (1.0 - g)
        fb = bb**g
        terms = fa * fb
        d_o[active] = (1.0 - g) * aa ** (-g) * fb / n
        d_h[active] = g * fa * bb ** (g - 1.0) / n
    value = float(terms.sum() / n)
    return value, d_h, d_o


def loss_total(s_h, s_o, gt: SampleSet, cfg: LossConfig) -> LossReport:
    """Weighted sum with source routing: synthetic -> instance loss,
    real-union -> union + intersection losses."""
    s_h, s_o = _as_pred(s_h, s_o)
    n = len(s_h)
    if gt.points is not None and len(gt) != n:
        raise ShapeMismatch("predictions misaligned with the sample set")
    l_i = l_u = l_in = 0.0
    d_h = np.zeros(n)
    d_o = np.zeros(n)
    if gt.source is SampleSource.REAL_UNION:
        l_u, duh, duo = loss_union(s_h, s_o, gt.occ_union)
        l_in, dih, dio = loss_intersection(s_h, s_o, cfg)
        d_h = cfg.w_u * duh + cfg.w_in * dih
        d_o = cfg.w_u * duo + cfg.w_in * dio
    else:
        l_i, dih, dio = loss_instance(s_h, s_o, gt)
        d_h = cfg.w_i * dih
        d_o = cfg.w_i * dio
    total = cfg.w_i * l_i + cfg.w_u * l_u + cfg.w_in * l_in
    return LossReport(
        l_i=l_i,
        l_u=l_u,
        l_in=l_in,
        l_total=total,
        grad_s_h=d_h,
        grad_s_o=d_o,
        source=gt.source.value,
        gamma_rig=cfg.gamma_rig,
    )


def write_loss_log(path, records: list[dict]):
    """Line-delimited structured text log, one record per training step."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


def read_loss_log(path) -> list[dict]:
    with open(path, "r", encoding="utf-8") as fh:
        return [json.loads(ln) for ln in fh if ln.strip()]
