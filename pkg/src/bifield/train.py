"""Complementary training loop and checkpointing.

Mixed batches of synthetic scenes (instance supervision) and real-style
scenes (union supervision plus the intersection penalty) drive Adam updates
of the shared field. Everything is a deterministic function of the config
seed: per-step batch picks and per-epoch resampling derive sub-seeds from
(seed, step/epoch), so resuming from a checkpoint is step-equivalent to an
uninterrupted run.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, asdict

import numpy as np

from .cameras import Camera, KSpec, project_points, rig_circle, view_directions
from .compose import pair_samples
from .errors import MissingGroundTruth, ShapeMismatch
from .features import FeatureGrid, build_feature_grid, sample_features
from .field import (
    FieldQuery,
    MlpParams,
    backward,
    eval_field,
    init_mlp_params,
    positional_embed,
    query_input_dim,
)
from .losses import MATERIAL_GAMMA, LossConfig, loss_total
from .mesh import SampleSet, SampleSource, TriMesh
from .render import render_view

CONFIG_VERSION = 1
CHECKPOINT_VERSION = 1


@dataclass
class TrainConfig:
    """Training hyperparameters (defaults follow the reference recipe:
    Adam at 1e-4, 6000 points per scene, scene batch of 4, 6 circle views
    at 512x512)."""

    learning_rate: float = 1e-4
    batch_scenes: int = 4
    points_per_scene: int = 6000
    epochs: int = 10
    steps_per_epoch: int = 100
    mix_ratio: tuple = (1, 1)  # synthetic : real scenes per batch
    seed: int = 0
    # field architecture
    hidden: int = 128
    depth: int = 4
    n_freq: int = 4
    feature_levels: int = 4
    # view assembly
    n_views: int = 6
    image_size: int = 512
    # sampling
    sample_sigma: float | None = None
    bbox_pad: float = 0.1
    # loss weights and per-material rigidity
    w_i: float = 1.0
    w_u: float = 1.0
    w_in: float = 1.0
    gamma_by_material: dict = field(default_factory=lambda: dict(MATERIAL_GAMMA))
    # checkpoint cadence (keep the last two)
    checkpoint_every: int = 500

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.points_per_scene <= 0:
            raise ValueError("points_per_scene must be positive")
        if min(self.mix_ratio) < 0 or max(self.mix_ratio) <= 0:
            raise ValueError("mix_ratio needs non-negative entries, one positive")

    @property
    def total_steps(self) -> int:
        return self.epochs * self.steps_per_epoch

    def to_json(self) -> dict:
        doc = asdict(self)
        doc["mix_ratio"] = list(self.mix_ratio)
        doc["version"] = CONFIG_VERSION
        return doc

    @staticmethod
    def from_json(doc: dict) -> "TrainConfig":
        doc = dict(doc)
        ver = doc.pop("version", CONFIG_VERSION)
        if ver != CONFIG_VERSION:
            raise ValueError(f"unsupported train config version {ver}")
        doc.pop("scenes", None)
        doc["mix_ratio"] = tuple(doc.get("mix_ratio", (1, 1)))
        return TrainConfig(**doc)


# ---------------------------------------------------------------------------
# Scenes
# ---------------------------------------------------------------------------


@dataclass
class TrainScene:
    """One scene: its pair of meshes, camera rig, and cached view features.

    `kind` decides loss routing; `material` picks the rigidity coefficient.
    Real-style scenes keep both meshes privately as the union-occupancy
    oracle but expose only the union channel to training.
    """

    name: str
    kind: SampleSource
    human: TriMesh
    object: TriMesh
    rig: list[Camera]
    features: FeatureGrid
    material: str = "rigid"

    @property
    def diagonal(self) -> float:
        return self.human.aabb().union(self.object.aabb()).diagonal

    def resample(self, cfg: TrainConfig, epoch: int, index: int) -> SampleSet:
        seed = _subseed(cfg.seed, 101, epoch, index)
        return pair_samples(
            self.human,
            self.object,
            cfg.points_per_scene,
            self.kind,
            sigma=cfg.sample_sigma,
            bbox_pad=cfg.bbox_pad,
            rng_seed=seed,
        )


def _subseed(*parts: int) -> int:
    # stable derived seed; SeedSequence folds arbitrarily many ints
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def default_rig(human: TriMesh, obj: TriMesh, n_views: int = 6,
                kspec: KSpec = KSpec()) -> list[Camera]:
    """Circle-of-n rig around the pair, sized to keep the scene in frame."""
    box = human.aabb().union(obj.aabb())
    center = (box.vmin + box.vmax) / 2.0
    radius = 2.0 * box.diagonal
    return rig_circle(n_views, radius, height=0.25 * box.diagonal, lookat=center, kspec=kspec)


def build_scene(
    name: str,
    kind: SampleSource,
    human: TriMesh,
    obj: TriMesh,
    cfg: TrainConfig,
    material: str = "rigid",
    rig: list[Camera] | None = None,
    kspec: KSpec = KSpec(),
) -> TrainScene:
    """Render the scene's views once and cache the feature pyramid."""
    from .primitives import merge

    if rig is None:
        rig = default_rig(human, obj, n_views=cfg.n_views, kspec=kspec)
    appearance = merge([human, obj])
    images = []
    for cam in rig:
        _, _, intensity = render_view(cam, appearance)
        images.append(intensity)
    grid = build_feature_grid(images, n_levels=cfg.feature_levels)
    return TrainScene(
        name=name, kind=kind, human=human, object=obj, rig=rig,
        features=grid, material=material,
    )


def load_training_scene(manifest_path: str | os.PathLike, cfg: TrainConfig) -> TrainScene:
    """Rebuild a TrainScene from a composed scene manifest on disk.

    The rig and feature grid are regenerated deterministically from the
    meshes and config, so extraction after a restart sees the identical
    conditioning that training did.
    """
    from .compose import load_scene_manifest
    from .meshio import load_mesh

    doc = load_scene_manifest(manifest_path)
    base = os.path.dirname(os.path.abspath(str(manifest_path)))

    def resolve(p):
        return p if os.path.isabs(p) else os.path.join(base, p)

    human = load_mesh(resolve(doc["human_mesh"]))
    obj = load_mesh(resolve(doc["object_mesh"]))
    kind = {
        "synthetic": SampleSource.SYNTHETIC_INSTANCE,
        "synthetic_object_only": SampleSource.SYNTHETIC_OBJECT_ONLY,
        "real": SampleSource.REAL_UNION,
    }[doc["kind"]]
    name = os.path.splitext(os.path.basename(str(manifest_path)))[0]
    kspec = KSpec(cfg.image_size, cfg.image_size)
    rig = default_rig(human, obj, n_views=cfg.n_views, kspec=kspec)
    return build_scene(
        name, kind, human, obj, cfg, material=doc.get("material", "rigid"),
        rig=rig, kspec=kspec,
    )


def assemble_query(scene: TrainScene, points: np.ndarray, n_freq: int) -> FieldQuery:
    """Project points into every view and gather features, normalized
    camera distances, and view-direction embeddings."""
    n_views = len(scene.rig)
    n = len(points)
    diag = scene.diagonal
    feats = np.empty((n_views, n, scene.features.channels))
    depths = np.empty((n_views, n))
    embeds = np.empty((n_views, n, 6 * n_freq))
    for vi, cam in enumerate(scene.rig):
        pix, dist, _ = project_points(cam, points)
        feats[vi] = sample_features(scene.features, vi, pix)
        depths[vi] = dist / diag
        embeds[vi] = positional_embed(view_directions(cam, points), n_freq)
    return FieldQuery(points=points, features=feats, depths=depths, embeds=embeds)


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @staticmethod
    def zeros_for(params: MlpParams) -> "AdamState":
        return AdamState(
            m=[np.zeros_like(a) for a in params.arrays()],
            v=[np.zeros_like(a) for a in params.arrays()],
            t=0,
        )


def adam_step(
    params: MlpParams,
    grads: MlpParams,
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> tuple[MlpParams, AdamState]:
    """Standard bias-corrected Adam update, applied in place."""
    p_arrays = params.arrays()
    g_arrays = grads.arrays()
    if len(p_arrays) != len(state.m) or any(
        p.shape != g.shape for p, g in zip(p_arrays, g_arrays)
    ):
        raise ShapeMismatch("parameter/gradient/state layouts disagree")
    state.t += 1
    c1 = 1.0 - beta1**state.t
    c2 = 1.0 - beta2**state.t
    for p, g, m, v in zip(p_arrays, g_arrays, state.m, state.v):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return params, state


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


@dataclass
class Checkpoint:
    params: MlpParams
    adam: AdamState
    step: int
    config: TrainConfig


def save_checkpoint(path_base: str | os.PathLike, ckpt: Checkpoint):
    """Raw little-endian float64 blob plus a structured-text sidecar."""
    arrays = ckpt.params.arrays() + ckpt.adam.m + ckpt.adam.v
    with open(f"{path_base}.bin", "wb") as fh:
        for a in arrays:
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())
    doc = {
        "format": "bifield-checkpoint",
        "version": CHECKPOINT_VERSION,
        "step": ckpt.step,
        "adam_t": ckpt.adam.t,
        "param_shapes": [list(a.shape) for a in ckpt.params.arrays()],
        "trunk_layers": len(ckpt.params.trunk_w),
        "config": ckpt.config.to_json(),
    }
    with open(f"{path_base}.json", "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_checkpoint(path_base: str | os.PathLike) -> Checkpoint:
    with open(f"{path_base}.json", "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != "bifield-checkpoint" or doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError("unsupported checkpoint format")
    shapes = [tuple(s) for s in doc["param_shapes"]]
    n_trunk = doc["trunk_layers"]
    with open(f"{path_base}.bin", "rb") as fh:
        raw = np.frombuffer(fh.read(), dtype="<f8")
    pos = 0

    def take(shape):
        nonlocal pos
        size = int(np.prod(shape))
        out = raw[pos : pos + size].reshape(shape).copy()
        pos += size
        return out

    flats = [take(s) for s in shapes]
    m = [take(s) for s in shapes]
    v = [take(s) for s in shapes]
    if pos != len(raw):
        raise ValueError("checkpoint blob size mismatch")
    trunk_w = [flats[2 * i] for i in range(n_trunk)]
    trunk_b = [flats[2 * i + 1] for i in range(n_trunk)]
    head_w = [flats[2 * n_trunk], flats[2 * n_trunk + 2]]
    head_b = [flats[2 * n_trunk + 1], flats[2 * n_trunk + 3]]
    params = MlpParams(trunk_w, trunk_b, head_w, head_b)
    adam = AdamState(m=m, v=v, t=doc["adam_t"])
    return Checkpoint(params=params, adam=adam, step=doc["step"], config=TrainConfig.from_json(doc["config"]))


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    log: list[dict]


def _pick_batch(rng: np.random.Generator, syn_pool, real_pool, cfg: TrainConfig):
    syn_w, real_w = cfg.mix_ratio
    if not real_pool or real_w == 0:
        n_syn, n_real = cfg.batch_scenes, 0
    elif not syn_pool or syn_w == 0:
        n_syn, n_real = 0, cfg.batch_scenes
    else:
        n_syn = int(round(cfg.batch_scenes * syn_w / (syn_w + real_w)))
        n_syn = min(max(n_syn, 1), cfg.batch_scenes - 1)
        n_real = cfg.batch_scenes - n_syn
    picks = [syn_pool[int(rng.integers(len(syn_pool)))] for _ in range(n_syn)]
    picks += [real_pool[int(rng.integers(len(real_pool)))] for _ in range(n_real)]
    return picks


def train(
    scenes: list[TrainScene],
    cfg: TrainConfig,
    out_dir: str | os.PathLike | None = None,
    init: Checkpoint | None = None,
) -> TrainResult:
    """Run the complementary training loop over the given scenes.

    Per step: draw a scene batch per mix_ratio, evaluate the field on each
    scene's cached queries, route losses by sample source, backpropagate,
    and apply one Adam update. Returns the final checkpoint and one log
    record per step. Deterministic under cfg.seed; warm starts resume
    step-equivalently.
    """
    if not scenes:
        raise ValueError("need at least one scene")
    syn_pool = [i for i, s in enumerate(scenes) if s.kind is not SampleSource.REAL_UNION]
    real_pool = [i for i, s in enumerate(scenes) if s.kind is SampleSource.REAL_UNION]
    for s in scenes:
        if s.kind is SampleSource.REAL_UNION and not (s.human.is_watertight() and s.object.is_watertight()):
            raise MissingGroundTruth(f"scene {s.name}: real scenes need watertight meshes for the union oracle")
        if s.kind is SampleSource.SYNTHETIC_INSTANCE and not s.human.is_watertight():
            raise MissingGroundTruth(f"scene {s.name}: instance supervision needs a watertight human mesh")

    in_dim = query_input_dim(cfg.feature_levels, cfg.n_freq)
    if init is not None:
        params = init.params.copy()
        adam = AdamState(m=[a.copy() for a in init.adam.m], v=[a.copy() for a in init.adam.v], t=init.adam.t)
        start_step = init.step
    else:
        params = init_mlp_params(in_dim, hidden=cfg.hidden, depth=cfg.depth, seed=cfg.seed)
        adam = AdamState.zeros_for(params)
        start_step = 0

    log: list[dict] = []
    queries: dict[int, FieldQuery] = {}
    gts: dict[int, SampleSet] = {}
    current_epoch = -1
    last_ckpts: list[str] = []

    for gstep in range(start_step, cfg.total_steps):
        epoch = gstep // cfg.steps_per_epoch
        if epoch != current_epoch:
            current_epoch = epoch
            for si, sc in enumerate(scenes):
                ss = sc.resample(cfg, epoch, si)
                gts[si] = ss
                queries[si] = assemble_query(sc, ss.points, cfg.n_freq)
        rng = np.random.default_rng(_subseed(cfg.seed, 202, gstep))
        picks = _pick_batch(rng, syn_pool, real_pool, cfg)
        grads = params.zeros_like()
        totals = {"l_i": 0.0, "l_u": 0.0, "l_in": 0.0, "l_total": 0.0}
        scale = 1.0 / len(picks)
        gamma_used = None
        for si in picks:
            sc = scenes[si]
            gamma = cfg.gamma_by_material.get(sc.material, 1.0)
            gamma_used = gamma if gamma_used is None else gamma_used
            lcfg = LossConfig(gamma_rig=gamma, w_i=cfg.w_i, w_u=cfg.w_u, w_in=cfg.w_in)
            (s_h, s_o), cache = eval_field(params, queries[si], return_cache=True)
            rep = loss_total(s_h, s_o, gts[si], lcfg)
            g = backward(params, cache, rep.grad_s_h * scale, rep.grad_s_o * scale)
            for acc, arr in zip(grads.arrays(), g.arrays()):
                acc += arr
            totals["l_i"] += rep.l_i * scale
            totals["l_u"] += rep.l_u * scale
            totals["l_in"] += rep.l_in * scale
            totals["l_total"] += rep.l_total * scale
        params, adam = adam_step(params, grads, adam, cfg.learning_rate)
        record = {"step": gstep + 1, "gamma_rig": gamma_used, **{k: float(v) for k, v in totals.items()}}
        log.append(record)
        if out_dir is not None and (gstep + 1) % cfg.checkpoint_every == 0:
            base = os.path.join(str(out_dir), f"ckpt_{gstep + 1:06d}")
            save_checkpoint(base, Checkpoint(params=params, adam=adam, step=gstep + 1, config=cfg))
            last_ckpts.append(base)
            while len(last_ckpts) > 2:  # last-two retention
                stale = last_ckpts.pop(0)
                for ext in (".bin", ".json"):
                    try:
                        os.remove(stale + ext)
                    except FileNotFoundError:
                        pass
    final = Checkpoint(params=params, adam=adam, step=cfg.total_steps, config=cfg)
    return TrainResult(checkpoint=final, log=log)


# ---------------------------------------------------------------------------
# Field evaluation over space (extraction support)
# ---------------------------------------------------------------------------


def field_on_points(ckpt: Checkpoint, scene: TrainScene, points: np.ndarray):
    """Evaluate both channels of a trained field at arbitrary points."""
    q = assemble_query(scene, np.asarray(points, dtype=np.float64), ckpt.config.n_freq)
    return eval_field(ckpt.params, q)


def extract_instances(
    ckpt: Checkpoint,
    scene: TrainScene,
    resolution: int = 128,
    iso: float = 0.5,
    pad: float = 0.05,
):
    """Marching-cubes both channels at the iso level over the padded scene AABB."""
    from .isosurface import marching_cubes, sample_grid

    box = scene.human.aabb().union(scene.object.aabb()).padded(pad)

    def chan(idx):
        def fn(pts):
            s_h, s_o = field_on_points(ckpt, scene, pts)
            return s_h if idx == 0 else s_o

        return fn

    grid_h = sample_grid(chan(0), box, resolution)
    grid_o = sample_grid(chan(1), box, resolution)
    return marching_cubes(grid_h, iso), marching_cubes(grid_o, iso)
