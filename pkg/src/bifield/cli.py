"""Command-line interface: compose | label | train | extract | eval.

Usage errors exit with status 2 (argparse convention); data-level failures
exit with status 1 and a message naming the failing error class.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .errors import BifieldError


def _cmd_compose(args) -> int:
    from .compose import (
        PlacementSpec,
        compose_scene,
        pair_samples,
        save_samples,
        save_scene_manifest,
    )
    from .mesh import SampleSource
    from .meshio import load_mesh, save_mesh

    human = load_mesh(args.human)
    obj = load_mesh(args.object)
    with open(args.spec, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    spec = PlacementSpec(
        translation_range=tuple(tuple(r) for r in doc.get("translation_range", ((-0.1, 0.1),) * 3)),
        rotation_axis=tuple(doc.get("rotation_axis", (0.0, 0.0, 1.0))),
        rotation_range=tuple(doc.get("rotation_range", (-np.pi, np.pi))),
        scale_range=tuple(doc.get("scale_range", (0.9, 1.1))),
        allow_penetration=bool(doc.get("allow_penetration", True)),
        max_overlap=doc.get("max_overlap"),
        rng_seed=int(doc.get("rng_seed", args.seed)),
    )
    n_points = int(doc.get("n_points", args.points))
    os.makedirs(args.out, exist_ok=True)
    scene, samples = compose_scene(human, obj, spec, n_samples=n_points,
                                   sigma=doc.get("sigma"), bbox_pad=doc.get("bbox_pad", 0.1))
    if args.kind == "real":
        samples = pair_samples(
            scene.human, scene.object, n_points, SampleSource.REAL_UNION,
            sigma=doc.get("sigma"), bbox_pad=doc.get("bbox_pad", 0.1),
            rng_seed=spec.rng_seed + 1,
        )
        kind = "real"
    else:
        kind = samples.source.value.replace("synthetic_instance", "synthetic")
    save_mesh(os.path.join(args.out, "human.ply"), scene.human)
    save_mesh(os.path.join(args.out, "object.ply"), scene.object)
    save_samples(os.path.join(args.out, "samples"), samples)
    save_scene_manifest(
        os.path.join(args.out, "manifest.json"), scene,
        human_path="human.ply", object_path="object.ply", samples_base="samples",
        kind=kind, material=args.material,
    )
    print(f"composed scene ({kind}) -> {args.out}  [{len(samples)} samples]")
    return 0


def _cmd_label(args) -> int:
    from .cameras import load_rig, rig_sphere, KSpec
    from .labelfusion import FusionConfig, label_vertices, fuse_rendered_views
    from .meshio import load_mesh, save_mesh
    from .render import load_depth_map, load_label_map

    mesh = load_mesh(args.mesh)
    delta_abs = args.delta * mesh.aabb().diagonal
    cfg = FusionConfig(n_views=args.views, delta=delta_abs)
    if args.rig and args.maps:
        cams = load_rig(args.rig)
        depths = [load_depth_map(os.path.join(args.maps, f"depth_{i:03d}")) for i in range(len(cams))]
        labels2d = [load_label_map(os.path.join(args.maps, f"labels_{i:03d}")) for i in range(len(cams))]
        labels, conf = label_vertices(mesh, cams, depths, labels2d, cfg, return_confidence=True)
    else:
        box = mesh.aabb()
        center = (box.vmin + box.vmax) / 2.0
        cams = rig_sphere(args.views, 2.0 * box.diagonal, lookat=center,
                          kspec=KSpec(args.image_size, args.image_size))
        labels, conf = fuse_rendered_views(mesh, cams, cfg, return_confidence=True)
    out = mesh.with_labels(labels)
    save_mesh(args.out, out, label_conf=conf)
    n_unlabeled = int((labels < 0).sum())
    print(f"labeled {mesh.n_vertices - n_unlabeled}/{mesh.n_vertices} vertices -> {args.out}")
    return 0


def _cmd_train(args) -> int:
    from .losses import write_loss_log
    from .train import TrainConfig, load_checkpoint, load_training_scene, save_checkpoint, train

    with open(args.config, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    manifests = doc.get("scenes", [])
    if not manifests:
        raise BifieldError("train config lists no scenes")
    cfg = TrainConfig.from_json({k: v for k, v in doc.items() if k != "scenes"})
    base = os.path.dirname(os.path.abspath(args.config))
    paths = [p if os.path.isabs(p) else os.path.join(base, p) for p in manifests]
    scenes = [load_training_scene(p, cfg) for p in paths]
    init = load_checkpoint(args.init_ckpt) if args.init_ckpt else None
    os.makedirs(args.out, exist_ok=True)
    result = train(scenes, cfg, out_dir=args.out, init=init)
    save_checkpoint(os.path.join(args.out, "ckpt_final"), result.checkpoint)
    write_loss_log(os.path.join(args.out, "loss_log.jsonl"), result.log)
    with open(os.path.join(args.out, "scenes.json"), "w", encoding="utf-8") as fh:
        json.dump({"scenes": [os.path.abspath(p) for p in paths]}, fh, indent=2)
    final = result.log[-1] if result.log else {}
    print(f"trained {cfg.total_steps} steps -> {args.out}  (l_total {final.get('l_total', float('nan')):.6f})")
    return 0


def _resolve_scene(args, cfg):
    from .train import load_training_scene

    scene_arg = args.scene
    if scene_arg is not None and os.path.exists(scene_arg):
        return load_training_scene(scene_arg, cfg)
    sidecar = os.path.join(os.path.dirname(os.path.abspath(args.ckpt)), "scenes.json")
    if not os.path.exists(sidecar):
        raise BifieldError("no scene manifest given and no scenes.json beside the checkpoint")
    with open(sidecar, "r", encoding="utf-8") as fh:
        paths = json.load(fh)["scenes"]
    idx = int(scene_arg) if scene_arg is not None else 0
    return load_training_scene(paths[idx], cfg)


def _cmd_extract(args) -> int:
    from .meshio import save_mesh
    from .train import extract_instances, load_checkpoint

    ckpt = load_checkpoint(args.ckpt)
    scene = _resolve_scene(args, ckpt.config)
    mesh_h, mesh_o = extract_instances(ckpt, scene, resolution=args.res, iso=args.iso)
    save_mesh(args.out_human, mesh_h)
    save_mesh(args.out_object, mesh_o)
    print(
        f"extracted human ({mesh_h.n_vertices} verts) -> {args.out_human}; "
        f"object ({mesh_o.n_vertices} verts) -> {args.out_object}"
    )
    return 0


def _cmd_eval(args) -> int:
    from .meshio import load_mesh
    from .metrics import evaluate_scene, save_report

    pred_h = load_mesh(args.pred_human)
    pred_o = load_mesh(args.pred_object)
    gt = load_mesh(args.gt)
    report = evaluate_scene(
        pred_h, pred_o, gt,
        n_surface_samples=args.samples,
        n_volume_samples=args.volume_samples,
        seed=args.seed,
    )
    save_report(args.out, report)
    print(report.table())
    print(f"report -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="bifield",
        description="Instance-level occupancy reconstruction of two interacting shapes",
    )
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compose", help="compose a synthetic or real-style scene")
    c.add_argument("--human", required=True)
    c.add_argument("--object", required=True)
    c.add_argument("--spec", required=True, help="JSON placement spec")
    c.add_argument("--out", required=True, help="output scene directory")
    c.add_argument("--kind", choices=("synthetic", "real"), default="synthetic")
    c.add_argument("--material", default="rigid")
    c.add_argument("--points", type=int, default=6000)
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(fn=_cmd_compose)

    c = sub.add_parser("label", help="fuse multi-view labels onto mesh vertices")
    c.add_argument("--mesh", required=True)
    c.add_argument("--views", type=int, default=64)
    c.add_argument("--delta", type=float, default=0.01,
                   help="depth-match threshold as a fraction of the scene diagonal")
    c.add_argument("--out", required=True)
    c.add_argument("--rig", help="rig file for externally supplied maps")
    c.add_argument("--maps", help="directory of depth_NNN / labels_NNN raw maps")
    c.add_argument("--image-size", type=int, default=512)
    c.set_defaults(fn=_cmd_label)

    c = sub.add_parser("train", help="run complementary training")
    c.add_argument("--config", required=True, help="JSON train config with a scenes list")
    c.add_argument("--out", required=True, help="checkpoint directory")
    c.add_argument("--init-ckpt", help="warm-start checkpoint base path")
    c.set_defaults(fn=_cmd_train)

    c = sub.add_parser("extract", help="marching-cubes both instance meshes")
    c.add_argument("--ckpt", required=True, help="checkpoint base path (without extension)")
    c.add_argument("--res", type=int, default=128)
    c.add_argument("--iso", type=float, default=0.5)
    c.add_argument("--out-human", required=True)
    c.add_argument("--out-object", required=True)
    c.add_argument("--scene", help="scene manifest path or index into scenes.json")
    c.set_defaults(fn=_cmd_extract)

    c = sub.add_parser("eval", help="interaction-aware metric report")
    c.add_argument("--pred-human", required=True)
    c.add_argument("--pred-object", required=True)
    c.add_argument("--gt", required=True, help="labeled ground-truth union mesh")
    c.add_argument("--out", required=True)
    c.add_argument("--samples", type=int, default=10000)
    c.add_argument("--volume-samples", type=int, default=1000000)
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(fn=_cmd_eval)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except BifieldError as e:
        print(f"error [{type(e).__name__}]: {e}", file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError) as e:
        print(f"error [{type(e).__name__}]: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
