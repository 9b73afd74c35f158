"""bifield: instance-level occupancy fields for two interacting shapes.

A library and CLI for reconstructing a human/hand and an object as
separate implicit occupancy channels from multi-view observations:
synthetic scene composition with LBS reposing, virtual multi-view semantic
label fusion, complementary training with a rigidity-controlled
intersection penalty, iso-surface extraction, and an interaction-aware
metric suite.
"""

from .cameras import Camera, KSpec, project, rig_circle, rig_sphere
from .compose import PlacementSpec, compose_scene, seat_height_align
from .errors import BifieldError
from .estimator import InstanceFieldReconstructor
from .field import (
    FieldQuery,
    MlpParams,
    eval_field,
    intersection_value,
    positional_embed,
    union_value,
)
from .isosurface import ScalarGrid, marching_cubes, sample_grid
from .labelfusion import FusionConfig, label_vertices, visibility_mask
from .losses import LossConfig, LossReport, loss_instance, loss_intersection, loss_total, loss_union
from .mesh import (
    Aabb,
    SampleSet,
    SampleSource,
    TriMesh,
    inside,
    nearest_surface_distance,
    sample_points,
    transform,
)
from .meshio import load_mesh, read_obj, read_ply, save_mesh, write_obj, write_ply
from .metrics import MetricReport, chamfer, cd_one_directional, mesh_iou_and_volume, p2s
from .render import DepthMap, LabelMap, render_depth, render_labels
from .skinning import Pose, SkinnedTemplate, lbs_forward, lbs_inverse, repose, transfer_weights
from .train import Checkpoint, TrainConfig, TrainScene, adam_step, build_scene, train

__version__ = "0.1.0"

__all__ = [
    "Aabb",
    "BifieldError",
    "Camera",
    "Checkpoint",
    "DepthMap",
    "FieldQuery",
    "FusionConfig",
    "InstanceFieldReconstructor",
    "KSpec",
    "LabelMap",
    "LossConfig",
    "LossReport",
    "MetricReport",
    "MlpParams",
    "PlacementSpec",
    "Pose",
    "SampleSet",
    "SampleSource",
    "ScalarGrid",
    "SkinnedTemplate",
    "TrainConfig",
    "TrainScene",
    "TriMesh",
    "adam_step",
    "build_scene",
    "cd_one_directional",
    "chamfer",
    "compose_scene",
    "eval_field",
    "inside",
    "intersection_value",
    "label_vertices",
    "lbs_forward",
    "lbs_inverse",
    "load_mesh",
    "loss_instance",
    "loss_intersection",
    "loss_total",
    "loss_union",
    "marching_cubes",
    "mesh_iou_and_volume",
    "nearest_surface_distance",
    "p2s",
    "positional_embed",
    "project",
    "read_obj",
    "read_ply",
    "render_depth",
    "render_labels",
    "repose",
    "rig_circle",
    "rig_sphere",
    "sample_grid",
    "sample_points",
    "save_mesh",
    "seat_height_align",
    "train",
    "transfer_weights",
    "transform",
    "union_value",
    "visibility_mask",
    "write_obj",
    "write_ply",
]
