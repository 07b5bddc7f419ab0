"""topoflow: occlusion-aware hand-object topology modeling.

A numpy library (plus a thin CLI) covering mesh ingestion, deterministic
software rasterization, unified-surface-space texture flow, visibility,
coarse target synthesis, topology maps, analytic split-and-combine fusion,
and structure-preservation metrics.
"""

__version__ = "0.1.0"

from .atlas import AtlasLayout, build_grid_atlas, build_scene_atlas, default_layout
from .compose import LayerSet, analytic_masks, fill_hand_holes, fuse, inpaint_background
from .flow import (
    FlowField,
    TopologyMap,
    UnifiedTexture,
    assemble_unified_texture,
    compose_flow_target_from_source,
    flow_target_from_unified,
    flow_unified_from_source,
    synthesize_coarse_target,
    topology_map,
    visibility_unified_from_source,
    warp,
)
from .geometry import Camera, Instance, Mesh, Scene, apply_rigid_transform, project
from .metrics import (
    PoseSet,
    add_01d,
    add_metric,
    evaluate_dataset,
    object_diameter,
    pa_mpjpe,
    pck_auc,
    procrustes_align,
)
from .obj import load_obj, write_obj
from .pipeline import FrameGeometry, build_frame, run_pipeline
from .raster import RasterBuffers, barycentric, rasterize
from .render import render_reference

__all__ = [
    "AtlasLayout",
    "Camera",
    "FlowField",
    "FrameGeometry",
    "Instance",
    "LayerSet",
    "Mesh",
    "PoseSet",
    "RasterBuffers",
    "Scene",
    "TopologyMap",
    "UnifiedTexture",
    "add_01d",
    "add_metric",
    "analytic_masks",
    "apply_rigid_transform",
    "assemble_unified_texture",
    "barycentric",
    "build_frame",
    "build_grid_atlas",
    "build_scene_atlas",
    "compose_flow_target_from_source",
    "default_layout",
    "evaluate_dataset",
    "fill_hand_holes",
    "flow_target_from_unified",
    "flow_unified_from_source",
    "fuse",
    "inpaint_background",
    "load_obj",
    "object_diameter",
    "pa_mpjpe",
    "pck_auc",
    "procrustes_align",
    "project",
    "rasterize",
    "render_reference",
    "run_pipeline",
    "synthesize_coarse_target",
    "topology_map",
    "visibility_unified_from_source",
    "warp",
    "write_obj",
]
