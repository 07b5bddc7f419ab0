"""End-to-end chain: rasterize the three spaces, run the flow equations,
assemble the unified texture, synthesize the coarse target and fuse.

A scene's hand and object meshes are flattened into one vertex/face soup
with hand faces first; face indices are global across instances so the
face-index maps of all three spaces agree, which the visibility test
relies on.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import compose as compose_mod
from . import flow as flow_mod
from .atlas import AtlasLayout, build_scene_atlas
from .errors import SchemaError, SizeMismatch
from .geometry import Instance, Scene, project
from .raster import RasterBuffers, rasterize


@dataclass
class FrameGeometry:
    """Posed hand+object soup for one frame."""

    vertices: np.ndarray  # (N, 3) camera-frame meters
    faces: np.ndarray  # (F, 3) global indices
    face_instance: np.ndarray  # (F,) Instance codes
    skip: np.ndarray  # (F,) bool, degenerate in 3D
    num_hand_faces: int

    @property
    def object_face_offset(self) -> int:
        return self.num_hand_faces


def build_frame(scene: Scene) -> FrameGeometry:
    """Flatten a scene into a combined soup (hand faces first)."""
    verts = []
    faces = []
    inst = []
    skip = []
    offset = 0
    num_hand_faces = 0
    if scene.hand is not None:
        verts.append(scene.hand.vertices)
        faces.append(scene.hand.faces.astype(np.int64))
        inst.append(np.full(scene.hand.num_faces, Instance.HAND, dtype=np.uint8))
        skip.append(scene.hand.degenerate_faces())
        num_hand_faces = scene.hand.num_faces
        offset = scene.hand.num_vertices
    posed = scene.posed_object()
    if posed is not None:
        verts.append(posed.vertices)
        faces.append(posed.faces.astype(np.int64) + offset)
        inst.append(np.full(posed.num_faces, Instance.OBJECT, dtype=np.uint8))
        skip.append(posed.degenerate_faces())
    if not verts:
        raise SchemaError("scene", "needs at least one of hand / object")
    return FrameGeometry(
        vertices=np.concatenate(verts, axis=0),
        faces=np.concatenate(faces, axis=0),
        face_instance=np.concatenate(inst, axis=0),
        skip=np.concatenate(skip, axis=0),
        num_hand_faces=num_hand_faces,
    )


def rasterize_view(
    frame: FrameGeometry, camera, *, tile_size: int = 64, threads: int = 1
) -> tuple[RasterBuffers, np.ndarray]:
    """Project and rasterize one frame; returns (buffers, screen coords)."""
    coords = project(camera, frame.vertices)
    buffers = rasterize(
        coords,
        frame.faces,
        frame.face_instance,
        camera.width,
        camera.height,
        skip=frame.skip,
        tile_size=tile_size,
        threads=threads,
    )
    return buffers, coords


def rasterize_atlas(
    face_uvs: np.ndarray,
    layout: AtlasLayout,
    face_instance: np.ndarray,
    skip: np.ndarray | None = None,
    *,
    tile_size: int = 64,
    threads: int = 1,
) -> RasterBuffers:
    """Rasterize the atlas UV triangles: the unified-space binding raster."""
    from .atlas import atlas_raster_inputs

    coords, soup = atlas_raster_inputs(face_uvs, layout.atlas_size)
    buffers = rasterize(
        coords,
        soup,
        face_instance,
        layout.atlas_size,
        layout.atlas_size,
        skip=skip,
        tile_size=tile_size,
        threads=threads,
    )
    return buffers


@dataclass
class PipelineResult:
    layout: AtlasLayout
    face_uvs: np.ndarray
    s_raster: RasterBuffers
    t_raster: RasterBuffers
    u_raster: RasterBuffers
    source_coords: np.ndarray
    target_coords: np.ndarray
    flow_us: flow_mod.FlowField
    visibility: np.ndarray
    unified: flow_mod.UnifiedTexture
    flow_tu: flow_mod.FlowField
    coarse_target: np.ndarray
    topology: flow_mod.TopologyMap
    flow_ts: flow_mod.FlowField
    mask_hand: np.ndarray | None = None
    mask_foreground: np.ndarray | None = None
    hand_layer: np.ndarray | None = None
    object_layer: np.ndarray | None = None
    background_layer: np.ndarray | None = None
    final: np.ndarray | None = None
    timings_ms: dict = field(default_factory=dict)


def run_pipeline(
    source: Scene,
    target: Scene,
    source_image: np.ndarray,
    object_texture: np.ndarray | None = None,
    *,
    atlas_size: int = 1024,
    margin: float = 1.0,
    tile_size: int = 64,
    threads: int = 1,
    dilate: int = 2,
    skip_fusion: bool = False,
) -> PipelineResult:
    """Run the full occlusion-aware warping chain for one frame pair."""
    cam_s, cam_t = source.camera, target.camera
    if source_image.shape[:2] != (cam_s.height, cam_s.width):
        raise SizeMismatch(
            f"source image is {source_image.shape[:2]}, camera expects "
            f"{(cam_s.height, cam_s.width)}"
        )
    timings: dict[str, float] = {}

    def clock(name, fn):
        t0 = time.perf_counter()
        result = fn()
        timings[name] = (time.perf_counter() - t0) * 1000.0
        return result

    frame_s = build_frame(source)
    frame_t = build_frame(target)

    face_uvs, layout = build_scene_atlas(
        source.hand, source.object, atlas_size=atlas_size, margin=margin
    )

    u_raster = clock(
        "raster_unified",
        lambda: rasterize_atlas(
            face_uvs, layout, frame_s.face_instance,
            tile_size=tile_size, threads=threads,
        ),
    )
    s_raster, p_s = clock(
        "raster_source",
        lambda: rasterize_view(frame_s, cam_s, tile_size=tile_size, threads=threads),
    )
    t_raster, p_t = clock(
        "raster_target",
        lambda: rasterize_view(frame_t, cam_t, tile_size=tile_size, threads=threads),
    )

    flow_us = clock(
        "flow_unified_from_source",
        lambda: flow_mod.flow_unified_from_source(u_raster, p_s, frame_s.faces),
    )
    visibility = clock(
        "visibility",
        lambda: flow_mod.visibility_unified_from_source(u_raster, s_raster, flow_us),
    )
    unified = clock(
        "assemble_unified_texture",
        lambda: flow_mod.assemble_unified_texture(
            source_image, flow_us, visibility, u_raster, layout,
            object_texture, has_object=source.object is not None, dilate=dilate,
        ),
    )
    flow_tu = clock(
        "flow_target_from_unified",
        lambda: flow_mod.flow_target_from_unified(t_raster, face_uvs, layout.atlas_size),
    )
    coarse = clock(
        "coarse_target",
        lambda: flow_mod.synthesize_coarse_target(flow_tu, unified),
    )
    topo = clock(
        "topology_map",
        lambda: flow_mod.topology_map(t_raster, face_uvs, layout.atlas_size),
    )
    flow_ts = clock(
        "compose_flow",
        lambda: flow_mod.compose_flow_target_from_source(flow_tu, flow_us, visibility),
    )

    result = PipelineResult(
        layout=layout,
        face_uvs=face_uvs,
        s_raster=s_raster,
        t_raster=t_raster,
        u_raster=u_raster,
        source_coords=p_s,
        target_coords=p_t,
        flow_us=flow_us,
        visibility=visibility,
        unified=unified,
        flow_tu=flow_tu,
        coarse_target=coarse,
        topology=topo,
        flow_ts=flow_ts,
        timings_ms=timings,
    )
    if skip_fusion:
        return result

    if (cam_s.width, cam_s.height) != (cam_t.width, cam_t.height):
        raise SizeMismatch(
            "fusion needs matching source/target image sizes (the background "
            "stream reuses the source frame)"
        )
    mask_h, mask_f = clock("analytic_masks", lambda: compose_mod.analytic_masks(t_raster))
    hand_layer = clock(
        "hand_stream",
        lambda: compose_mod.fill_hand_holes(
            flow_mod.warp(flow_ts, source_image, "bilinear"), t_raster, flow_ts.valid
        )
        if mask_h.any()
        else np.zeros_like(coarse),
    )
    background_layer = clock(
        "background_stream",
        lambda: compose_mod.inpaint_background(source_image, s_raster.face >= 0),
    )
    final = clock(
        "fuse",
        lambda: compose_mod.fuse(
            compose_mod.LayerSet(
                background=background_layer,
                object=coarse,
                hand=hand_layer,
                mask_hand=mask_h,
                mask_foreground=mask_f,
            )
        ),
    )
    result.mask_hand = mask_h
    result.mask_foreground = mask_f
    result.hand_layer = hand_layer
    result.object_layer = coarse
    result.background_layer = background_layer
    result.final = final
    return result
