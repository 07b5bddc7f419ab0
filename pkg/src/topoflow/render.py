"""Direct mesh rendering, independent of the atlas/flow machinery.

Samples appearance per pixel straight from the rasterization: Gouraud
vertex colors for untextured instances and authored-UV texture lookup for
textured ones. Used to synthesize source images for demo scenes and as a
cross-check for the warping chain (same scene, two render paths).
"""

from __future__ import annotations

import numpy as np

from .flow import FlowField, warp
from .geometry import Camera, Instance
from .pipeline import FrameGeometry, rasterize_view
from .raster import RasterBuffers


def shade_gouraud(
    raster: RasterBuffers,
    faces: np.ndarray,
    vertex_colors: np.ndarray,
    select: np.ndarray,
    out: np.ndarray,
) -> None:
    """Write barycentric-interpolated vertex colors into ``out[select]``."""
    if not select.any():
        return
    f = raster.face[select].astype(np.int64)
    wts = raster.bary[select].astype(np.float64)
    tri = np.asarray(faces, dtype=np.int64)[f]
    cols = np.asarray(vertex_colors, dtype=np.float64)[tri]  # (n, 3, C)
    shaded = np.einsum("ni,nic->nc", wts, cols)
    out[select, :3] = np.rint(shaded[:, :3]).astype(np.uint8)
    out[select, 3] = 255


def shade_textured(
    raster: RasterBuffers,
    face_uvs: np.ndarray,
    face_offset: int,
    texture: np.ndarray,
    select: np.ndarray,
    out: np.ndarray,
) -> None:
    """Write texture samples at interpolated authored UVs into ``out[select]``."""
    if not select.any():
        return
    f = raster.face[select].astype(np.int64) - face_offset
    wts = raster.bary[select].astype(np.float64)
    uv = np.einsum("ni,nij->nj", wts, np.asarray(face_uvs, dtype=np.float64)[f])
    th, tw = texture.shape[:2]
    coords = np.empty((len(uv), 1, 2), dtype=np.float32)
    coords[:, 0, 0] = uv[:, 0] * tw
    coords[:, 0, 1] = uv[:, 1] * th
    strip = FlowField(vectors=coords, valid=np.ones((len(uv), 1), dtype=bool))
    tex = texture
    if tex.ndim == 2:
        tex = tex[:, :, None]
    sampled = warp(strip, tex, "bilinear")[:, 0]
    out[select, : min(3, sampled.shape[-1])] = sampled[:, :3]
    out[select, 3] = 255


def render_reference(
    frame: FrameGeometry,
    camera: Camera,
    *,
    vertex_colors: np.ndarray | None = None,
    object_uvs: np.ndarray | None = None,
    object_texture: np.ndarray | None = None,
    background=(16, 16, 16, 255),
    tile_size: int = 64,
    threads: int = 1,
) -> np.ndarray:
    """Render a frame directly: one rasterization, per-pixel shading.

    vertex_colors: (N, >=3) colors for Gouraud shading of hand pixels.
    object_uvs / object_texture: authored per-face UVs and texture for
    object pixels. Returns (H, W, 4) uint8.
    """
    raster, _ = rasterize_view(frame, camera, tile_size=tile_size, threads=threads)
    return shade_raster(
        raster,
        frame,
        vertex_colors=vertex_colors,
        object_uvs=object_uvs,
        object_texture=object_texture,
        background=background,
    )


def shade_raster(
    raster: RasterBuffers,
    frame: FrameGeometry,
    *,
    vertex_colors: np.ndarray | None = None,
    object_uvs: np.ndarray | None = None,
    object_texture: np.ndarray | None = None,
    background=(16, 16, 16, 255),
) -> np.ndarray:
    h, w = raster.face.shape
    out = np.empty((h, w, 4), dtype=np.uint8)
    bg = np.asarray(background, dtype=np.uint8)
    out[:] = bg if bg.ndim else bg[None]

    hand_px = raster.instance == Instance.HAND
    if hand_px.any():
        if vertex_colors is None:
            raise ValueError("hand pixels present but no vertex colors given")
        shade_gouraud(raster, frame.faces, vertex_colors, hand_px, out)

    obj_px = raster.instance == Instance.OBJECT
    if obj_px.any():
        if object_uvs is None or object_texture is None:
            raise ValueError("object pixels present but no texture/UVs given")
        shade_textured(
            raster, object_uvs, frame.object_face_offset, object_texture, obj_px, out
        )
    return out
