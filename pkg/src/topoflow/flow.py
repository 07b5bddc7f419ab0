"""Inter-space flow fields, visibility, warping and texture assembly.

Everything here is pose-driven resampling between three 2D spaces:

* source image plane (s) and target image plane (t), from rasterizing the
  projected mesh, and
* the unified atlas (u), from rasterizing the atlas UV triangles.

A flow field stores, per pixel of its own space, continuous coordinates
into a destination space. Because the face index map and barycentric
weights come from the rasterizer, every valid flow value is a convex
combination of the three destination coordinates of the face bound to that
pixel. Warping is backward: the output pixel samples the destination image
at its flow coordinate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .atlas import AtlasLayout, Rect
from .errors import (
    IndexOutOfRange,
    LayoutMismatch,
    MissingObjectTexture,
    MissingUVs,
    SizeMismatch,
)
from .geometry import Instance
from .raster import RasterBuffers


@dataclass
class FlowField:
    """Per-pixel coordinates into a destination space.

    vectors: (H, W, 2) float32, NaN where invalid
    valid: (H, W) bool
    """

    vectors: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float32)
        self.valid = np.asarray(self.valid, dtype=bool)
        self.vectors[~self.valid] = np.nan

    @property
    def height(self) -> int:
        return self.vectors.shape[0]

    @property
    def width(self) -> int:
        return self.vectors.shape[1]


@dataclass
class UnifiedTexture:
    """The atlas image holding pose-independent surface texture."""

    image: np.ndarray  # (S, S, 4) uint8
    filled: np.ndarray  # (S, S) bool
    layout: AtlasLayout


@dataclass
class TopologyMap:
    """Per-target-pixel atlas barycenter of the visible face (NaN at background)."""

    values: np.ndarray  # (H, W, 2) float32, atlas pixel units


def _gather_face_flow(raster: RasterBuffers, dest_coords: np.ndarray, faces: np.ndarray) -> FlowField:
    """Shared core of the per-pixel flow equations.

    At every covered pixel: flow = sum_i W_i * dest_coords[face_vertex_i],
    the barycentric push of the pixel through its bound face.
    """
    faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    dest = np.asarray(dest_coords, dtype=np.float64)
    if faces.size and faces.max() >= len(dest):
        raise IndexOutOfRange(
            f"face references vertex {faces.max()} but only {len(dest)} destination "
            "coordinates were given"
        )
    h, w = raster.face.shape
    vectors = np.full((h, w, 2), np.nan, dtype=np.float32)
    valid = raster.face >= 0
    if valid.any():
        f = raster.face[valid].astype(np.int64)
        wts = raster.bary[valid].astype(np.float64)
        corners = dest[faces[f]][:, :, :2]  # (n, 3, 2)
        vectors[valid] = np.einsum("ni,nij->nj", wts, corners).astype(np.float32)
    return FlowField(vectors=vectors, valid=valid)


def flow_unified_from_source(
    u_raster: RasterBuffers, source_coords: np.ndarray, faces: np.ndarray
) -> FlowField:
    """Atlas-texel -> source-image flow (the source-to-unified mapping).

    ``u_raster`` must be the rasterization of the atlas UV triangles, so
    each texel's face binding is fixed by construction; ``source_coords``
    are the projected per-vertex screen positions in the source view.
    """
    return _gather_face_flow(u_raster, source_coords, faces)


def flow_target_from_unified(
    t_raster: RasterBuffers, face_uvs: np.ndarray | None, atlas_size: int
) -> FlowField:
    """Target-pixel -> atlas flow, in atlas pixel coordinates."""
    if face_uvs is None:
        raise MissingUVs("no atlas UVs available for the rasterized faces")
    uv = np.asarray(face_uvs, dtype=np.float64)
    used = np.unique(t_raster.face[t_raster.face >= 0])
    if used.size:
        if used.max() >= len(uv):
            raise MissingUVs(f"face {used.max()} has no atlas UV triplet")
        if not np.isfinite(uv[used]).all():
            raise MissingUVs("atlas UV triplet contains non-finite values")
    corners = uv * float(atlas_size)
    dest = corners.reshape(-1, 2)
    soup = np.arange(len(uv) * 3, dtype=np.int64).reshape(-1, 3)
    return _gather_face_flow(t_raster, dest, soup)


def visibility_unified_from_source(
    u_raster: RasterBuffers, s_raster: RasterBuffers, flow: FlowField
) -> np.ndarray:
    """Source-visibility of each atlas texel (the occlusion test).

    A texel is visible iff its flow lands inside the source image and the
    source face-index map at the nearest pixel equals the texel's bound
    face. Face equality means the texel's surface is the front-most one at
    that source location, so its color may be lifted into the atlas.
    """
    h, w = u_raster.face.shape
    visible = np.zeros((h, w), dtype=bool)
    valid = flow.valid & (u_raster.face >= 0)
    if not valid.any():
        return visible
    coords = flow.vectors[valid].astype(np.float64)
    ix = np.floor(coords[:, 0]).astype(np.int64)
    iy = np.floor(coords[:, 1]).astype(np.int64)
    sh, sw = s_raster.face.shape
    inb = (ix >= 0) & (ix < sw) & (iy >= 0) & (iy < sh)
    ok = np.zeros(len(coords), dtype=bool)
    ok[inb] = s_raster.face[iy[inb], ix[inb]] == u_raster.face[valid][inb]
    visible[valid] = ok
    return visible


def warp(
    flow: FlowField,
    image: np.ndarray,
    mode: str = "bilinear",
    out_size: tuple[int, int] | None = None,
) -> np.ndarray:
    """Backward-warp ``image`` through ``flow``.

    Valid pixels sample the image at their flow coordinate (clamped to the
    image border); invalid pixels are transparent black. uint8 images stay
    uint8 (rounded); float images come back float.
    """
    if out_size is not None and out_size != (flow.height, flow.width):
        raise SizeMismatch(
            f"flow is {flow.height}x{flow.width} but output {out_size[0]}x{out_size[1]} requested"
        )
    if mode not in ("bilinear", "nearest"):
        raise ValueError(f"unknown warp mode {mode!r}")
    img = np.asarray(image)
    if img.ndim == 2:
        img = img[:, :, None]
    h, w = flow.height, flow.width
    ih, iw, ch = img.shape
    out = np.zeros((h, w, ch), dtype=np.float64)
    valid = flow.valid
    if valid.any():
        u = flow.vectors[valid][:, 0].astype(np.float64)
        v = flow.vectors[valid][:, 1].astype(np.float64)
        if mode == "nearest":
            ix = np.clip(np.floor(u).astype(np.int64), 0, iw - 1)
            iy = np.clip(np.floor(v).astype(np.int64), 0, ih - 1)
            out[valid] = img[iy, ix].astype(np.float64)
        else:
            x = u - 0.5
            y = v - 0.5
            x0 = np.floor(x)
            y0 = np.floor(y)
            fx = (x - x0)[:, None]
            fy = (y - y0)[:, None]
            x0i = np.clip(x0.astype(np.int64), 0, iw - 1)
            x1i = np.clip(x0.astype(np.int64) + 1, 0, iw - 1)
            y0i = np.clip(y0.astype(np.int64), 0, ih - 1)
            y1i = np.clip(y0.astype(np.int64) + 1, 0, ih - 1)
            p00 = img[y0i, x0i].astype(np.float64)
            p01 = img[y0i, x1i].astype(np.float64)
            p10 = img[y1i, x0i].astype(np.float64)
            p11 = img[y1i, x1i].astype(np.float64)
            top = p00 * (1.0 - fx) + p01 * fx
            bot = p10 * (1.0 - fx) + p11 * fx
            out[valid] = top * (1.0 - fy) + bot * fy
    if np.issubdtype(np.asarray(image).dtype, np.integer):
        result = np.rint(out).astype(np.asarray(image).dtype)
    else:
        result = out.astype(np.asarray(image).dtype)
    if np.asarray(image).ndim == 2:
        result = result[:, :, 0]
    return result


def _resample_rect(texture: np.ndarray, rect: Rect, atlas_size: int) -> np.ndarray:
    """Bilinearly scale a texture onto ``rect``; returns a full-atlas image."""
    s = atlas_size
    th, tw = texture.shape[:2]
    out = np.zeros((s, s, texture.shape[2]), dtype=texture.dtype)
    xs = np.arange(int(np.floor(rect.x0)), int(np.ceil(rect.x1)))
    ys = np.arange(int(np.floor(rect.y0)), int(np.ceil(rect.y1)))
    xs = xs[(xs >= 0) & (xs < s)]
    ys = ys[(ys >= 0) & (ys < s)]
    if xs.size == 0 or ys.size == 0:
        return out
    gx, gy = np.meshgrid(xs, ys)
    u = (gx + 0.5 - rect.x0) / rect.w * tw
    v = (gy + 0.5 - rect.y0) / rect.h * th
    vec = np.stack([u, v], axis=-1).astype(np.float32)
    block = FlowField(vectors=vec, valid=np.ones(vec.shape[:2], dtype=bool))
    out[ys[0] : ys[-1] + 1, xs[0] : xs[-1] + 1] = warp(block, texture, "bilinear")
    return out


def dilate_filled(image: np.ndarray, filled: np.ndarray, iterations: int = 2):
    """Extend filled texels into unfilled 8-neighbors, ``iterations`` times.

    Each pass fills every unfilled texel adjacent to the previous pass's
    filled set with the mean of its filled neighbors (Jacobi update, so the
    result is order-free and deterministic). Guards Eq-5-style bilinear
    sampling against pulling empty texels across cell margins.
    """
    img = image.astype(np.float64)
    filled = filled.copy()
    h, w = filled.shape
    shifts = [(dy, dx) for dy in (-1, 0, 1) for dx in (-1, 0, 1) if (dy, dx) != (0, 0)]
    for _ in range(iterations):
        acc = np.zeros_like(img)
        cnt = np.zeros((h, w), dtype=np.float64)
        for dy, dx in shifts:
            src_y = slice(max(0, -dy), min(h, h - dy))
            src_x = slice(max(0, -dx), min(w, w - dx))
            dst_y = slice(max(0, dy), min(h, h + dy))
            dst_x = slice(max(0, dx), min(w, w + dx))
            mask = filled[src_y, src_x]
            acc[dst_y, dst_x] += np.where(mask[:, :, None], img[src_y, src_x], 0.0)
            cnt[dst_y, dst_x] += mask
        ring = (~filled) & (cnt > 0)
        if not ring.any():
            break
        img[ring] = acc[ring] / cnt[ring][:, None]
        filled |= ring
    return np.rint(img).astype(image.dtype), filled


def assemble_unified_texture(
    source_image: np.ndarray,
    flow_us: FlowField,
    visibility: np.ndarray,
    u_raster: RasterBuffers,
    layout: AtlasLayout,
    object_texture: np.ndarray | None = None,
    *,
    has_object: bool | None = None,
    dilate: int = 2,
) -> UnifiedTexture:
    """Build the unified texture image from source pixels + stored texture.

    Hand texels take source-image color through ``flow_us`` wherever the
    visibility mask allows. Object texels ignore the source image entirely:
    the pre-stored texture is rescaled onto the object sub-rectangle (its
    authored chart layout carries over), because the source object region
    always contains occluded parts. A final dilation pass bleeds filled
    texels into the surrounding margins.
    """
    s = layout.atlas_size
    if u_raster.face.shape != (s, s):
        raise SizeMismatch(
            f"unified raster is {u_raster.face.shape}, layout expects {(s, s)}"
        )
    image = np.zeros((s, s, 4), dtype=np.uint8)
    filled = np.zeros((s, s), dtype=bool)

    hand_sel = visibility & (u_raster.instance == Instance.HAND)
    if hand_sel.any():
        warped = warp(flow_us, source_image, "bilinear")
        image[hand_sel] = warped[hand_sel]
        image[hand_sel, 3] = 255
        filled |= hand_sel

    object_texels = u_raster.instance == Instance.OBJECT
    if has_object is None:
        has_object = bool(object_texels.any())
    if has_object:
        if object_texture is None:
            raise MissingObjectTexture(
                "scene declares an object but no texture image was provided"
            )
        if layout.object_grid is not None:
            raise MissingUVs(
                "object has no authored UVs; its stored texture cannot be "
                "resampled into the atlas"
            )
        tex = object_texture
        if tex.ndim == 2:
            tex = np.repeat(tex[:, :, None], 3, axis=2)
        if tex.shape[2] == 3:
            tex = np.concatenate(
                [tex, np.full((*tex.shape[:2], 1), 255, dtype=tex.dtype)], axis=2
            )
        blit = _resample_rect(tex, layout.object_rect, s)
        rect = layout.object_rect
        y0, y1 = int(np.floor(rect.y0)), int(np.ceil(rect.y1))
        x0, x1 = int(np.floor(rect.x0)), int(np.ceil(rect.x1))
        image[y0:y1, x0:x1] = blit[y0:y1, x0:x1]
        image[y0:y1, x0:x1, 3] = 255
        filled |= object_texels

    if dilate > 0:
        image, filled = dilate_filled(image, filled, iterations=dilate)

    return UnifiedTexture(image=image, filled=filled, layout=layout)


def synthesize_coarse_target(flow_tu: FlowField, texture: UnifiedTexture) -> np.ndarray:
    """Coarse target image: sample the unified texture under the target flow."""
    return warp(flow_tu, texture.image, "bilinear")


def topology_map(
    t_raster: RasterBuffers, face_uvs: np.ndarray | None, atlas_size: int
) -> TopologyMap:
    """Atlas barycenter of the face visible at each target pixel.

    Piecewise constant per face; a fine-grained structural signal for any
    downstream conditioning consumer.
    """
    if face_uvs is None:
        raise MissingUVs("no atlas UVs available for the rasterized faces")
    uv = np.asarray(face_uvs, dtype=np.float64)
    valid = t_raster.face >= 0
    used = np.unique(t_raster.face[valid])
    if used.size:
        if used.max() >= len(uv):
            raise MissingUVs(f"face {used.max()} has no atlas UV triplet")
        if not np.isfinite(uv[used]).all():
            raise MissingUVs("atlas UV triplet contains non-finite values")
    centers = uv.mean(axis=1) * float(atlas_size)
    h, w = t_raster.face.shape
    values = np.full((h, w, 2), np.nan, dtype=np.float32)
    if valid.any():
        values[valid] = centers[t_raster.face[valid]].astype(np.float32)
    return TopologyMap(values=values)


def compose_flow_target_from_source(
    flow_tu: FlowField, flow_us: FlowField, visibility: np.ndarray
) -> FlowField:
    """Pose transformation flow: target pixel -> source pixel.

    Chains target->unified and unified->source by resolving the continuous
    atlas coordinate to its nearest texel; the result is valid only where
    both flows are valid and the intermediate texel is source-visible.
    Used to warp source hand pixels directly into the target pose.
    """
    if flow_us.vectors.shape[:2] != visibility.shape:
        raise LayoutMismatch(
            f"unified flow is {flow_us.vectors.shape[:2]} but visibility is {visibility.shape}"
        )
    h, w = flow_tu.height, flow_tu.width
    vectors = np.full((h, w, 2), np.nan, dtype=np.float32)
    valid = np.zeros((h, w), dtype=bool)
    src = flow_tu.valid
    if src.any():
        coords = flow_tu.vectors[src].astype(np.float64)
        ix = np.floor(coords[:, 0]).astype(np.int64)
        iy = np.floor(coords[:, 1]).astype(np.int64)
        ah, aw = visibility.shape
        inb = (ix >= 0) & (ix < aw) & (iy >= 0) & (iy < ah)
        ok = np.zeros(len(coords), dtype=bool)
        ok[inb] = flow_us.valid[iy[inb], ix[inb]] & visibility[iy[inb], ix[inb]]
        res = np.full((len(coords), 2), np.nan, dtype=np.float32)
        res[ok] = flow_us.vectors[iy[ok], ix[ok]]
        vectors[src] = res
        tmp = np.zeros((h, w), dtype=bool)
        tmp[src] = ok
        valid = tmp
    return FlowField(vectors=vectors, valid=valid)
