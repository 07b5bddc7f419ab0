"""Unified-surface-space construction.

The unified space is a single square atlas image split into two disjoint
sub-rectangles (hand left half, object right half). Every texel inside a
face's UV triangle is permanently bound to that face, independent of pose.

Hand meshes always receive a generated per-face grid atlas: with A =
ceil(sqrt(N_f)) cells per row, face f owns cell (f mod A, f div A) and its
UV corners sit at ((m, m), (c - m, m), (m, c - m)) inside the cell, where c
is the cell side and m the margin. Object meshes keep their authored UVs,
remapped affinely onto the object sub-rectangle, so real textures retain
their chart layout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CellTooSmall
from .geometry import Instance, Mesh

DEFAULT_ATLAS_SIZE = 1024
DEFAULT_MARGIN = 1.0


@dataclass(frozen=True)
class Rect:
    """Axis-aligned sub-rectangle in atlas pixel units."""

    x0: float
    y0: float
    w: float
    h: float

    @property
    def x1(self) -> float:
        return self.x0 + self.w

    @property
    def y1(self) -> float:
        return self.y0 + self.h


@dataclass(frozen=True)
class GridSpec:
    """Grid parameters for a generated per-face atlas."""

    cells_per_row: int
    cell_side: float


@dataclass
class AtlasLayout:
    """Placement of both instances inside the square atlas image.

    ``hand_grid`` / ``object_grid`` are None for instances that keep their
    authored UVs (no cell structure) or are absent from the scene.
    """

    atlas_size: int
    hand_rect: Rect
    object_rect: Rect
    margin: float = DEFAULT_MARGIN
    hand_grid: GridSpec | None = None
    object_grid: GridSpec | None = None

    def rect_for(self, instance: Instance) -> Rect:
        return self.hand_rect if instance == Instance.HAND else self.object_rect


def default_layout(atlas_size: int = DEFAULT_ATLAS_SIZE, margin: float = DEFAULT_MARGIN) -> AtlasLayout:
    half = atlas_size / 2.0
    return AtlasLayout(
        atlas_size=atlas_size,
        hand_rect=Rect(0.0, 0.0, half, float(atlas_size)),
        object_rect=Rect(half, 0.0, half, float(atlas_size)),
        margin=margin,
    )


def grid_face_uvs(num_faces: int, rect: Rect, atlas_size: int, margin: float = DEFAULT_MARGIN):
    """Generated grid UVs for ``num_faces`` faces inside ``rect``.

    Returns (face_uvs, GridSpec) with face_uvs of shape (F, 3, 2) in
    atlas-normalized [0, 1] coordinates. Raises CellTooSmall when the
    margin leaves less than 2 px of usable cell interior.
    """
    if num_faces < 1:
        raise ValueError("grid atlas needs at least one face")
    a = math.ceil(math.sqrt(num_faces))
    c = rect.w / a
    if c - 2.0 * margin < 2.0:
        raise CellTooSmall(
            f"cell side {c:.2f} px with margin {margin} px leaves "
            f"{c - 2 * margin:.2f} px; need >= 2 px"
        )
    f = np.arange(num_faces)
    col = f % a
    row = f // a
    ox = rect.x0 + col * c
    oy = rect.y0 + row * c
    corners = np.empty((num_faces, 3, 2), dtype=np.float64)
    corners[:, 0, 0] = ox + margin
    corners[:, 0, 1] = oy + margin
    corners[:, 1, 0] = ox + c - margin
    corners[:, 1, 1] = oy + margin
    corners[:, 2, 0] = ox + margin
    corners[:, 2, 1] = oy + c - margin
    return corners / float(atlas_size), GridSpec(cells_per_row=a, cell_side=c)


def remap_native_uvs(face_uvs: np.ndarray, rect: Rect, atlas_size: int) -> np.ndarray:
    """Map authored [0, 1]^2 UV triplets onto ``rect``, atlas-normalized."""
    uv = np.asarray(face_uvs, dtype=np.float64)
    out = np.empty_like(uv)
    out[..., 0] = rect.x0 + uv[..., 0] * rect.w
    out[..., 1] = rect.y0 + uv[..., 1] * rect.h
    return out / float(atlas_size)


def build_grid_atlas(
    mesh: Mesh,
    *,
    atlas_size: int = DEFAULT_ATLAS_SIZE,
    margin: float = DEFAULT_MARGIN,
) -> tuple[np.ndarray, AtlasLayout]:
    """Grid atlas for a single mesh in its instance's sub-rectangle."""
    layout = default_layout(atlas_size, margin)
    rect = layout.rect_for(mesh.instance)
    uvs, grid = grid_face_uvs(mesh.num_faces, rect, atlas_size, margin)
    if mesh.instance == Instance.HAND:
        layout.hand_grid = grid
    else:
        layout.object_grid = grid
    return uvs, layout


def build_scene_atlas(
    hand: Mesh | None,
    obj: Mesh | None,
    *,
    atlas_size: int = DEFAULT_ATLAS_SIZE,
    margin: float = DEFAULT_MARGIN,
) -> tuple[np.ndarray, AtlasLayout]:
    """Combined atlas UVs for a scene, hand faces first then object faces.

    The hand always gets a generated grid (MANO-like meshes ship without a
    canonical unwrap); the object keeps authored UVs when present and falls
    back to a grid otherwise.
    """
    layout = default_layout(atlas_size, margin)
    parts = []
    if hand is not None and hand.num_faces:
        uvs, layout.hand_grid = grid_face_uvs(hand.num_faces, layout.hand_rect, atlas_size, margin)
        parts.append(uvs)
    if obj is not None and obj.num_faces:
        if obj.face_uvs is not None:
            parts.append(remap_native_uvs(obj.face_uvs, layout.object_rect, atlas_size))
        else:
            uvs, layout.object_grid = grid_face_uvs(
                obj.num_faces, layout.object_rect, atlas_size, margin
            )
            parts.append(uvs)
    if not parts:
        return np.zeros((0, 3, 2), dtype=np.float64), layout
    return np.concatenate(parts, axis=0), layout


def atlas_raster_inputs(face_uvs: np.ndarray, atlas_size: int):
    """Vertex soup for rasterizing atlas UV triangles into the atlas image.

    Each face contributes its own three corners (faces never share atlas
    vertices), all at depth 1.0; the z-buffer tie rule then assigns any
    overlapping authored charts to the lower face index.
    """
    uv = np.asarray(face_uvs, dtype=np.float64)
    nf = len(uv)
    coords = np.ones((nf * 3, 3), dtype=np.float64)
    coords[:, :2] = uv.reshape(-1, 2) * float(atlas_size)
    faces = np.arange(nf * 3, dtype=np.int32).reshape(nf, 3)
    return coords, faces
