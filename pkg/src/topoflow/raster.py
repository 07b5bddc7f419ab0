"""Deterministic tile-parallel software rasterizer.

Produces, for one rendered space (source, target or unified atlas), the
per-pixel face-index map, barycentric-weight map, depth buffer and instance
map. Coverage uses pixel centers with the top-left fill rule, so every
screen point is owned by exactly one triangle along shared edges. Depth is
interpolated linearly in screen space and only used for ordering; equal
depths resolve to the lower face index, which makes the output independent
of tile size and thread count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateTriangle
from .geometry import Instance

BACKGROUND = -1
DEFAULT_TILE = 64


@dataclass
class RasterBuffers:
    """Per-pixel outputs of one rasterization.

    face: (H, W) int32, -1 at background
    bary: (H, W, 3) float32, convex weights of the pixel center in the
          winning face's screen triangle (order matches the face's vertex
          triplet); zeros at background
    depth: (H, W) float32, +inf at background, meters elsewhere
    instance: (H, W) uint8 with Instance codes (0 = background)
    """

    width: int
    height: int
    face: np.ndarray
    bary: np.ndarray
    depth: np.ndarray
    instance: np.ndarray

    @property
    def coverage(self) -> np.ndarray:
        return self.face >= 0


def barycentric(p, a, b, c) -> tuple[float, float, float]:
    """Barycentric coordinates of 2D point ``p`` in triangle (a, b, c).

    Raises DegenerateTriangle when |cross(b-a, c-a)| <= 1e-12.
    """
    p = np.asarray(p, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    area2 = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    if abs(area2) <= 1e-12:
        raise DegenerateTriangle(f"doubled area {area2:.3g} below threshold")
    w0 = ((c[0] - b[0]) * (p[1] - b[1]) - (c[1] - b[1]) * (p[0] - b[0])) / area2
    w1 = ((a[0] - c[0]) * (p[1] - c[1]) - (a[1] - c[1]) * (p[0] - c[0])) / area2
    w2 = ((b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])) / area2
    return float(w0), float(w1), float(w2)


def _edge(v0x, v0y, v1x, v1y, px, py):
    # Signed edge function: positive when p is to the left of v0->v1 in the
    # y-down screen frame of a positively oriented triangle.
    return (v1x - v0x) * (py - v0y) - (v1y - v0y) * (px - v0x)


def _raster_tile(coords, faces, inst_codes, order, x0, y0, x1, y1):
    """Rasterize candidate faces (ascending ``order``) into one tile."""
    th, tw = y1 - y0, x1 - x0
    face_buf = np.full((th, tw), BACKGROUND, dtype=np.int32)
    depth_buf = np.full((th, tw), np.inf, dtype=np.float64)
    bary_buf = np.zeros((th, tw, 3), dtype=np.float64)
    inst_buf = np.zeros((th, tw), dtype=np.uint8)

    for fi in order:
        va, vb, vc = faces[fi]
        ax, ay, az = coords[va]
        bx, by, bz = coords[vb]
        cx, cy, cz = coords[vc]
        area2 = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
        if area2 == 0.0:
            continue
        sign = 1.0 if area2 > 0.0 else -1.0

        xmin = min(ax, bx, cx)
        xmax = max(ax, bx, cx)
        ymin = min(ay, by, cy)
        ymax = max(ay, by, cy)
        # pixel centers sit at integer + 0.5
        px0 = max(x0, int(np.ceil(xmin - 0.5)))
        px1 = min(x1 - 1, int(np.floor(xmax - 0.5)))
        py0 = max(y0, int(np.ceil(ymin - 0.5)))
        py1 = min(y1 - 1, int(np.floor(ymax - 0.5)))
        if px0 > px1 or py0 > py1:
            continue

        xs = np.arange(px0, px1 + 1, dtype=np.float64) + 0.5
        ys = np.arange(py0, py1 + 1, dtype=np.float64) + 0.5
        px = xs[None, :]
        py = ys[:, None]

        e0 = _edge(bx, by, cx, cy, px, py)  # opposite vertex a
        e1 = _edge(cx, cy, ax, ay, px, py)  # opposite vertex b
        e2 = _edge(ax, ay, bx, by, px, py)  # opposite vertex c

        # Top-left rule on orientation-normalized edges: horizontal edges
        # pointing +x are "top", edges pointing up (-y) are "left"; pixel
        # centers exactly on those edges belong to the triangle.
        covered = np.ones(e0.shape, dtype=bool)
        for value, (v0x, v0y, v1x, v1y) in (
            (e0, (bx, by, cx, cy)),
            (e1, (cx, cy, ax, ay)),
            (e2, (ax, ay, bx, by)),
        ):
            dx = (v1x - v0x) * sign
            dy = (v1y - v0y) * sign
            top_left = (dy == 0.0 and dx > 0.0) or dy < 0.0
            sv = value * sign
            covered &= (sv >= 0.0) if top_left else (sv > 0.0)
        if not covered.any():
            continue

        w0 = e0 / area2
        w1 = e1 / area2
        w2 = e2 / area2
        depth = w0 * az + w1 * bz + w2 * cz

        sy = slice(py0 - y0, py1 + 1 - y0)
        sx = slice(px0 - x0, px1 + 1 - x0)
        upd = covered & (depth < depth_buf[sy, sx])
        if not upd.any():
            continue
        face_buf[sy, sx][upd] = fi
        depth_buf[sy, sx][upd] = depth[upd]
        bary_buf[sy, sx][upd] = np.stack([w0, w1, w2], axis=-1)[upd]
        inst_buf[sy, sx][upd] = inst_codes[fi]

    return face_buf, bary_buf, depth_buf, inst_buf


def rasterize(
    coords: np.ndarray,
    faces: np.ndarray,
    face_instance,
    width: int,
    height: int,
    *,
    skip: np.ndarray | None = None,
    tile_size: int = DEFAULT_TILE,
    threads: int = 1,
) -> RasterBuffers:
    """Rasterize a triangle soup given per-vertex screen coordinates.

    coords: (N, 3) float (x, y pixels; z meters). faces: (F, 3) int.
    face_instance: Instance | int | (F,) array of instance codes.
    skip: optional (F,) bool, faces to leave out (e.g. degenerate in 3D).

    The visible face at a pixel minimizes interpolated depth; exact depth
    ties go to the lower face index. Output is bit-identical for any
    ``tile_size`` and ``threads`` value.
    """
    if width < 1 or height < 1:
        raise ValueError("raster size must be at least 1x1")
    coords = np.asarray(coords, dtype=np.float64).reshape(-1, 3)
    faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    if not np.isfinite(coords).all():
        raise ValueError("screen coordinates must be finite")

    nf = len(faces)
    inst_codes = np.broadcast_to(
        np.asarray(face_instance, dtype=np.uint8), (nf,)
    ) if nf else np.zeros(0, dtype=np.uint8)

    keep = np.ones(nf, dtype=bool)
    if skip is not None:
        keep &= ~np.asarray(skip, dtype=bool).reshape(nf)

    face = np.full((height, width), BACKGROUND, dtype=np.int32)
    bary = np.zeros((height, width, 3), dtype=np.float32)
    depth = np.full((height, width), np.inf, dtype=np.float32)
    instance = np.zeros((height, width), dtype=np.uint8)
    buffers = RasterBuffers(width, height, face, bary, depth, instance)
    if nf == 0 or not keep.any():
        return buffers

    tri = coords[faces]
    fx0 = tri[:, :, 0].min(axis=1)
    fx1 = tri[:, :, 0].max(axis=1)
    fy0 = tri[:, :, 1].min(axis=1)
    fy1 = tri[:, :, 1].max(axis=1)

    tile_size = max(1, int(tile_size))
    tiles = []
    for ty in range(0, height, tile_size):
        for tx in range(0, width, tile_size):
            x1 = min(tx + tile_size, width)
            y1 = min(ty + tile_size, height)
            # candidate faces whose bbox can reach a pixel center in the tile
            cand = keep & (fx0 < x1) & (fx1 >= tx) & (fy0 < y1) & (fy1 >= ty)
            tiles.append((tx, ty, x1, y1, np.nonzero(cand)[0]))

    def run(job):
        tx, ty, x1, y1, order = job
        fb, bb, db, ib = _raster_tile(coords, faces, inst_codes, order, tx, ty, x1, y1)
        face[ty:y1, tx:x1] = fb
        bary[ty:y1, tx:x1] = bb.astype(np.float32)
        depth[ty:y1, tx:x1] = db.astype(np.float32)
        instance[ty:y1, tx:x1] = ib

    threads = max(1, int(threads))
    if threads == 1 or len(tiles) == 1:
        for job in tiles:
            run(job)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run, tiles))

    return buffers
