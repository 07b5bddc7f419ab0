"""Procedural meshes, textures and scenes for demos and verification.

Everything is deterministic given its arguments (and RNG seed where one is
taken). The articulated hand is a palm box with four two-segment fingers;
re-posing it changes vertex positions only, never the face list, matching
the fixed-topology contract real MANO-style meshes satisfy.
"""

from __future__ import annotations

import numpy as np

from .geometry import Camera, Instance, Mesh, Scene


def _box_patch(center, size):
    """12-triangle box; returns (vertices (8, 3), faces (12, 3))."""
    cx, cy, cz = center
    sx, sy, sz = (s / 2.0 for s in size)
    verts = np.array(
        [
            [cx - sx, cy - sy, cz - sz],
            [cx + sx, cy - sy, cz - sz],
            [cx + sx, cy + sy, cz - sz],
            [cx - sx, cy + sy, cz - sz],
            [cx - sx, cy - sy, cz + sz],
            [cx + sx, cy - sy, cz + sz],
            [cx + sx, cy + sy, cz + sz],
            [cx - sx, cy + sy, cz + sz],
        ]
    )
    quads = [
        (0, 1, 2, 3),  # z-
        (5, 4, 7, 6),  # z+
        (4, 5, 1, 0),  # y-
        (3, 2, 6, 7),  # y+
        (4, 0, 3, 7),  # x-
        (1, 5, 6, 2),  # x+
    ]
    faces = []
    for a, b, c, d in quads:
        faces.append((a, b, c))
        faces.append((a, c, d))
    return verts, np.array(faces, dtype=np.int32)


def make_box(size=(0.1, 0.1, 0.1), center=(0.0, 0.0, 0.0), with_uvs: bool = True) -> Mesh:
    """Textured cube. The six sides unwrap into a 3x2 chart grid with a
    small inset so bilinear lookups never cross chart borders."""
    verts, faces = _box_patch(center, size)
    face_uvs = None
    if with_uvs:
        inset = 0.02
        face_uvs = np.empty((12, 3, 2), dtype=np.float64)
        for side in range(6):
            col, row = side % 3, side // 3
            u0, v0 = col / 3.0 + inset, row / 2.0 + inset
            u1, v1 = (col + 1) / 3.0 - inset, (row + 1) / 2.0 - inset
            # two triangles per quad: (a,b,c) and (a,c,d)
            face_uvs[2 * side, 0] = (u0, v0)
            face_uvs[2 * side, 1] = (u1, v0)
            face_uvs[2 * side, 2] = (u1, v1)
            face_uvs[2 * side + 1, 0] = (u0, v0)
            face_uvs[2 * side + 1, 1] = (u1, v1)
            face_uvs[2 * side + 1, 2] = (u0, v1)
    return Mesh(vertices=verts, faces=faces, face_uvs=face_uvs, instance=Instance.OBJECT)


def make_sphere(radius=0.05, rings=8, segments=12, center=(0.0, 0.0, 0.0)) -> Mesh:
    """UV sphere without texture coordinates."""
    cx, cy, cz = center
    verts = [(cx, cy, cz - radius)]
    for r in range(1, rings):
        phi = np.pi * r / rings
        for s in range(segments):
            theta = 2 * np.pi * s / segments
            verts.append(
                (
                    cx + radius * np.sin(phi) * np.cos(theta),
                    cy + radius * np.sin(phi) * np.sin(theta),
                    cz - radius * np.cos(phi),
                )
            )
    verts.append((cx, cy, cz + radius))
    top, bottom = 0, len(verts) - 1
    faces = []
    ring = lambda r: 1 + (r - 1) * segments
    for s in range(segments):
        faces.append((top, ring(1) + (s + 1) % segments, ring(1) + s))
    for r in range(1, rings - 1):
        for s in range(segments):
            a = ring(r) + s
            b = ring(r) + (s + 1) % segments
            c = ring(r + 1) + s
            d = ring(r + 1) + (s + 1) % segments
            faces.append((a, b, c))
            faces.append((b, d, c))
    for s in range(segments):
        faces.append((bottom, ring(rings - 1) + s, ring(rings - 1) + (s + 1) % segments))
    return Mesh(
        vertices=np.asarray(verts, dtype=np.float64),
        faces=np.asarray(faces, dtype=np.int32),
        instance=Instance.HAND,
    )


def _rot_x(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]], dtype=np.float64)


def make_hand(curl=(0.0, 0.0, 0.0, 0.0), *, center=(0.0, 0.0, 0.55), scale=1.0) -> Mesh:
    """Low-poly articulated hand: palm box + four two-segment fingers.

    ``curl[i]`` bends finger i (radians) at the knuckle, and half as much
    again at the middle joint. Topology is independent of the pose.
    """
    curl = tuple(curl)
    if len(curl) != 4:
        raise ValueError("expected 4 finger curl angles")
    palm_w, palm_h, palm_d = 0.080 * scale, 0.075 * scale, 0.022 * scale
    seg_len = 0.034 * scale
    seg_w = 0.015 * scale
    all_v = []
    all_f = []

    def add(verts, faces):
        base = sum(len(v) for v in all_v)
        all_v.append(verts)
        all_f.append(faces + base)

    add(*_box_patch((0.0, 0.0, 0.0), (palm_w, palm_h, palm_d)))

    xs = np.linspace(-palm_w / 2 + seg_w, palm_w / 2 - seg_w, 4)
    knuckle_y = -palm_h / 2
    for i, x in enumerate(xs):
        a1 = curl[i]
        a2 = curl[i] * 0.5
        # first segment: box ahead of the knuckle, bent by a1
        v1, f1 = _box_patch((0.0, -seg_len / 2, 0.0), (seg_w, seg_len, palm_d * 0.8))
        r1 = _rot_x(a1)
        v1 = v1 @ r1.T + np.array([x, knuckle_y, 0.0])
        # second segment hangs off the first one's tip, bent further by a2
        tip_local = np.array([0.0, -seg_len, 0.0]) @ r1.T
        v2, f2 = _box_patch((0.0, -seg_len / 2, 0.0), (seg_w * 0.9, seg_len, palm_d * 0.7))
        v2 = v2 @ (_rot_x(a1 + a2)).T + np.array([x, knuckle_y, 0.0]) + tip_local
        add(v1, f1)
        add(v2, f2)

    verts = np.concatenate(all_v, axis=0) + np.asarray(center, dtype=np.float64)
    faces = np.concatenate(all_f, axis=0)
    return Mesh(vertices=verts, faces=faces.astype(np.int32), instance=Instance.HAND)


def position_vertex_colors(vertices: np.ndarray) -> np.ndarray:
    """Smooth per-vertex RGB, linear in position (resampling-friendly)."""
    v = np.asarray(vertices, dtype=np.float64)
    lo = v.min(axis=0)
    extent = np.maximum(v.max(axis=0) - lo, 1e-9)
    n = (v - lo) / extent
    colors = np.empty((len(v), 3), dtype=np.float64)
    colors[:, 0] = 40.0 + 170.0 * n[:, 0]
    colors[:, 1] = 50.0 + 160.0 * n[:, 1]
    colors[:, 2] = 60.0 + 150.0 * n[:, 2]
    return colors


def gradient_texture(width=256, height=256) -> np.ndarray:
    """Smooth multi-hue texture (low spatial frequency, bilinear-safe)."""
    x = np.linspace(0.0, 1.0, width)[None, :]
    y = np.linspace(0.0, 1.0, height)[:, None]
    r = 70 + 120 * x + 40 * np.sin(2.2 * np.pi * y)
    g = 60 + 130 * y + 35 * np.sin(1.8 * np.pi * x)
    b = 90 + 80 * (1 - x) * y + 30 * np.cos(1.5 * np.pi * (x + y))
    tex = np.stack(
        [np.clip(r, 0, 255), np.clip(g, 0, 255), np.clip(b, 0, 255)], axis=-1
    )
    rgba = np.concatenate(
        [tex, np.full((height, width, 1), 255.0)], axis=-1
    )
    return np.broadcast_to(rgba, (height, width, 4)).astype(np.uint8)


def checker_texture(width=256, height=256, cells=8) -> np.ndarray:
    x = np.arange(width)[None, :] * cells // width
    y = np.arange(height)[:, None] * cells // height
    odd = (x + y) % 2 == 1
    tex = np.where(odd[:, :, None], [220, 80, 60], [40, 90, 200])
    rgba = np.concatenate(
        [tex, np.full((height, width, 1), 255, dtype=np.int64)], axis=-1
    )
    return rgba.astype(np.uint8)


def default_camera(width=200, height=200, f=240.0) -> Camera:
    return Camera(fx=f, fy=f, cx=width / 2.0, cy=height / 2.0, width=width, height=height)


def desk_scene(
    curl=(0.2, 0.3, 0.25, 0.15),
    object_rotation=None,
    object_translation=(0.03, 0.01, 0.60),
    camera: Camera | None = None,
) -> Scene:
    """Hand hovering next to a textured cube, desk scale."""
    if camera is None:
        camera = default_camera()
    if object_rotation is None:
        a = 0.5
        c, s = np.cos(a), np.sin(a)
        object_rotation = np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])
    return Scene(
        camera=camera,
        hand=make_hand(curl, center=(-0.045, 0.01, 0.55)),
        object=make_box(size=(0.07, 0.07, 0.07)),
        object_R=object_rotation,
        object_t=np.asarray(object_translation, dtype=np.float64),
    )


def random_triangle_soup(rng: np.random.Generator, n_faces: int, width: int, height: int):
    """Random screen-space triangles for rasterizer stress tests.

    Returns (coords (3F, 3), faces (F, 3), instance (F,)). Triangles span
    a margin beyond the viewport so clipping paths get exercised.
    """
    centers = np.stack(
        [
            rng.uniform(-8, width + 8, n_faces),
            rng.uniform(-8, height + 8, n_faces),
        ],
        axis=1,
    )
    spread = rng.uniform(2.0, 0.45 * max(width, height), (n_faces, 1, 1))
    offsets = rng.uniform(-1.0, 1.0, (n_faces, 3, 2)) * spread
    xy = centers[:, None, :] + offsets
    z = rng.uniform(0.3, 3.0, (n_faces, 3, 1))
    coords = np.concatenate([xy, z], axis=2).reshape(-1, 3)
    faces = np.arange(n_faces * 3, dtype=np.int64).reshape(-1, 3)
    instance = rng.integers(1, 3, n_faces).astype(np.uint8)
    return coords, faces, instance


def layered_sheet_mesh(
    rng: np.random.Generator,
    n_layers: int = 4,
    quads_per_layer: int = 6,
    *,
    z0: float = 0.5,
    dz: float = 0.08,
) -> Mesh:
    """Stacked tilted quads with clear depth separation between layers.

    Designed for occlusion tests: surfaces overlap heavily on screen while
    staying far apart (>> any depth epsilon) along each camera ray.
    """
    verts = []
    faces = []
    for layer in range(n_layers):
        z = z0 + layer * dz
        for _ in range(quads_per_layer):
            cx, cy = rng.uniform(-0.06, 0.06, 2)
            w, h = rng.uniform(0.025, 0.06, 2)
            tilt = rng.uniform(-0.25, 0.25, 2)  # dz per unit x / y
            base = len(verts)
            for dx, dy in ((-w, -h), (w, -h), (w, h), (-w, h)):
                verts.append((cx + dx, cy + dy, z + tilt[0] * dx + tilt[1] * dy))
            faces.append((base, base + 1, base + 2))
            faces.append((base, base + 2, base + 3))
    return Mesh(
        vertices=np.asarray(verts, dtype=np.float64),
        faces=np.asarray(faces, dtype=np.int32),
        instance=Instance.HAND,
    )
