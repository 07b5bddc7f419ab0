"""Mesh / camera data model and screen-space projection.

Coordinate conventions used throughout the package:

* camera frame: +x right, +y down, +z forward (camera looks down +z)
* image plane: origin at the top-left corner, x right, y down
* continuous pixel coordinates: the center of pixel (i, j) is (i + 0.5, j + 0.5)
* UV coordinates: [0, 1]^2 with (0, 0) at the top-left of the texture image
  (Wavefront ``vt`` records are flipped to this convention at load time)
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import IntEnum

import numpy as np

from .errors import BehindCamera, NonOrthonormal, TopologyMismatch

DEGENERATE_AREA_M2 = 1e-12
ORTHONORMAL_TOL = 1e-6
MIN_DEPTH_M = 1e-6


class Instance(IntEnum):
    """Instance labels; values double as the raster instance-map codes."""

    BACKGROUND = 0
    HAND = 1
    OBJECT = 2


@dataclass
class Mesh:
    """Triangle mesh with optional per-face UV triplets.

    vertices: (Nv, 3) float64, meters
    faces: (Nf, 3) int32, 0-based vertex indices
    face_uvs: optional (Nf, 3, 2) float64 in [0, 1]^2, top-left UV origin
    """

    vertices: np.ndarray
    faces: np.ndarray
    face_uvs: np.ndarray | None = None
    instance: Instance = Instance.HAND

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.faces = np.asarray(self.faces, dtype=np.int32).reshape(-1, 3)
        if self.face_uvs is not None:
            self.face_uvs = np.asarray(self.face_uvs, dtype=np.float64).reshape(-1, 3, 2)
            if len(self.face_uvs) != len(self.faces):
                raise ValueError(
                    f"face_uvs length {len(self.face_uvs)} != face count {len(self.faces)}"
                )
        if self.faces.size and self.faces.max() >= len(self.vertices):
            raise IndexError(
                f"face index {self.faces.max()} out of range for {len(self.vertices)} vertices"
            )
        if self.faces.size and self.faces.min() < 0:
            raise IndexError("negative face index")

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_faces(self) -> int:
        return len(self.faces)

    def face_areas(self) -> np.ndarray:
        """3D triangle areas in m^2, one per face."""
        tri = self.vertices[self.faces]
        cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        return 0.5 * np.linalg.norm(cross, axis=1)

    def degenerate_faces(self) -> np.ndarray:
        """Boolean flags for faces too thin to rasterize reliably.

        Flagged faces stay in the face list (indices must remain stable
        across spaces) and are skipped by the rasterizer instead.
        """
        return self.face_areas() <= DEGENERATE_AREA_M2

    def with_vertices(self, vertices: np.ndarray) -> "Mesh":
        return replace(self, vertices=np.asarray(vertices, dtype=np.float64))


@dataclass(frozen=True)
class Camera:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if self.width < 1 or self.height < 1:
            raise ValueError("image size must be at least 1x1")


@dataclass
class Scene:
    """One frame: posed hand mesh, canonical object mesh + rigid pose, camera.

    Either instance may be absent. The object's ``object_R`` / ``object_t``
    pose its canonical vertices for this frame; the hand mesh already carries
    posed vertices.
    """

    camera: Camera
    hand: Mesh | None = None
    object: Mesh | None = None
    object_R: np.ndarray = field(default_factory=lambda: np.eye(3))
    object_t: np.ndarray = field(default_factory=lambda: np.zeros(3))
    image_path: str | None = None

    def __post_init__(self):
        self.object_R = np.asarray(self.object_R, dtype=np.float64).reshape(3, 3)
        self.object_t = np.asarray(self.object_t, dtype=np.float64).reshape(3)
        check_orthonormal(self.object_R)
        if self.hand is not None:
            self.hand.instance = Instance.HAND
        if self.object is not None:
            self.object.instance = Instance.OBJECT

    def posed_object(self) -> Mesh | None:
        if self.object is None:
            return None
        return apply_rigid_transform(self.object, self.object_R, self.object_t)


def check_orthonormal(R: np.ndarray, tol: float = ORTHONORMAL_TOL) -> None:
    R = np.asarray(R, dtype=np.float64)
    err = np.abs(R @ R.T - np.eye(3)).max()
    if err > tol:
        raise NonOrthonormal(f"max |R R^T - I| = {err:.3g} exceeds {tol}")


def apply_rigid_transform(mesh: Mesh, R: np.ndarray, t: np.ndarray) -> Mesh:
    """Return a copy of ``mesh`` with vertices mapped to R v + t."""
    R = np.asarray(R, dtype=np.float64).reshape(3, 3)
    t = np.asarray(t, dtype=np.float64).reshape(3)
    check_orthonormal(R)
    return mesh.with_vertices(mesh.vertices @ R.T + t)


def project(camera: Camera, points: np.ndarray) -> np.ndarray:
    """Pinhole projection of camera-frame points to screen coordinates.

    Returns (N, 3): x = fx*X/Z + cx, y = fy*Y/Z + cy, z = Z. The depth
    column keeps metric units so the rasterizer can z-order faces.

    Raises BehindCamera for any point with Z <= 1e-6 m.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    z = pts[:, 2]
    bad = z <= MIN_DEPTH_M
    if bad.any():
        idx = int(np.argmax(bad))
        raise BehindCamera(idx, float(z[idx]))
    out = np.empty_like(pts)
    out[:, 0] = camera.fx * pts[:, 0] / z + camera.cx
    out[:, 1] = camera.fy * pts[:, 1] / z + camera.cy
    out[:, 2] = z
    return out


def check_same_topology(a: Mesh, b: Mesh, what: str = "hand") -> None:
    """Frames of one sequence must share their face list exactly."""
    if a.num_vertices != b.num_vertices:
        raise TopologyMismatch(
            f"{what}: vertex counts differ ({a.num_vertices} vs {b.num_vertices})"
        )
    if a.num_faces != b.num_faces or not np.array_equal(a.faces, b.faces):
        raise TopologyMismatch(f"{what}: face lists differ between frames")
