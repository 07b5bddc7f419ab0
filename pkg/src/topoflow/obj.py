"""Wavefront OBJ reading and writing.

Supports ``v``, ``vt`` and ``f`` records with ``v``, ``v/vt``, ``v//vn`` and
``v/vt/vn`` face syntax. Faces with more than three corners are
fan-triangulated around their first corner. Texture coordinates are flipped
from the OBJ bottom-left origin to the package-wide top-left image
convention at load time (and flipped back on write).
"""

from __future__ import annotations

import os

import numpy as np

from .errors import EmptyMesh, ParseError
from .geometry import Instance, Mesh


def _parse_floats(parts: list[str], n: int, lineno: int, record: str) -> list[float]:
    if len(parts) < n:
        raise ParseError(lineno, f"'{record}' record needs {n} values, got {len(parts)}")
    try:
        return [float(p) for p in parts[:n]]
    except ValueError as exc:
        raise ParseError(lineno, f"bad float in '{record}' record: {exc}") from exc


def _resolve_index(raw: int, count: int, lineno: int, kind: str) -> int:
    # OBJ indices are 1-based; negative counts back from the current end.
    if raw > 0:
        idx = raw - 1
    elif raw < 0:
        idx = count + raw
    else:
        raise ParseError(lineno, f"{kind} index 0 is not allowed")
    if not 0 <= idx < count:
        raise ParseError(lineno, f"{kind} index {raw} out of range (have {count})")
    return idx


def load_obj(path: str | os.PathLike, instance: Instance = Instance.HAND) -> Mesh:
    """Parse an OBJ file into a triangulated :class:`Mesh`.

    Raises ParseError(line, reason) on malformed records and EmptyMesh when
    the file contains no faces. ``face_uvs`` is populated iff every face
    carries texture-coordinate indices.
    """
    vertices: list[list[float]] = []
    texcoords: list[list[float]] = []
    faces: list[tuple[int, int, int]] = []
    face_uv_idx: list[tuple[int, int, int] | None] = []

    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        for lineno, line in enumerate(fh, start=1):
            if "#" in line:
                line = line[: line.index("#")]
            parts = line.split()
            if not parts:
                continue
            tag = parts[0]
            if tag == "v":
                vertices.append(_parse_floats(parts[1:], 3, lineno, "v"))
            elif tag == "vt":
                u, v = _parse_floats(parts[1:], 2, lineno, "vt")
                texcoords.append([u, 1.0 - v])
            elif tag == "f":
                corners = parts[1:]
                if len(corners) < 3:
                    raise ParseError(lineno, f"face with {len(corners)} corners")
                vids: list[int] = []
                tids: list[int | None] = []
                for corner in corners:
                    fields = corner.split("/")
                    if not fields[0]:
                        raise ParseError(lineno, f"empty vertex reference in '{corner}'")
                    try:
                        raw_v = int(fields[0])
                        raw_t = int(fields[1]) if len(fields) > 1 and fields[1] else None
                    except ValueError as exc:
                        raise ParseError(lineno, f"bad face corner '{corner}'") from exc
                    vids.append(_resolve_index(raw_v, len(vertices), lineno, "vertex"))
                    if raw_t is None:
                        tids.append(None)
                    else:
                        tids.append(_resolve_index(raw_t, len(texcoords), lineno, "texture"))
                for i in range(2, len(vids)):
                    faces.append((vids[0], vids[i - 1], vids[i]))
                    if tids[0] is None or tids[i - 1] is None or tids[i] is None:
                        face_uv_idx.append(None)
                    else:
                        face_uv_idx.append((tids[0], tids[i - 1], tids[i]))
            # ignore vn, o, g, s, usemtl, mtllib and other records

    if not faces:
        raise EmptyMesh(f"{path}: no faces")

    face_uvs = None
    with_uv = [t for t in face_uv_idx if t is not None]
    if with_uv:
        if len(with_uv) != len(face_uv_idx):
            raise ParseError(0, "some faces have texture indices and some do not")
        vt = np.asarray(texcoords, dtype=np.float64)
        face_uvs = vt[np.asarray(with_uv, dtype=np.int64)]

    return Mesh(
        vertices=np.asarray(vertices, dtype=np.float64),
        faces=np.asarray(faces, dtype=np.int32),
        face_uvs=face_uvs,
        instance=instance,
    )


def write_obj(path: str | os.PathLike, mesh: Mesh) -> None:
    """Write a mesh as ASCII OBJ (inverse of :func:`load_obj`)."""
    lines: list[str] = []
    for v in mesh.vertices:
        lines.append(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}")
    if mesh.face_uvs is not None:
        for tri_uv in mesh.face_uvs:
            for u, v in tri_uv:
                lines.append(f"vt {u:.9g} {1.0 - v:.9g}")
        for fi, face in enumerate(mesh.faces):
            t = 3 * fi
            lines.append(
                f"f {face[0] + 1}/{t + 1} {face[1] + 1}/{t + 2} {face[2] + 1}/{t + 3}"
            )
    else:
        for face in mesh.faces:
            lines.append(f"f {face[0] + 1} {face[1] + 1} {face[2] + 1}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
