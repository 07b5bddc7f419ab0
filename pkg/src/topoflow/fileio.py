"""Bit-exact serialization: TFLO/TMAP binary fields, PNG, scene configs.

TFLO byte layout (little-endian):

    offset  size  field
    0       4     magic: b"TFLO" (flow / depth) or b"TMAP" (topology)
    4       4     version, uint32 = 1
    8       4     width, uint32
    12      4     height, uint32
    16      4     channels, uint32 (2 = flow/topology, 1 = depth)
    20      w*h*c*4  float32 payload, row-major from the top row,
                  channel-interleaved; invalid entries are quiet NaN

The payload must follow the header exactly; any other length is an error.
"""

from __future__ import annotations

import json
import os
import struct
from typing import BinaryIO

import numpy as np
from PIL import Image

from .errors import (
    BadMagic,
    FormatError,
    SchemaError,
    TruncatedPayload,
    UnsupportedVersion,
)
from .flow import FlowField, TopologyMap
from .geometry import Camera, Instance, Mesh, Scene, check_same_topology
from .obj import load_obj

MAGIC_FLOW = b"TFLO"
MAGIC_TOPO = b"TMAP"
TFLO_VERSION = 1
_HEADER = struct.Struct("<4sIIII")

KIND_FLOW = "flow"
KIND_TOPOLOGY = "topology"
KIND_DEPTH = "depth"


def _as_payload(field) -> tuple[np.ndarray, str]:
    if isinstance(field, FlowField):
        return field.vectors, KIND_FLOW
    if isinstance(field, TopologyMap):
        return field.values, KIND_TOPOLOGY
    arr = np.asarray(field, dtype=np.float32)
    if arr.ndim == 2:
        return arr[:, :, None], KIND_DEPTH
    if arr.ndim == 3 and arr.shape[2] in (1, 2):
        return arr, KIND_FLOW if arr.shape[2] == 2 else KIND_DEPTH
    raise ValueError(f"cannot serialize array of shape {arr.shape}")


def write_tflo(path_or_file, field, kind: str | None = None) -> None:
    """Serialize a flow field, topology map or depth grid.

    ``field`` may be a FlowField, TopologyMap, (H, W) or (H, W, C<=2)
    array. ``kind`` overrides the inferred payload kind.
    """
    data, inferred = _as_payload(field)
    kind = kind or inferred
    if kind not in (KIND_FLOW, KIND_TOPOLOGY, KIND_DEPTH):
        raise ValueError(f"unknown kind {kind!r}")
    h, w, c = data.shape
    if h < 1 or w < 1:
        raise ValueError("field dimensions must be at least 1x1")
    expected_c = 1 if kind == KIND_DEPTH else 2
    if c != expected_c:
        raise ValueError(f"{kind} payload must have {expected_c} channels, got {c}")
    magic = MAGIC_TOPO if kind == KIND_TOPOLOGY else MAGIC_FLOW
    header = _HEADER.pack(magic, TFLO_VERSION, w, h, c)
    payload = np.ascontiguousarray(data, dtype="<f4").tobytes()

    if hasattr(path_or_file, "write"):
        path_or_file.write(header)
        path_or_file.write(payload)
    else:
        with open(path_or_file, "wb") as fh:
            fh.write(header)
            fh.write(payload)


def read_tflo(path_or_file) -> tuple[str, np.ndarray]:
    """Inverse of :func:`write_tflo`; returns (kind, (H, W, C) float32).

    Raises BadMagic / UnsupportedVersion / TruncatedPayload on violations.
    """
    if hasattr(path_or_file, "read"):
        raw = path_or_file.read()
    else:
        with open(path_or_file, "rb") as fh:
            raw = fh.read()
    if len(raw) < _HEADER.size:
        raise TruncatedPayload(f"file has {len(raw)} bytes, header needs {_HEADER.size}")
    magic, version, w, h, c = _HEADER.unpack_from(raw)
    if magic not in (MAGIC_FLOW, MAGIC_TOPO):
        raise BadMagic(f"magic {magic!r}")
    if version != TFLO_VERSION:
        raise UnsupportedVersion(f"version {version}")
    if c not in (1, 2):
        raise FormatError(f"unsupported channel count {c}")
    if w < 1 or h < 1:
        raise FormatError(f"bad dimensions {w}x{h}")
    expected = w * h * c * 4
    got = len(raw) - _HEADER.size
    if got != expected:
        raise TruncatedPayload(f"payload has {got} bytes, expected {expected}")
    data = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(h, w, c)
    if magic == MAGIC_TOPO:
        kind = KIND_TOPOLOGY
    else:
        kind = KIND_DEPTH if c == 1 else KIND_FLOW
    return kind, data.copy()


def read_flow_field(path_or_file) -> FlowField:
    kind, data = read_tflo(path_or_file)
    if kind == KIND_DEPTH:
        raise FormatError("expected a 2-channel field, got depth")
    valid = np.isfinite(data).all(axis=2)
    return FlowField(vectors=data, valid=valid)


# --- PNG ------------------------------------------------------------------


def save_png(path: str | os.PathLike, array: np.ndarray) -> None:
    """Write an image with fixed encoder settings (deterministic output).

    (H, W, 4) uint8 -> RGBA, (H, W, 3) uint8 -> RGB, (H, W) uint8 -> 8-bit
    grayscale (masks), (H, W) uint16 -> 16-bit grayscale (face-index dumps).
    """
    arr = np.ascontiguousarray(array)
    if arr.ndim == 3 and arr.shape[2] == 4 and arr.dtype == np.uint8:
        img = Image.fromarray(arr, "RGBA")
    elif arr.ndim == 3 and arr.shape[2] == 3 and arr.dtype == np.uint8:
        img = Image.fromarray(arr, "RGB")
    elif arr.ndim == 2 and arr.dtype == np.uint8:
        img = Image.fromarray(arr, "L")
    elif arr.ndim == 2 and arr.dtype == np.uint16:
        img = Image.fromarray(arr)  # infers I;16
    else:
        raise ValueError(f"unsupported image array: shape {arr.shape}, dtype {arr.dtype}")
    img.save(path, format="PNG", compress_level=6)


def load_image_rgba(path: str | os.PathLike) -> np.ndarray:
    """Load any PNG/image file as (H, W, 4) uint8."""
    with Image.open(path) as img:
        return np.asarray(img.convert("RGBA"), dtype=np.uint8).copy()


def load_png_raw(path: str | os.PathLike) -> np.ndarray:
    """Load a PNG preserving its stored mode (L / I;16 / RGB / RGBA)."""
    with Image.open(path) as img:
        return np.asarray(img).copy()


def save_mask_png(path: str | os.PathLike, mask: np.ndarray) -> None:
    """Boolean mask to 8-bit grayscale PNG with values in {0, 255}."""
    save_png(path, np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8))


def save_face_map_png(path: str | os.PathLike, face: np.ndarray) -> None:
    """Face-index debug dump: 16-bit grayscale of (face index + 1), clamped."""
    shifted = np.clip(face.astype(np.int64) + 1, 0, 65535).astype(np.uint16)
    save_png(path, shifted)


# --- scene configuration ---------------------------------------------------


_CAMERA_FIELDS = ("fx", "fy", "cx", "cy", "width", "height")


def _parse_camera(node: dict, where: str) -> Camera:
    for key in _CAMERA_FIELDS:
        if key not in node:
            raise SchemaError(f"{where}.{key}")
        if not isinstance(node[key], (int, float)):
            raise SchemaError(f"{where}.{key}", "must be a number")
    try:
        return Camera(
            fx=float(node["fx"]),
            fy=float(node["fy"]),
            cx=float(node["cx"]),
            cy=float(node["cy"]),
            width=int(node["width"]),
            height=int(node["height"]),
        )
    except ValueError as exc:
        raise SchemaError(where, str(exc)) from exc


def _resolve(base: str, path: str) -> str:
    return path if os.path.isabs(path) else os.path.join(base, path)


def _parse_frame(node: dict, where: str, base: str, shared_camera: Camera | None) -> Scene:
    if not isinstance(node, dict):
        raise SchemaError(where, "must be an object")
    if "camera" in node:
        camera = _parse_camera(node["camera"], f"{where}.camera")
    elif shared_camera is not None:
        camera = shared_camera
    else:
        raise SchemaError(f"{where}.camera")

    hand = None
    if "hand_obj" in node:
        hand_path = _resolve(base, node["hand_obj"])
        if not os.path.exists(hand_path):
            raise FileNotFoundError(hand_path)
        hand = load_obj(hand_path, instance=Instance.HAND)

    obj: Mesh | None = None
    rotation = np.eye(3)
    translation = np.zeros(3)
    if "object_obj" in node:
        obj_path = _resolve(base, node["object_obj"])
        if not os.path.exists(obj_path):
            raise FileNotFoundError(obj_path)
        obj = load_obj(obj_path, instance=Instance.OBJECT)
        if "object_rotation" in node:
            rot = np.asarray(node["object_rotation"], dtype=np.float64)
            if rot.size != 9:
                raise SchemaError(f"{where}.object_rotation", "expected 9 floats (row-major)")
            rotation = rot.reshape(3, 3)
        if "object_translation" in node:
            tr = np.asarray(node["object_translation"], dtype=np.float64)
            if tr.size != 3:
                raise SchemaError(f"{where}.object_translation", "expected 3 floats")
            translation = tr.reshape(3)
    if hand is None and obj is None:
        raise SchemaError(where, "needs at least one of hand_obj / object_obj")

    image_path = None
    if "image" in node and node["image"] is not None:
        image_path = _resolve(base, node["image"])
        if not os.path.exists(image_path):
            raise FileNotFoundError(image_path)

    return Scene(
        camera=camera,
        hand=hand,
        object=obj,
        object_R=rotation,
        object_t=translation,
        image_path=image_path,
    )


def parse_scene(path: str | os.PathLike):
    """Parse a run configuration into (source Scene, target Scene, options).

    The JSON document holds sibling "source" and "target" frame objects, an
    optional top-level "camera" both frames inherit, the object texture
    path, and an optional "output" options object. Hand (and object)
    topology must match across the two frames.
    """
    path = os.fspath(path)
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError("<document>", f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError("<document>", "must be a JSON object")
    base = os.path.dirname(path)

    shared_camera = None
    if "camera" in doc:
        shared_camera = _parse_camera(doc["camera"], "camera")

    if "source" not in doc:
        raise SchemaError("source")
    if "target" not in doc:
        raise SchemaError("target")
    source = _parse_frame(doc["source"], "source", base, shared_camera)
    target = _parse_frame(doc["target"], "target", base, shared_camera)

    if (source.hand is None) != (target.hand is None):
        raise SchemaError("target.hand_obj", "hand must appear in both frames or neither")
    if (source.object is None) != (target.object is None):
        raise SchemaError("target.object_obj", "object must appear in both frames or neither")
    if source.hand is not None:
        check_same_topology(source.hand, target.hand, "hand")
    if source.object is not None:
        check_same_topology(source.object, target.object, "object")

    options = dict(doc.get("output", {}))
    texture_path = None
    for node in (doc, doc.get("source", {}), doc.get("target", {})):
        if isinstance(node, dict) and node.get("object_texture"):
            texture_path = _resolve(base, node["object_texture"])
            break
    if texture_path is not None and not os.path.exists(texture_path):
        raise FileNotFoundError(texture_path)
    options["object_texture"] = texture_path
    return source, target, options
