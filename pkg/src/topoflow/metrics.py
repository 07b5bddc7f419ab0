"""Structure-preservation metrics: PA-MPJPE, 3D-PCK AUC, ADD / ADD-0.1D.

All lengths are millimeters. Hand errors are measured after removing a
best-fit similarity transform (Procrustes alignment with reflections
disallowed); the PCK curve integrates over thresholds 0..50 mm by default,
the dominant convention for desk-scale hand benchmarks, and both the range
and step count are configurable.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateConfiguration,
    EmptyInput,
    EmptyVertices,
    SchemaError,
)
from .geometry import check_orthonormal

NUM_HAND_JOINTS = 21
DEFAULT_PCK_MAX_MM = 50.0
DEFAULT_PCK_STEPS = 100


@dataclass
class PoseSet:
    """Hand joints plus object rigid pose for one frame (millimeters)."""

    hand_joints: np.ndarray  # (21, 3)
    object_R: np.ndarray  # (3, 3)
    object_t: np.ndarray  # (3,)
    object_vertices: np.ndarray  # (V, 3) canonical
    object_diameter: float  # max pairwise canonical-vertex distance

    def __post_init__(self):
        self.hand_joints = np.asarray(self.hand_joints, dtype=np.float64).reshape(-1, 3)
        if len(self.hand_joints) != NUM_HAND_JOINTS:
            raise ValueError(f"expected {NUM_HAND_JOINTS} joints, got {len(self.hand_joints)}")
        self.object_R = np.asarray(self.object_R, dtype=np.float64).reshape(3, 3)
        self.object_t = np.asarray(self.object_t, dtype=np.float64).reshape(3)
        check_orthonormal(self.object_R)
        self.object_vertices = np.asarray(self.object_vertices, dtype=np.float64).reshape(-1, 3)
        if self.object_diameter <= 0:
            raise ValueError("object diameter must be positive")


def procrustes_align(pred: np.ndarray, gt: np.ndarray):
    """Best similarity transform (s, R, t) minimizing ||s R p_i + t - g_i||^2.

    Reflections are disallowed (det R = +1). Returns (s, R, t, aligned_pred).
    Raises DegenerateConfiguration when the ground truth spans less than a
    plane (rank < 2), where the rotation is not identifiable.
    """
    p = np.asarray(pred, dtype=np.float64).reshape(-1, 3)
    g = np.asarray(gt, dtype=np.float64).reshape(-1, 3)
    if p.shape != g.shape or len(p) < 3:
        raise ValueError("point sets must match and contain at least 3 points")
    mu_p = p.mean(axis=0)
    mu_g = g.mean(axis=0)
    pc = p - mu_p
    gc = g - mu_g

    sv = np.linalg.svd(gc, compute_uv=False)
    if (sv > 1e-9 * max(sv[0], 1.0)).sum() < 2:
        raise DegenerateConfiguration("ground-truth points have rank < 2")

    norm_p = (pc**2).sum()
    if norm_p == 0.0:
        raise DegenerateConfiguration("predicted points are all coincident")

    h = pc.T @ gc
    u, s, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    flip = np.diag([1.0, 1.0, d])
    rot = vt.T @ flip @ u.T
    scale = float(np.trace(flip @ np.diag(s)) / norm_p)
    trans = mu_g - scale * rot @ mu_p
    aligned = scale * p @ rot.T + trans
    return scale, rot, trans, aligned


def pa_mpjpe(pred_joints: np.ndarray, gt_joints: np.ndarray) -> float:
    """Mean per-joint error (mm) after Procrustes alignment."""
    _, _, _, aligned = procrustes_align(pred_joints, gt_joints)
    gt = np.asarray(gt_joints, dtype=np.float64).reshape(-1, 3)
    return float(np.linalg.norm(aligned - gt, axis=1).mean())


def pck_auc(
    errors,
    t_max: float = DEFAULT_PCK_MAX_MM,
    steps: int = DEFAULT_PCK_STEPS,
) -> float:
    """Area under the 3D-PCK curve as a percentage.

    PCK(tau) is the fraction of errors <= tau; the curve is averaged with
    the trapezoid rule over ``steps`` uniform intervals on [0, t_max].
    """
    e = np.asarray(errors, dtype=np.float64).ravel()
    if e.size == 0:
        raise EmptyInput("no joint errors given")
    if (e < 0).any():
        raise ValueError("errors must be non-negative")
    taus = np.linspace(0.0, t_max, steps + 1)
    pck = (e[None, :] <= taus[:, None]).mean(axis=1)
    auc = np.trapezoid(pck, taus) / t_max
    return float(auc * 100.0)


def add_metric(
    pred_R, pred_t, gt_R, gt_t, vertices: np.ndarray
) -> float:
    """ADD: mean distance between identically indexed transformed vertices."""
    v = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
    if len(v) == 0:
        raise EmptyVertices("object has no vertices")
    pred_R = np.asarray(pred_R, dtype=np.float64).reshape(3, 3)
    gt_R = np.asarray(gt_R, dtype=np.float64).reshape(3, 3)
    pred_t = np.asarray(pred_t, dtype=np.float64).reshape(3)
    gt_t = np.asarray(gt_t, dtype=np.float64).reshape(3)
    a = v @ pred_R.T + pred_t
    b = v @ gt_R.T + gt_t
    return float(np.linalg.norm(a - b, axis=1).mean())


def add_01d(pred_R, pred_t, gt_R, gt_t, vertices, diameter: float):
    """(add, pass) where pass requires add strictly below 10% of diameter."""
    if diameter <= 0:
        raise ValueError("diameter must be positive")
    add = add_metric(pred_R, pred_t, gt_R, gt_t, vertices)
    return add, bool(add < 0.1 * diameter)


def object_diameter(vertices: np.ndarray, chunk: int = 2048) -> float:
    """Exact max pairwise vertex distance (the ADD-0.1D diameter)."""
    v = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
    if len(v) < 2:
        raise EmptyVertices("diameter needs at least 2 vertices")
    best = 0.0
    for i in range(0, len(v), chunk):
        d = np.linalg.norm(v[i : i + chunk, None, :] - v[None, :, :], axis=2)
        best = max(best, float(d.max()))
    return best


# --- dataset-level evaluation --------------------------------------------


def _need(record: dict, key: str, line: int):
    if key not in record:
        raise SchemaError(f"line {line}: {key}", "missing field")
    return record[key]


def load_frame_records(path: str | os.PathLike) -> list[dict]:
    """Read the JSONL prediction file (one frame per line)."""
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"line {lineno}", f"invalid JSON: {exc}") from exc
            frame = {
                "frame_id": rec.get("frame_id", lineno),
                "pred_joints": np.asarray(_need(rec, "pred_joints", lineno), dtype=np.float64),
                "gt_joints": np.asarray(_need(rec, "gt_joints", lineno), dtype=np.float64),
                "pred_R": np.asarray(_need(rec, "pred_R", lineno), dtype=np.float64).reshape(3, 3),
                "pred_t": np.asarray(_need(rec, "pred_t", lineno), dtype=np.float64).reshape(3),
                "gt_R": np.asarray(_need(rec, "gt_R", lineno), dtype=np.float64).reshape(3, 3),
                "gt_t": np.asarray(_need(rec, "gt_t", lineno), dtype=np.float64).reshape(3),
                "object_id": _need(rec, "object_id", lineno),
            }
            for key in ("pred_joints", "gt_joints"):
                if frame[key].shape != (NUM_HAND_JOINTS, 3):
                    raise SchemaError(
                        f"line {lineno}: {key}",
                        f"expected shape (21, 3), got {frame[key].shape}",
                    )
            records.append(frame)
    if not records:
        raise EmptyInput(f"{path}: no frame records")
    return records


def load_object_registry(path: str | os.PathLike) -> dict:
    """Object registry: id -> {vertices (V, 3) mm, diameter_mm}.

    ``vertices_path`` may point to an OBJ file or a JSON list of points.
    ``diameter_mm`` is computed (and cached in the returned dict) when
    absent.
    """
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    base = os.path.dirname(os.fspath(path))
    registry = {}
    for obj_id, entry in raw.items():
        if "vertices_path" not in entry:
            raise SchemaError(f"registry.{obj_id}.vertices_path")
        vpath = entry["vertices_path"]
        if not os.path.isabs(vpath):
            vpath = os.path.join(base, vpath)
        if vpath.endswith(".json"):
            with open(vpath, "r", encoding="utf-8") as vfh:
                vertices = np.asarray(json.load(vfh), dtype=np.float64).reshape(-1, 3)
        else:
            from .obj import load_obj

            vertices = load_obj(vpath).vertices
        diameter = entry.get("diameter_mm")
        if diameter is None:
            diameter = object_diameter(vertices)
        registry[obj_id] = {"vertices": vertices, "diameter_mm": float(diameter)}
    return registry


def evaluate_dataset(
    records: list[dict],
    registry: dict,
    *,
    pck_max_mm: float = DEFAULT_PCK_MAX_MM,
    pck_steps: int = DEFAULT_PCK_STEPS,
) -> dict:
    """Aggregate hand AUC / PA-MPJPE and per-object ADD-0.1D over frames.

    Hand joint errors are pooled per joint after Procrustes alignment, so
    the AUC and the mean error describe the same aligned residuals.
    """
    if not records:
        raise EmptyInput("no frame records")
    per_frame_mpjpe = []
    pooled_errors = []
    per_object: dict = {}
    for rec in records:
        _, _, _, aligned = procrustes_align(rec["pred_joints"], rec["gt_joints"])
        errs = np.linalg.norm(aligned - rec["gt_joints"], axis=1)
        # aligning identical point sets leaves ~1e-13 mm of float dust,
        # which would spoil PCK at threshold 0; snap it away
        errs[errs < 1e-9] = 0.0
        pooled_errors.append(errs)
        per_frame_mpjpe.append(errs.mean())

        obj_id = rec["object_id"]
        if obj_id not in registry:
            raise SchemaError(f"object_id {obj_id!r}", "not present in the registry")
        entry = registry[obj_id]
        add, ok = add_01d(
            rec["pred_R"], rec["pred_t"], rec["gt_R"], rec["gt_t"],
            entry["vertices"], entry["diameter_mm"],
        )
        stats = per_object.setdefault(obj_id, {"adds": [], "passes": 0, "frames": 0})
        stats["adds"].append(add)
        stats["passes"] += int(ok)
        stats["frames"] += 1

    pooled = np.concatenate(pooled_errors)
    report_objects = {}
    for obj_id, stats in sorted(per_object.items()):
        report_objects[obj_id] = {
            "add_01d": 100.0 * stats["passes"] / stats["frames"],
            "mean_add_mm": float(np.mean(stats["adds"])),
            "frames": stats["frames"],
        }
    return {
        "hand": {
            "auc": pck_auc(pooled, t_max=pck_max_mm, steps=pck_steps),
            "pa_mpjpe_mm": float(np.mean(per_frame_mpjpe)),
            "frames": len(records),
        },
        "per_object": report_objects,
        "average_add_01d": float(
            np.mean([o["add_01d"] for o in report_objects.values()])
        ),
        "pck_max_mm": pck_max_mm,
        "pck_steps": pck_steps,
    }


def report_to_csv(report: dict) -> str:
    """Flatten a report into the benchmark-table CSV layout (one data row)."""
    objects = sorted(report["per_object"])
    header = ["AUC", "PAJPE", *objects, "Aver."]
    row = [
        f"{report['hand']['auc']:.1f}",
        f"{report['hand']['pa_mpjpe_mm']:.1f}",
        *(f"{report['per_object'][o]['add_01d']:.1f}" for o in objects),
        f"{report['average_add_01d']:.1f}",
    ]
    return ",".join(header) + "\n" + ",".join(row) + "\n"
