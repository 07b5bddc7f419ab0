"""Command-line pipeline driver.

Subcommands cover the whole chain (``generate``), the individual stages
(``raster``, ``atlas``, ``flow``, ``fuse``) so golden files stay reviewable
in isolation, plus ``metrics`` and ``inspect``. Exit codes: 0 success,
1 internal error, 2 invalid input. Set TOPOFLOW_LOG=debug|info|... for
diagnostics.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time

import numpy as np

from . import __version__
from .errors import InputError, TopoflowError
from .fileio import (
    load_image_rgba,
    parse_scene,
    read_tflo,
    save_face_map_png,
    save_mask_png,
    save_png,
    write_tflo,
)
from .metrics import (
    evaluate_dataset,
    load_frame_records,
    load_object_registry,
    report_to_csv,
)
from .pipeline import run_pipeline

log = logging.getLogger("topoflow.cli")

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INVALID = 2


def _setup_logging():
    level = os.environ.get("TOPOFLOW_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _load_bundle(config_path, need_image: bool):
    source, target, options = parse_scene(config_path)
    source_image = None
    if source.image_path is not None:
        source_image = load_image_rgba(source.image_path)
    elif need_image:
        raise InputError(
            "source.image is required for this command (the warping chain "
            "samples real source pixels)"
        )
    texture = None
    if options.get("object_texture"):
        texture = load_image_rgba(options["object_texture"])
    return source, target, options, source_image, texture


def _pipeline_kwargs(options, args):
    return dict(
        atlas_size=args.atlas_size or int(options.get("atlas_size", 1024)),
        threads=args.threads or int(options.get("threads", 1)),
        tile_size=int(options.get("tile_size", 64)),
    )


def _write_manifest(out_dir, config, artifacts, timings, status="ok", error=None):
    manifest = {
        "tool": "topoflow",
        "version": __version__,
        "config": os.fspath(config),
        "out_dir": os.fspath(out_dir),
        "status": status,
        "artifacts": artifacts,
        "timings_ms": {k: round(v, 3) for k, v in timings.items()},
    }
    if error is not None:
        manifest["error"] = error
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def cmd_generate(args) -> int:
    out_dir = args.out
    os.makedirs(out_dir, exist_ok=True)
    t0 = time.perf_counter()
    try:
        source, target, options, source_image, texture = _load_bundle(args.config, True)
        result = run_pipeline(
            source,
            target,
            source_image,
            texture,
            skip_fusion=args.skip_fusion,
            **_pipeline_kwargs(options, args),
        )
    except Exception as exc:
        _write_manifest(out_dir, args.config, {}, {}, status="error", error=str(exc))
        raise

    artifacts = {}

    def emit(name, kind, writer):
        writer(os.path.join(out_dir, name))
        artifacts[name] = kind

    emit("coarse_target.png", "image", lambda p: save_png(p, result.coarse_target))
    emit("flow_us.tflo", "flow", lambda p: write_tflo(p, result.flow_us))
    emit("flow_tu.tflo", "flow", lambda p: write_tflo(p, result.flow_tu))
    emit("flow_ts.tflo", "flow", lambda p: write_tflo(p, result.flow_ts))
    emit("visibility.png", "mask", lambda p: save_mask_png(p, result.visibility))
    emit("topology.tmap", "topology", lambda p: write_tflo(p, result.topology))
    emit("atlas.png", "image", lambda p: save_png(p, result.unified.image))
    if not args.skip_fusion:
        emit("final.png", "image", lambda p: save_png(p, result.final))
        emit("mask_h.png", "mask", lambda p: save_mask_png(p, result.mask_hand))
        emit("mask_f.png", "mask", lambda p: save_mask_png(p, result.mask_foreground))
    if args.dump_intermediate:
        emit("face_source.png", "facemap", lambda p: save_face_map_png(p, result.s_raster.face))
        emit("face_target.png", "facemap", lambda p: save_face_map_png(p, result.t_raster.face))
        emit("face_unified.png", "facemap", lambda p: save_face_map_png(p, result.u_raster.face))
        emit("depth_source.tflo", "depth", lambda p: write_tflo(p, result.s_raster.depth))
        emit("depth_target.tflo", "depth", lambda p: write_tflo(p, result.t_raster.depth))
        emit("atlas_filled.png", "mask", lambda p: save_mask_png(p, result.unified.filled))
        if result.hand_layer is not None:
            emit("hand_layer.png", "image", lambda p: save_png(p, result.hand_layer))
        if result.background_layer is not None:
            emit("background.png", "image", lambda p: save_png(p, result.background_layer))

    timings = dict(result.timings_ms)
    timings["total"] = (time.perf_counter() - t0) * 1000.0
    _write_manifest(out_dir, args.config, artifacts, timings)
    print(f"wrote {len(artifacts)} artifacts + manifest.json to {out_dir}")
    return EXIT_OK


def cmd_raster(args) -> int:
    from .pipeline import build_frame, rasterize_atlas, rasterize_view
    from .atlas import build_scene_atlas

    source, target, options, _, _ = _load_bundle(args.config, False)
    os.makedirs(args.out, exist_ok=True)
    kwargs = _pipeline_kwargs(options, args)
    if args.space == "unified":
        face_uvs, layout = build_scene_atlas(
            source.hand, source.object, atlas_size=kwargs["atlas_size"]
        )
        frame = build_frame(source)
        buffers = rasterize_atlas(
            face_uvs, layout, frame.face_instance,
            tile_size=kwargs["tile_size"], threads=kwargs["threads"],
        )
    else:
        scene = source if args.space == "source" else target
        frame = build_frame(scene)
        buffers, _ = rasterize_view(
            frame, scene.camera, tile_size=kwargs["tile_size"], threads=kwargs["threads"]
        )
    prefix = os.path.join(args.out, args.space)
    save_face_map_png(f"{prefix}_face.png", buffers.face)
    write_tflo(f"{prefix}_depth.tflo", buffers.depth)
    save_mask_png(f"{prefix}_coverage.png", buffers.coverage)
    covered = int(buffers.coverage.sum())
    print(f"{args.space}: {buffers.width}x{buffers.height}, {covered} covered pixels")
    return EXIT_OK


def cmd_atlas(args) -> int:
    from .atlas import build_scene_atlas

    source, _, options, _, _ = _load_bundle(args.config, False)
    os.makedirs(args.out, exist_ok=True)
    atlas_size = args.atlas_size or int(options.get("atlas_size", 1024))
    face_uvs, layout = build_scene_atlas(source.hand, source.object, atlas_size=atlas_size)
    doc = {
        "atlas_size": layout.atlas_size,
        "margin": layout.margin,
        "hand_rect": vars(layout.hand_rect),
        "object_rect": vars(layout.object_rect),
        "hand_grid": vars(layout.hand_grid) if layout.hand_grid else None,
        "object_grid": vars(layout.object_grid) if layout.object_grid else None,
        "faces": len(face_uvs),
    }
    with open(os.path.join(args.out, "atlas_layout.json"), "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    print(f"atlas {layout.atlas_size}px, {len(face_uvs)} face UV triplets")
    return EXIT_OK


def cmd_flow(args) -> int:
    source, target, options, source_image, texture = _load_bundle(args.config, False)
    result = run_pipeline(
        source,
        target,
        source_image
        if source_image is not None
        else np.zeros((source.camera.height, source.camera.width, 4), dtype=np.uint8),
        texture,
        skip_fusion=True,
        **_pipeline_kwargs(options, args),
    )
    os.makedirs(args.out, exist_ok=True)
    write_tflo(os.path.join(args.out, "flow_us.tflo"), result.flow_us)
    write_tflo(os.path.join(args.out, "flow_tu.tflo"), result.flow_tu)
    write_tflo(os.path.join(args.out, "flow_ts.tflo"), result.flow_ts)
    write_tflo(os.path.join(args.out, "topology.tmap"), result.topology)
    save_mask_png(os.path.join(args.out, "visibility.png"), result.visibility)
    print(f"wrote flow fields to {args.out}")
    return EXIT_OK


def cmd_fuse(args) -> int:
    source, target, options, source_image, texture = _load_bundle(args.config, True)
    result = run_pipeline(
        source, target, source_image, texture,
        skip_fusion=False, **_pipeline_kwargs(options, args),
    )
    os.makedirs(args.out, exist_ok=True)
    save_png(os.path.join(args.out, "final.png"), result.final)
    save_mask_png(os.path.join(args.out, "mask_h.png"), result.mask_hand)
    save_mask_png(os.path.join(args.out, "mask_f.png"), result.mask_foreground)
    print(f"wrote fusion outputs to {args.out}")
    return EXIT_OK


def cmd_metrics(args) -> int:
    records = load_frame_records(args.predictions)
    registry = load_object_registry(args.registry)
    report = evaluate_dataset(
        records, registry, pck_max_mm=args.pck_max_mm, pck_steps=args.pck_steps
    )
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(args.out, "table.csv"), "w", encoding="utf-8") as fh:
        fh.write(report_to_csv(report))
    print(
        f"hand AUC {report['hand']['auc']:.1f}  "
        f"PA-MPJPE {report['hand']['pa_mpjpe_mm']:.2f} mm  "
        f"ADD-0.1D avg {report['average_add_01d']:.1f}"
    )
    return EXIT_OK


def _inspect_field(path) -> None:
    kind, data = read_tflo(path)
    h, w, c = data.shape
    finite = np.isfinite(data).all(axis=2)
    frac = 100.0 * finite.mean()
    print(f"kind: {kind}")
    print(f"size: {w}x{h}, channels: {c}")
    print(f"valid: {frac:.1f}%")
    for ch in range(c):
        vals = data[:, :, ch][finite]
        if vals.size:
            print(f"channel {ch}: min {vals.min():.4f}, max {vals.max():.4f}")
        else:
            print(f"channel {ch}: no valid values")


def cmd_inspect(args) -> int:
    path = args.artifact
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    if path.endswith(".png"):
        from PIL import Image

        with Image.open(path) as img:
            arr = np.asarray(img)
        print(f"kind: png ({img.mode})")
        print(f"size: {img.width}x{img.height}")
        print(f"min {arr.min()}, max {arr.max()}")
    else:
        _inspect_field(path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="topoflow",
        description="Occlusion-aware hand-object warping pipeline and metrics",
    )
    parser.add_argument("--version", action="version", version=f"topoflow {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("config", help="scene configuration JSON")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--atlas-size", type=int, default=None)
        p.add_argument("--threads", type=int, default=None)

    p = sub.add_parser("generate", help="run the full warping + fusion chain")
    add_common(p)
    p.add_argument("--skip-fusion", action="store_true")
    p.add_argument("--dump-intermediate", action="store_true")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("raster", help="rasterize one space")
    add_common(p)
    p.add_argument("--space", choices=("source", "target", "unified"), default="source")
    p.set_defaults(func=cmd_raster)

    p = sub.add_parser("atlas", help="build the unified-space layout")
    add_common(p)
    p.set_defaults(func=cmd_atlas)

    p = sub.add_parser("flow", help="compute flow fields and visibility")
    add_common(p)
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("fuse", help="run fusion and write final image + masks")
    add_common(p)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("metrics", help="evaluate pose-preservation metrics")
    p.add_argument("predictions", help="JSONL, one frame per line")
    p.add_argument("registry", help="object registry JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--pck-max-mm", type=float, default=50.0)
    p.add_argument("--pck-steps", type=int, default=100)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("inspect", help="summarize a TFLO/TMAP/PNG artifact")
    p.add_argument("artifact")
    p.set_defaults(func=cmd_inspect)

    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, FileNotFoundError) as exc:
        log.debug("invalid input", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except TopoflowError as exc:
        log.debug("pipeline error", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # pragma: no cover - last resort
        log.exception("unexpected failure")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
