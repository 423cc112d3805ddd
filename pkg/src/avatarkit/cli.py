"""Batch command-line interface.

Subcommands:
  recover  run the full pipeline (or an enabled subset) on one case
  stage    run a single named stage on a mesh snapshot
  texture  project + complete a UV texture for a mesh/image pair
  eval     compare a predicted mesh against ground truth
  synth    generate a seeded synthetic case to disk
  render   re-render a textured mesh from its camera

Exit codes: 0 success, 2 configuration error, 3 stage failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np

from .camera import WeakPerspectiveCamera
from .errors import AvatarKitError, ConfigError, StageError
from .io_formats import load_image_png, load_mask_png, save_image_png, save_mask_png
from .mesh import load_mesh, save_mesh
from .metrics import evaluate
from .pipeline import (
    STAGES,
    PipelineConfig,
    load_config_file,
    render_textured,
    run_pipeline,
)
from .raster import BinaryMask, rasterize
from .synth import make_synthetic_case
from .texture import UVTexture


def _pipeline_config(args):
    if args.config:
        cfg = load_config_file(args.config)
    else:
        cfg = PipelineConfig()
    overrides = {}
    for key in ("output_dir", "seed"):
        val = getattr(args, key, None)
        if val is not None:
            overrides[key] = val
    env_out = os.environ.get("AVATARKIT_OUT")
    if env_out and "output_dir" not in overrides:
        overrides["output_dir"] = env_out
    return replace(cfg, **overrides) if overrides else cfg


def _cmd_recover(args):
    cfg = _pipeline_config(args)
    if args.stages:
        wanted = set(args.stages.split(","))
        unknown = wanted - set(STAGES)
        if unknown:
            raise ConfigError(f"unknown stages: {sorted(unknown)}")
        cfg = replace(
            cfg,
            run_joint="joint" in wanted,
            run_anchor="anchor" in wanted,
            run_vertex="vertex" in wanted,
            run_texture="texture" in wanted,
        )
    records = run_pipeline(cfg)
    for rec in records:
        iou = rec.metrics.sil_iou
        print(f"{rec.stage}: mesh={rec.mesh_path}" + (f" IoU={iou:.4f}" if iou is not None else ""))
    return 0


def _cmd_stage(args):
    cfg = _pipeline_config(args)
    if args.name not in ("joint", "anchor", "vertex", "texture"):
        raise ConfigError(f"unknown stage {args.name!r}")
    cfg = replace(
        cfg,
        run_joint=args.name == "joint",
        run_anchor=args.name == "anchor",
        run_vertex=args.name == "vertex",
        run_texture=args.name == "texture",
        initial_mesh_path=args.mesh or cfg.initial_mesh_path,
    )
    records = run_pipeline(cfg)
    print(f"{args.name}: mesh={records[-1].mesh_path}")
    return 0


def _cmd_texture(args):
    cfg = _pipeline_config(args)
    cfg = replace(
        cfg,
        run_joint=False,
        run_anchor=False,
        run_vertex=False,
        run_texture=True,
        initial_mesh_path=args.mesh,
        image_path=args.image,
    )
    run_pipeline(cfg)
    print(f"texture: {os.path.join(cfg.output_dir, 'texture_complete.png')}")
    return 0


def _cmd_eval(args):
    pred = load_mesh(args.pred)
    gt_mesh = load_mesh(args.gt_mesh) if args.gt_mesh else None
    gt_mask = BinaryMask(load_mask_png(args.gt_mask)) if args.gt_mask else None
    camera = WeakPerspectiveCamera(
        args.scale, (args.tx, args.ty), (args.width, args.height)
    )
    report = evaluate(pred, camera, gt_mask=gt_mask, gt_mesh=gt_mesh)
    text = json.dumps(report.to_dict(), indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return 0


def _cmd_synth(args):
    case = make_synthetic_case(
        azimuth_deg=args.azimuth, elevation_deg=args.elevation, seed=args.seed
    )
    out = args.output_dir
    os.makedirs(out, exist_ok=True)
    save_mesh(os.path.join(out, "initial_mesh.obj"), case.initial_mesh)
    save_mesh(os.path.join(out, "gt_mesh.obj"), case.gt_mesh)
    save_mask_png(os.path.join(out, "silhouette.png"), case.gt_mask.bits)
    save_image_png(os.path.join(out, "image.png"), case.image)
    case.handles.to_json(os.path.join(out, "joint_handles.json"))
    case.anchors.to_json(os.path.join(out, "anchors.json"))
    case.symmetry.to_json(os.path.join(out, "symmetry.json"))
    cam = case.camera
    with open(os.path.join(out, "camera.json"), "w") as fh:
        json.dump(
            {
                "scale": cam.scale,
                "translation": list(cam.translation),
                "image_size": list(cam.image_size),
                "depth_sign": cam.depth_sign,
            },
            fh,
            indent=2,
            sort_keys=True,
        )
    joints = [
        {"name": name, "x": xy[0], "y": xy[1]} for name, xy in case.gt_joints.items()
    ]
    with open(os.path.join(out, "joints.json"), "w") as fh:
        json.dump(joints, fh, indent=2, sort_keys=True)
    print(f"synth: wrote case (seed={args.seed}) to {out}")
    return 0


def _cmd_render(args):
    mesh = load_mesh(args.mesh)
    texture = UVTexture(load_image_png(args.texture))
    camera = WeakPerspectiveCamera(
        args.scale, (args.tx, args.ty), (args.width, args.height)
    )
    img = render_textured(mesh, camera, texture)
    save_image_png(args.out, img)
    print(f"render: {args.out}")
    return 0


def _add_camera_args(p):
    p.add_argument("--scale", type=float, required=True, help="pixels per meter")
    p.add_argument("--tx", type=float, default=0.0)
    p.add_argument("--ty", type=float, default=0.0)
    p.add_argument("--width", type=int, default=224)
    p.add_argument("--height", type=int, default=224)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="avatarkit", description="Single-image body mesh recovery toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("recover", help="run the recovery pipeline")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--stages", help="comma list of stages to run")
    p.add_argument("--output-dir", dest="output_dir")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_recover)

    p = sub.add_parser("stage", help="run one stage")
    p.add_argument("name", choices=["joint", "anchor", "vertex", "texture"])
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--mesh", help="input mesh snapshot (overrides config)")
    p.add_argument("--output-dir", dest="output_dir")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_stage)

    p = sub.add_parser("texture", help="project and complete a UV texture")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--mesh", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--output-dir", dest="output_dir")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_texture)

    p = sub.add_parser("eval", help="evaluate a predicted mesh")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt-mesh", dest="gt_mesh")
    p.add_argument("--gt-mask", dest="gt_mask")
    p.add_argument("--out", help="write the metrics JSON here as well")
    _add_camera_args(p)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("synth", help="generate a synthetic case")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--azimuth", type=float, default=0.0)
    p.add_argument("--elevation", type=float, default=0.0)
    p.add_argument("--output-dir", dest="output_dir", default="synth_out")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("render", help="re-render a textured mesh")
    p.add_argument("--mesh", required=True)
    p.add_argument("--texture", required=True)
    p.add_argument("--out", required=True)
    _add_camera_args(p)
    p.set_defaults(func=_cmd_render)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"stage failure: {exc}", file=sys.stderr)
        return 3
    except AvatarKitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
