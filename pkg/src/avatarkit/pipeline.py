"""End-to-end orchestration: joint -> anchor -> subdivide -> vertex -> texture.

Each executed stage persists its mesh snapshot, masks and metrics so runs
can be inspected or resumed after an abort; runs are deterministic for a
fixed configuration and seed.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .camera import WeakPerspectiveCamera, fit_camera_to_bbox
from .errors import ConfigError, StageError
from .handles import (
    JOINT_NAMES,
    AnchorConfig,
    AnchorSet,
    JointHandleSet,
    apply_anchor_stage,
    apply_joint_stage,
    joint_positions,
    oracle_anchor_motion,
    oracle_joint_motion,
    select_anchors,
)
from .io_formats import (
    load_image_png,
    load_mask_png,
    save_depth_png,
    save_float_grid,
    save_image_png,
    save_mask_png,
)
from .mesh import SymmetryMap, load_mesh, save_mesh, subdivide_1to4
from .metrics import evaluate
from .raster import BinaryMask, rasterize, render_normal_map
from .shading import (
    AlbedoMap,
    RefineConfig,
    depth_to_vertex_displacement,
    estimate_albedo,
    estimate_lighting,
    magnify_details,
    refine_depth,
)
from .texture import (
    CompleteConfig,
    complete_texture,
    project_visible_texture,
    uv_symmetry_from_mesh,
    _bilinear_many,
)

STAGES = ("initial", "joint", "anchor", "vertex", "texture")


@dataclass
class PipelineConfig:
    # inputs (file mode; in-memory mode passes a SynthCase instead)
    image_path: str = None
    initial_mesh_path: str = None
    joints_path: str = None
    silhouette_path: str = None
    gt_mesh_path: str = None
    joint_handles_path: str = None
    anchors_path: str = None
    symmetry_path: str = None
    tags_path: str = None
    output_dir: str = "out"
    # camera (fitted from the mesh bounding box when scale is None)
    camera_scale: float = None
    camera_tx: float = 0.0
    camera_ty: float = 0.0
    image_width: int = 224
    image_height: int = 224
    # stage toggles
    run_joint: bool = True
    run_anchor: bool = True
    run_vertex: bool = True
    run_texture: bool = True
    # handle-stage parameters
    joint_weight: float = 10.0
    anchor_weight: float = 1.0
    joint_iters: int = 2
    anchor_iters: int = 3
    k_anchors: int = 200
    normal_weight: float = 0.1
    max_search_px: float = 40.0
    contour_band_px: float = 12.0
    exclusion_distance_m: float = 0.1
    # vertex-stage parameters
    lambda_photo: float = 1.0
    lambda_data: float = 5.0
    lambda_smooth: float = 2.0
    beta: float = 10.0
    ridge: float = 1e-8
    refine_max_iter: int = 200
    # texture parameters
    texture_width: int = 256
    texture_height: int = 256
    symmetry_preference: bool = True
    seed: int = 0

    def anchor_config(self):
        return AnchorConfig(
            max_search_px=self.max_search_px,
            contour_band_px=self.contour_band_px,
            exclusion_distance_m=self.exclusion_distance_m,
        )

    def refine_config(self):
        return RefineConfig(
            lambda_photo=self.lambda_photo,
            lambda_data=self.lambda_data,
            lambda_smooth=self.lambda_smooth,
            beta=self.beta,
            ridge=self.ridge,
            max_iter=self.refine_max_iter,
        )


@dataclass
class StageRecord:
    stage: str
    mesh_path: str
    metrics: object
    wall_time: float


CONFIG_KEYS = {f.name for f in fields(PipelineConfig)}


def load_config_file(path):
    """Parse the documented `key = value` config format into a PipelineConfig."""
    cfg = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in CONFIG_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                cfg[key] = json.loads(value)
            except json.JSONDecodeError:
                cfg[key] = value
    return PipelineConfig(**cfg)


def _require(path, what):
    if path is None or not os.path.exists(path):
        raise ConfigError(f"missing {what}: {path!r}")
    return path


def _luminance(image):
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 3:
        return img @ np.array([0.299, 0.587, 0.114])
    return img


def run_pipeline(config, case=None):
    """Run the enabled stages in order; returns the list of StageRecords.

    In file mode all inputs come from the configured paths; passing a
    SynthCase runs the same pipeline on in-memory ground truth.
    """
    out_dir = config.output_dir
    os.makedirs(out_dir, exist_ok=True)
    records = []

    # -------- gather inputs --------
    if case is not None:
        mesh = case.initial_mesh
        camera = case.camera
        gt_mask = case.gt_mask
        gt_joints = case.gt_joints
        image = case.image
        gt_mesh = case.gt_mesh
        handles = case.handles
        anchors = case.anchors
        symmetry = case.symmetry
    else:
        mesh = load_mesh(
            _require(config.initial_mesh_path, "initial mesh"), tags_path=config.tags_path
        )
        image = None
        if config.image_path:
            image = load_image_png(_require(config.image_path, "image"))
        gt_mask = None
        if config.silhouette_path:
            gt_mask = BinaryMask(load_mask_png(_require(config.silhouette_path, "silhouette")))
        elif config.run_anchor:
            raise ConfigError(
                f"anchor stage enabled but silhouette file missing: {config.silhouette_path!r}"
            )
        gt_joints = None
        if config.joints_path:
            with open(_require(config.joints_path, "joints JSON")) as fh:
                raw = json.load(fh)
            gt_joints = {e["name"]: (e["x"], e["y"]) for e in raw}
            missing = [n for n in JOINT_NAMES if n not in gt_joints]
            if missing:
                raise ConfigError(
                    f"joints file {config.joints_path} is missing joints: {missing}"
                )
        elif config.run_joint:
            raise ConfigError(f"joint stage enabled but joints file missing: {config.joints_path!r}")
        gt_mesh = load_mesh(config.gt_mesh_path) if config.gt_mesh_path else None
        size = (config.image_width, config.image_height)
        if config.camera_scale is not None:
            camera = WeakPerspectiveCamera(
                config.camera_scale, (config.camera_tx, config.camera_ty), size
            )
        else:
            camera = fit_camera_to_bbox(mesh.vertices, size)
        handles = (
            JointHandleSet.from_json(config.joint_handles_path)
            if config.joint_handles_path
            else None
        )
        anchors = AnchorSet.from_json(config.anchors_path) if config.anchors_path else None
        symmetry = SymmetryMap.from_json(config.symmetry_path) if config.symmetry_path else None

    if config.run_anchor and anchors is None:
        anchors = select_anchors(
            mesh, k=config.k_anchors, normal_weight=config.normal_weight, seed=config.seed
        )
    if config.run_joint and handles is None:
        raise ConfigError("joint stage enabled but no joint handle asset provided")

    def record(stage, current_mesh):
        t0 = time.perf_counter()
        snap = os.path.join(out_dir, f"{stage}_mesh.obj")
        save_mesh(snap, current_mesh)
        raster = rasterize(camera, current_mesh)
        save_mask_png(os.path.join(out_dir, f"{stage}_mask.png"), raster.mask.bits)
        pred_j = (
            joint_positions(current_mesh, handles, camera) if handles is not None else None
        )
        gt_j = (
            np.asarray([gt_joints[n] for n in JOINT_NAMES]) if gt_joints is not None else None
        )
        rep = evaluate(
            current_mesh,
            camera,
            gt_mask=gt_mask,
            gt_mesh=gt_mesh,
            pred_joints=pred_j,
            gt_joints=gt_j,
        )
        rep.to_json(os.path.join(out_dir, f"{stage}_metrics.json"))
        rec = StageRecord(stage, snap, rep, time.perf_counter() - t0)
        records.append(rec)
        return rec

    record("initial", mesh)

    if config.run_joint:
        try:
            for _ in range(config.joint_iters):
                motion = oracle_joint_motion(mesh, handles, camera, gt_joints)
                mesh = apply_joint_stage(mesh, handles, camera, motion, config.joint_weight)
        except Exception as exc:
            raise StageError("joint", exc) from exc
        record("joint", mesh)

    if config.run_anchor:
        try:
            acfg = config.anchor_config()
            for _ in range(config.anchor_iters):
                motion = oracle_anchor_motion(mesh, anchors, camera, gt_mask, acfg)
                if not motion.participating.any():
                    break
                mesh = apply_anchor_stage(mesh, anchors, camera, motion, config.anchor_weight)
        except Exception as exc:
            raise StageError("anchor", exc) from exc
        record("anchor", mesh)

    if config.run_vertex:
        try:
            if image is None:
                raise ConfigError("vertex stage needs an image")
            lum = _luminance(image)
            mesh = subdivide_1to4(mesh)
            raster = rasterize(camera, mesh)
            normals = render_normal_map(camera, mesh, raster=raster)
            fg = raster.mask.bits
            rcfg = config.refine_config()
            bootstrap = estimate_lighting(lum, np.ones_like(lum), normals, fg, ridge=rcfg.ridge)
            albedo = estimate_albedo(lum, normals, fg, bootstrap)
            lighting = estimate_lighting(lum, albedo, normals, fg, ridge=rcfg.ridge)
            lighting.to_json(os.path.join(out_dir, "lighting.json"))
            refined = refine_depth(raster.depth, lum, albedo, lighting, fg, camera, rcfg)
            target = magnify_details(raster.depth, refined, rcfg.beta)
            save_float_grid(os.path.join(out_dir, "vertex_depth.bin"), target.values)
            save_depth_png(os.path.join(out_dir, "vertex_depth.png"), target.values)
            mesh, _skipped = depth_to_vertex_displacement(
                mesh, camera, target, raster.face_visible
            )
        except StageError:
            raise
        except Exception as exc:
            raise StageError("vertex", exc) from exc
        record("vertex", mesh)

    if config.run_texture:
        try:
            if image is None:
                raise ConfigError("texture stage needs an image")
            raster = rasterize(camera, mesh)
            tsize = (config.texture_width, config.texture_height)
            partial, uv_mask, _info = project_visible_texture(
                mesh, camera, image, raster.face_visible, size=tsize
            )
            uv_sym = (
                uv_symmetry_from_mesh(mesh, symmetry, tsize) if symmetry is not None else None
            )
            complete = complete_texture(
                partial,
                uv_mask,
                uv_sym,
                CompleteConfig(symmetry_preference=config.symmetry_preference),
            )
            save_image_png(os.path.join(out_dir, "texture_partial.png"), partial.values)
            save_mask_png(os.path.join(out_dir, "texture_mask.png"), uv_mask.bits)
            save_image_png(os.path.join(out_dir, "texture_complete.png"), complete.values)
        except StageError:
            raise
        except Exception as exc:
            raise StageError("texture", exc) from exc
        record("texture", mesh)

    return records


def render_textured(mesh, camera, texture):
    """Re-render the textured mesh from the given camera; background black."""
    raster = rasterize(camera, mesh)
    w, h = camera.image_size
    out = np.zeros((h, w, 3))
    if raster.empty or mesh.uv is None:
        return out
    uvs = mesh.uv[raster.pixel_face]  # (N, 3, 2)
    uv = np.einsum("nc,ncd->nd", raster.pixel_bary, uvs)
    tw, th = texture.size
    xs = np.clip(uv[:, 0] * (tw - 1), 0, tw - 1)
    ys = np.clip(uv[:, 1] * (th - 1), 0, th - 1)
    vals = _bilinear_many(texture.values, xs, ys)
    out[raster.pixel_xy[:, 1], raster.pixel_xy[:, 0]] = vals
    return out
