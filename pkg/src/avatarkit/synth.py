"""Synthetic test-case generation and multi-view utilities.

A case deforms the template by a seeded smooth field (random joint motions
plus random anchor offsets diffused by the Laplacian solver), renders its
silhouette and a Lambertian-shaded image under seeded 9-coefficient
lighting, and emits ground-truth 2D joints from the deformed mesh. The
view sweep covers azimuths 0..340 degrees in 20-degree steps at
elevations -10/0/+10.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .camera import fit_camera_to_bbox
from .handles import (
    JOINT_NAMES,
    JointMotion,
    AnchorMotion,
    apply_anchor_stage,
    apply_joint_stage,
    joint_positions,
    select_anchors,
)
from .mesh import TriMesh, mirror_correspondence, vertex_normals
from .raster import rasterize, render_normal_map
from .shading import SHLighting, shade
from .templates import body_template, default_joint_handles

AZIMUTHS_DEG = tuple(range(0, 360, 20))  # 18 values, 0..340
ELEVATIONS_DEG = (-10, 0, 10)


def view_grid():
    """The full (azimuth, elevation) sweep: 54 views."""
    return [(a, e) for e in ELEVATIONS_DEG for a in AZIMUTHS_DEG]


def rotation_matrix(azimuth_deg, elevation_deg):
    """Azimuth about the vertical (y) axis, then elevation about x."""
    a = np.deg2rad(azimuth_deg)
    e = np.deg2rad(elevation_deg)
    ry = np.array(
        [[np.cos(a), 0.0, np.sin(a)], [0.0, 1.0, 0.0], [-np.sin(a), 0.0, np.cos(a)]]
    )
    rx = np.array(
        [[1.0, 0.0, 0.0], [0.0, np.cos(e), -np.sin(e)], [0.0, np.sin(e), np.cos(e)]]
    )
    return rx @ ry


def rotate_mesh(mesh, azimuth_deg, elevation_deg):
    r = rotation_matrix(azimuth_deg, elevation_deg)
    return mesh.with_vertices(mesh.vertices @ r.T)


@dataclass(frozen=True)
class DeformSpec:
    """Magnitudes of the seeded ground-truth deformation."""

    joint_px_sigma: float = 5.0
    anchor_sigma_m: float = 0.02
    anchor_participation: float = 0.5
    joint_weight: float = 10.0
    anchor_weight: float = 1.0


@dataclass(frozen=True)
class SynthCase:
    """One synthetic reconstruction problem with full ground truth."""

    initial_mesh: TriMesh  # view-frame template, the recovery starting point
    gt_mesh: TriMesh
    camera: object
    gt_mask: object
    gt_joints: dict  # name -> (x, y) pixels
    image: np.ndarray  # (H, W) luminance in [0, 1]
    lighting: SHLighting
    handles: object
    anchors: object
    symmetry: object
    albedo: float
    azimuth_deg: float
    elevation_deg: float
    seed: int


def seeded_lighting(rng):
    """Ambient-dominant random SH coefficients giving positive shading."""
    coeffs = np.zeros(9)
    coeffs[0] = 2.2 + 0.4 * rng.random()
    coeffs[1:4] = rng.normal(0.0, 0.25, 3)
    coeffs[4:] = rng.normal(0.0, 0.10, 5)
    return SHLighting(coeffs)


def shade_image(camera, mesh, lighting, albedo=0.8, raster=None):
    """Lambertian luminance render; background is 0."""
    normals = render_normal_map(camera, mesh, raster=raster)
    fg = np.isfinite(normals).all(axis=-1)
    img = np.zeros(fg.shape)
    if fg.any():
        img[fg] = np.clip(albedo * shade(lighting, normals[fg]), 0.0, 1.0)
    return img


def make_synthetic_case(
    template=None,
    deform=DeformSpec(),
    azimuth_deg=0.0,
    elevation_deg=0.0,
    seed=0,
    image_size=(224, 224),
    handles=None,
    anchors=None,
    k_anchors=200,
    albedo=0.8,
):
    """Build one seeded synthetic case; identical seeds give identical cases."""
    if template is None:
        template = body_template()
    if handles is None:
        handles = default_joint_handles(template)
    if anchors is None:
        anchors = select_anchors(template, k=min(k_anchors, template.n_vertices // 3), seed=seed)
    symmetry = mirror_correspondence(template, "x", tolerance=1e-6)

    rng = np.random.default_rng(seed)
    initial = rotate_mesh(template, azimuth_deg, elevation_deg)
    camera = fit_camera_to_bbox(initial.vertices, image_size)

    gt = initial
    if deform.joint_px_sigma > 0:
        motion = JointMotion(rng.normal(0.0, deform.joint_px_sigma, (len(JOINT_NAMES), 2)))
        gt = apply_joint_stage(gt, handles, camera, motion, weight=deform.joint_weight)
    if deform.anchor_sigma_m > 0:
        offsets = rng.normal(0.0, deform.anchor_sigma_m, len(anchors.vertex_indices))
        offsets = np.clip(offsets, -0.08, 0.08)
        part = rng.random(len(offsets)) < deform.anchor_participation
        if part.any():
            gt = apply_anchor_stage(
                gt, anchors, camera, AnchorMotion(offsets, part), weight=deform.anchor_weight
            )

    raster = rasterize(camera, gt)
    lighting = seeded_lighting(rng)
    image = shade_image(camera, gt, lighting, albedo=albedo, raster=raster)
    gt_j = joint_positions(gt, handles, camera)
    gt_joints = {name: tuple(gt_j[i]) for i, name in enumerate(JOINT_NAMES)}
    return SynthCase(
        initial_mesh=initial,
        gt_mesh=gt,
        camera=camera,
        gt_mask=raster.mask,
        gt_joints=gt_joints,
        image=image,
        lighting=lighting,
        handles=handles,
        anchors=anchors,
        symmetry=symmetry,
        albedo=albedo,
        azimuth_deg=azimuth_deg,
        elevation_deg=elevation_deg,
        seed=seed,
    )


_SIX_VIEWS = (
    (0.0, 0.0, 1),  # +z
    (0.0, 0.0, -1),  # -z
    ("x", None, 1),  # +x
    ("x", None, -1),  # -x
    ("y", None, 1),  # +y
    ("y", None, -1),  # -y
)


def remove_inner_surface(mesh, resolution=512):
    """Drop faces invisible from all 6 axis-aligned orthogonal views.

    Each view uses the rasterizer's face visibility at the given
    resolution; unreferenced vertices are pruned afterwards.
    """
    rot_x = np.array([[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]])  # x -> z
    rot_y = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, -1.0, 0.0]])  # y -> z
    keep = np.zeros(mesh.n_faces, dtype=bool)
    for axis, _, sign in _SIX_VIEWS:
        if axis == "x":
            v = mesh.vertices @ rot_x.T
        elif axis == "y":
            v = mesh.vertices @ rot_y.T
        else:
            v = mesh.vertices
        m = mesh.with_vertices(v)
        cam = fit_camera_to_bbox(v, (resolution, resolution), depth_sign=sign)
        keep |= rasterize(cam, m).face_visible
    faces = mesh.faces[keep]
    used = np.unique(faces)
    remap = np.full(mesh.n_vertices, -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    new_tags = None
    if mesh.tags:
        new_tags = {}
        for label, idx in mesh.tags.items():
            kept = remap[np.asarray(idx, dtype=np.int64)]
            new_tags[label] = kept[kept >= 0]
    uv = mesh.uv[keep] if mesh.uv is not None else None
    return TriMesh(mesh.vertices[used], remap[faces], uv=uv, tags=new_tags)
