"""Handle definitions and the joint/anchor fitting stages.

Joint handles are 10 named vertex sets whose projected centroids define
body-joint pixel positions. Anchor handles are 200 K-means-selected
vertices that may move only along their surface normals, driven by the
signed distance from the rendered silhouette to the target silhouette.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.spatial.distance import cdist

from .camera import project
from .deform import DeformProblem, pixel_constraint, point_constraint, solve_deform
from .errors import (
    AnnotationError,
    EmptySelectionError,
    OutOfFrameError,
    ParameterError,
)
from .mesh import vertex_normals
from .raster import rasterize

JOINT_NAMES = (
    "head",
    "waist",
    "l_shoulder",
    "r_shoulder",
    "l_elbow",
    "r_elbow",
    "l_knee",
    "r_knee",
    "l_ankle",
    "r_ankle",
)


@dataclass(frozen=True)
class JointHandleSet:
    """Ordered mapping of the 10 joint names to template vertex index sets."""

    joints: dict  # name -> int array

    def __post_init__(self):
        if tuple(self.joints.keys()) != JOINT_NAMES:
            raise ParameterError(
                f"expected the 10 joints {JOINT_NAMES} in order, got "
                f"{tuple(self.joints.keys())}"
            )
        seen = set()
        clean = {}
        for name, idx in self.joints.items():
            arr = np.asarray(idx, dtype=np.int64).reshape(-1)
            if arr.size == 0:
                raise ParameterError(f"joint {name!r} has an empty handle set")
            overlap = seen.intersection(arr.tolist())
            if overlap:
                raise ParameterError(f"joint {name!r} shares vertices {sorted(overlap)[:5]}")
            seen.update(arr.tolist())
            clean[name] = arr
        object.__setattr__(self, "joints", clean)

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump({k: v.tolist() for k, v in self.joints.items()}, fh)

    @staticmethod
    def from_json(path):
        with open(path) as fh:
            raw = json.load(fh)
        return JointHandleSet({name: np.asarray(raw[name]) for name in JOINT_NAMES})


@dataclass(frozen=True)
class JointMotion:
    """Per-joint 2D pixel motion vectors, in JOINT_NAMES order."""

    vectors: np.ndarray  # (10, 2)

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.float64)
        if v.shape != (len(JOINT_NAMES), 2):
            raise AnnotationError(f"need one 2D vector per joint, got {v.shape}")
        object.__setattr__(self, "vectors", v)


@dataclass(frozen=True)
class AnchorSet:
    """K-means-selected anchor vertices plus the clustered features for audit."""

    vertex_indices: np.ndarray  # (k,)
    features: np.ndarray = None  # (n_eligible, 6) audit copy

    def __post_init__(self):
        idx = np.asarray(self.vertex_indices, dtype=np.int64).reshape(-1)
        if len(np.unique(idx)) != len(idx):
            raise ParameterError("anchor indices must be distinct")
        object.__setattr__(self, "vertex_indices", idx)

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump({"anchors": self.vertex_indices.tolist()}, fh)

    @staticmethod
    def from_json(path):
        with open(path) as fh:
            raw = json.load(fh)
        return AnchorSet(np.asarray(raw["anchors"]))


@dataclass(frozen=True)
class AnchorMotion:
    """Per-anchor signed offset (meters) along the vertex normal."""

    offsets: np.ndarray  # (k,) meters
    participating: np.ndarray  # (k,) bool

    def __post_init__(self):
        object.__setattr__(self, "offsets", np.asarray(self.offsets, dtype=np.float64))
        object.__setattr__(self, "participating", np.asarray(self.participating, dtype=bool))


@dataclass(frozen=True)
class AnchorConfig:
    max_search_px: float = 40.0
    contour_band_px: float = 12.0
    exclusion_distance_m: float = 0.1  # internal-anchor cutoff
    normal_projection_min: float = 0.1
    step_px: float = 0.25


def select_anchors(mesh, k=200, normal_weight=0.1, excluded_labels=("face", "fingers", "toes"), seed=0):
    """Pick k anchor vertices by K-means over [position ; w * normal] features.

    Uses k-means++ seeding from the given seed and Lloyd iterations to an
    assignment fixpoint (at most 100 rounds). Empty clusters are re-seeded
    deterministically at the feature farthest from its current centroid.
    Per cluster the eligible vertex nearest the centroid is returned.
    """
    excluded = mesh.tagged(excluded_labels)
    eligible = np.setdiff1d(np.arange(mesh.n_vertices), excluded)
    if k > len(eligible):
        raise ParameterError(f"k={k} exceeds {len(eligible)} eligible vertices")
    normals = vertex_normals(mesh)
    feats = np.hstack([mesh.vertices[eligible], normal_weight * normals[eligible]])

    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp(feats, k, rng)
    assign = np.zeros(len(feats), dtype=np.int64)
    for _ in range(100):
        d = cdist(feats, centroids)
        new_assign = np.argmin(d, axis=1)
        # deterministic re-seed of empty clusters
        counts = np.bincount(new_assign, minlength=k)
        for empty in np.flatnonzero(counts == 0):
            far = int(np.argmax(d[np.arange(len(feats)), new_assign]))
            new_assign[far] = empty
            counts = np.bincount(new_assign, minlength=k)
        if np.array_equal(new_assign, assign) and _ > 0:
            break
        assign = new_assign
        for c in range(k):
            members = feats[assign == c]
            if len(members):
                centroids[c] = members.mean(axis=0)

    d = cdist(feats, centroids)
    chosen = []
    taken = set()
    for c in range(k):
        order = np.argsort(d[:, c], kind="stable")
        for cand in order:
            vid = int(eligible[cand])
            if vid not in taken:
                taken.add(vid)
                chosen.append(vid)
                break
    return AnchorSet(np.asarray(chosen, dtype=np.int64), features=feats)


def _kmeans_pp(feats, k, rng):
    n = len(feats)
    centroids = np.empty((k, feats.shape[1]))
    first = int(rng.integers(n))
    centroids[0] = feats[first]
    d2 = np.sum((feats - centroids[0]) ** 2, axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total <= 0:
            centroids[c] = feats[int(rng.integers(n))]
            continue
        probs = d2 / total
        pick = int(rng.choice(n, p=probs))
        centroids[c] = feats[pick]
        d2 = np.minimum(d2, np.sum((feats - centroids[c]) ** 2, axis=1))
    return centroids


def joint_positions(mesh, handles, camera):
    """Projected 3D centroid of each joint's handle vertices, (10, 2) pixels."""
    out = np.empty((len(JOINT_NAMES), 2))
    for j, name in enumerate(JOINT_NAMES):
        centroid = mesh.vertices[handles.joints[name]].mean(axis=0)
        out[j] = camera.project(centroid)
    return out


def oracle_joint_motion(mesh, handles, camera, gt_joints):
    """Ground-truth joint motion: annotated pixel minus projected centroid.

    `gt_joints` maps joint name -> (x, y) pixels; all 10 must be present.
    """
    missing = [n for n in JOINT_NAMES if n not in gt_joints]
    if missing:
        raise AnnotationError(f"missing joint annotations: {missing}")
    current = joint_positions(mesh, handles, camera)
    gt = np.asarray([gt_joints[n] for n in JOINT_NAMES], dtype=np.float64)
    return JointMotion(gt - current)


def apply_joint_stage(mesh, handles, camera, motion, weight=10.0):
    """Deform with 2D targets: every handle vertex moves by its joint's vector."""
    constraints = []
    proj = camera.project(mesh.vertices)
    for j, name in enumerate(JOINT_NAMES):
        vec = motion.vectors[j]
        for vid in handles.joints[name]:
            constraints.append(pixel_constraint(vid, proj[vid] + vec, weight))
    return solve_deform(DeformProblem(mesh, constraints, camera))


def silhouette_normal_distance(anchor_pixel, normal_2d, gt_mask, max_search=40.0, step=0.25):
    """Signed pixel distance to the nearest mask boundary along a 2D ray.

    Walks anchor_pixel + d * normal_2d for d in [-max_search, +max_search]
    at `step` sub-pixel increments and returns the signed d of the nearest
    inside/outside transition (positive along +normal_2d), or None when no
    crossing lies within range. Samples outside the image count as
    background.
    """
    px = np.asarray(anchor_pixel, dtype=np.float64)
    h, w = gt_mask.bits.shape
    if not (0 <= px[0] < w and 0 <= px[1] < h):
        raise OutOfFrameError(f"anchor pixel {px.tolist()} outside {w}x{h} image")
    n2 = np.asarray(normal_2d, dtype=np.float64)
    ds = np.arange(-max_search, max_search + step / 2, step)
    pts = px[None, :] + ds[:, None] * n2[None, :]
    # round half-up (not banker's) so the transition midpoint stays within
    # half a pixel of the true boundary
    xi = np.floor(pts[:, 0] + 0.5).astype(np.int64)
    yi = np.floor(pts[:, 1] + 0.5).astype(np.int64)
    inframe = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
    vals = np.zeros(len(ds), dtype=bool)
    vals[inframe] = gt_mask.bits[yi[inframe], xi[inframe]]
    change = vals[1:] != vals[:-1]
    if not change.any():
        return None
    mids = 0.5 * (ds[1:] + ds[:-1])
    candidates = mids[change]
    return float(candidates[np.argmin(np.abs(candidates))])


def _boundary_distance(mask_bits):
    """Per-pixel Euclidean distance to the silhouette contour."""
    inside = ndimage.distance_transform_edt(mask_bits)
    outside = ndimage.distance_transform_edt(~mask_bits)
    return np.where(mask_bits, inside, outside)


def oracle_anchor_motion(mesh, anchors, camera, gt_mask, config=AnchorConfig(), raster=None):
    """Per-anchor normal offsets from silhouette discrepancy, with exclusions.

    The offset is the signed gap, along the anchor's image-plane normal,
    between the mesh's own rendered silhouette boundary and the target
    boundary (so a self-fit is exactly zero). An anchor does not
    participate when (a) its converted offset exceeds the internal-anchor
    cutoff, (b) no boundary crossing is found on either silhouette, (c)
    its projection is farther than the contour band from the mesh's own
    rendered silhouette boundary, or (d) its image-plane normal direction
    is degenerate.
    """
    if raster is None:
        raster = rasterize(camera, mesh)
    own_mask = raster.mask
    own_boundary = _boundary_distance(own_mask.bits)
    normals = vertex_normals(mesh)
    idx = anchors.vertex_indices
    proj = camera.project(mesh.vertices[idx])
    h, w = gt_mask.bits.shape
    offsets = np.zeros(len(idx))
    part = np.zeros(len(idx), dtype=bool)
    for a, vid in enumerate(idx):
        n3 = normals[vid]
        n_xy = n3[:2]
        norm_xy = np.linalg.norm(n_xy)
        if norm_xy < config.normal_projection_min:
            continue
        px = proj[a]
        xi, yi = int(round(px[0])), int(round(px[1]))
        if not (0 <= xi < w and 0 <= yi < h):
            continue
        if own_boundary[yi, xi] > config.contour_band_px:
            continue
        ray = n_xy / norm_xy
        d_gt = silhouette_normal_distance(
            px, ray, gt_mask, config.max_search_px, config.step_px
        )
        if d_gt is None:
            continue
        d_own = silhouette_normal_distance(
            px, ray, own_mask, config.max_search_px, config.step_px
        )
        if d_own is None:
            continue
        offset = (d_gt - d_own) / camera.scale
        if abs(offset) > config.exclusion_distance_m:
            continue
        offsets[a] = offset
        part[a] = True
    return AnchorMotion(offsets, part)


def apply_anchor_stage(mesh, anchors, camera, motion, weight=1.0):
    """Deform with 3D targets v + offset * normal for participating anchors."""
    if not motion.participating.any():
        raise EmptySelectionError("every anchor was excluded; nothing to fit")
    normals = vertex_normals(mesh)
    constraints = []
    for a, vid in enumerate(anchors.vertex_indices):
        if not motion.participating[a]:
            continue
        target = mesh.vertices[vid] + motion.offsets[a] * normals[vid]
        constraints.append(point_constraint(vid, target, weight))
    return solve_deform(DeformProblem(mesh, constraints, camera))


def crop_windows(image, handle_pixels, window):
    """Axis-aligned crops centered at rounded handle pixels, zero-padded.

    Exposed for external learned predictors; `window` must be even.
    """
    if window % 2 != 0:
        raise ParameterError(f"window must be even, got {window}")
    img = np.asarray(image, dtype=np.float64)
    h, w = img.shape[:2]
    half = window // 2
    out = []
    for px in np.atleast_2d(np.asarray(handle_pixels, dtype=np.float64)):
        cx, cy = int(round(px[0])), int(round(px[1]))
        patch_shape = (window, window) + img.shape[2:]
        patch = np.zeros(patch_shape, dtype=img.dtype)
        x0, x1 = cx - half, cx + half
        y0, y1 = cy - half, cy + half
        sx0, sx1 = max(x0, 0), min(x1, w)
        sy0, sy1 = max(y0, 0), min(y1, h)
        if sx0 < sx1 and sy0 < sy1:
            patch[sy0 - y0 : sy1 - y0, sx0 - x0 : sx1 - x0] = img[sy0:sy1, sx0:sx1]
        out.append(patch)
    return out
