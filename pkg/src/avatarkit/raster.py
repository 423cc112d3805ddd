"""Deterministic software rasterizer for weak-perspective meshes.

Produces binary silhouettes, depth maps, per-face visibility and a
per-pixel face index map. Coverage uses a pixel-center inside test with a
top-left fill rule so adjacent triangles never double-own a pixel; depth
ties are broken by lower face index.

Pixel centers sit at integer coordinates; pixel (px, py) covers the image
array element [py, px].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AlignmentError
from .mesh import face_normals, vertex_normals

#: Reserved background value in depth maps (0 is a legal depth).
BACKGROUND = np.nan


@dataclass(frozen=True)
class BinaryMask:
    """Per-pixel boolean foreground mask."""

    bits: np.ndarray  # (H, W) bool

    def __post_init__(self):
        object.__setattr__(self, "bits", np.asarray(self.bits, dtype=bool))

    @property
    def size(self):
        h, w = self.bits.shape
        return (w, h)

    def count(self):
        return int(self.bits.sum())


@dataclass(frozen=True)
class DepthMap:
    """Per-pixel camera-space depth (meters); background pixels are NaN."""

    values: np.ndarray  # (H, W) float64

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))

    @property
    def size(self):
        h, w = self.values.shape
        return (w, h)

    def foreground(self):
        return np.isfinite(self.values)


@dataclass(frozen=True)
class RasterResult:
    mask: BinaryMask
    depth: DepthMap
    face_visible: np.ndarray  # (F,) bool: front-facing and owns >= 1 pixel
    face_index: np.ndarray  # (H, W) int32, -1 for background
    empty: bool
    # winner bookkeeping for per-pixel interpolation (original corner order)
    pixel_xy: np.ndarray  # (N, 2) int
    pixel_face: np.ndarray  # (N,) int
    pixel_bary: np.ndarray  # (N, 3) float


def coverage(tris2d, width, height):
    """Pixel coverage of 2D triangles under the pixel-center/top-left rule.

    Parameters
    ----------
    tris2d : (F, 3, 2) float array of projected triangle corners.

    Returns
    -------
    face, px, py : int arrays of covered (triangle, pixel) pairs
    bary : (N, 3) barycentric weights in the *original* corner order
    """
    tris = np.asarray(tris2d, dtype=np.float64)
    nf = len(tris)
    if nf == 0:
        z = np.zeros(0, dtype=np.int64)
        return z, z, z, np.zeros((0, 3))

    e1 = tris[:, 1] - tris[:, 0]
    e2 = tris[:, 2] - tris[:, 0]
    area2 = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    flip = area2 < 0
    order = np.tile(np.array([0, 1, 2]), (nf, 1))
    order[flip] = [0, 2, 1]
    t = np.take_along_axis(tris, order[:, :, None], axis=1)

    x0 = np.ceil(t[:, :, 0].min(axis=1)).astype(np.int64)
    x1 = np.floor(t[:, :, 0].max(axis=1)).astype(np.int64)
    y0 = np.ceil(t[:, :, 1].min(axis=1)).astype(np.int64)
    y1 = np.floor(t[:, :, 1].max(axis=1)).astype(np.int64)
    x0 = np.clip(x0, 0, width - 1)
    x1 = np.clip(x1, 0, width - 1)
    y0 = np.clip(y0, 0, height - 1)
    y1 = np.clip(y1, 0, height - 1)
    w = np.maximum(x1 - x0 + 1, 0)
    h = np.maximum(y1 - y0 + 1, 0)
    counts = w * h
    counts[np.abs(area2) == 0] = 0  # edge-on triangle covers nothing
    total = int(counts.sum())
    if total == 0:
        z = np.zeros(0, dtype=np.int64)
        return z, z, z, np.zeros((0, 3))

    face = np.repeat(np.arange(nf), counts)
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    off = np.arange(total) - np.repeat(starts, counts)
    wf = w[face]
    px = x0[face] + off % wf
    py = y0[face] + off // wf
    q = np.stack([px, py], axis=1).astype(np.float64)

    p0, p1, p2 = t[face, 0], t[face, 1], t[face, 2]

    def edge(a, b):
        d = b - a
        e = d[:, 0] * (q[:, 1] - a[:, 1]) - d[:, 1] * (q[:, 0] - a[:, 0])
        # top-left rule (math coords): boundary pixels belong to edges going
        # down, or horizontal edges going left
        on_edge_in = (d[:, 1] < 0) | ((d[:, 1] == 0) & (d[:, 0] < 0))
        return e, (e > 0) | ((e == 0) & on_edge_in)

    e0, in0 = edge(p1, p2)
    e1, in1 = edge(p2, p0)
    e2, in2 = edge(p0, p1)
    keep = in0 & in1 & in2
    face, px, py = face[keep], px[keep], py[keep]
    e = np.stack([e0[keep], e1[keep], e2[keep]], axis=1)
    denom = e.sum(axis=1)
    denom[denom == 0] = 1.0
    b_ordered = e / denom[:, None]
    # undo the orientation swap to express weights in original corner order
    bary = np.empty_like(b_ordered)
    np.put_along_axis(bary, order[face], b_ordered, axis=1)
    return face, px, py, bary


def rasterize(camera, mesh):
    """Render silhouette, z-buffered depth, face visibility and face map."""
    w, h = camera.image_size
    proj = camera.project(mesh.vertices)
    tris2d = proj[mesh.faces]
    face, px, py, bary = coverage(tris2d, w, h)

    depth_vals = np.full((h, w), BACKGROUND)
    face_index = np.full((h, w), -1, dtype=np.int32)
    fvis = np.zeros(mesh.n_faces, dtype=bool)
    if len(face) == 0:
        return RasterResult(
            BinaryMask(np.zeros((h, w), dtype=bool)),
            DepthMap(depth_vals),
            fvis,
            face_index,
            True,
            np.zeros((0, 2), dtype=np.int64),
            np.zeros(0, dtype=np.int64),
            np.zeros((0, 3)),
        )

    zf = mesh.vertices[mesh.faces, 2]  # (F, 3)
    z = np.einsum("nc,nc->n", bary, zf[face])
    pix = py * w + px
    nearness_key = -camera.depth_sign * z
    order = np.lexsort((face, nearness_key, pix))
    pix_sorted = pix[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = pix_sorted[1:] != pix_sorted[:-1]
    win = order[first]

    wface, wpx, wpy, wbary, wz = face[win], px[win], py[win], bary[win], z[win]
    depth_vals[wpy, wpx] = wz
    face_index[wpy, wpx] = wface
    mask = np.zeros((h, w), dtype=bool)
    mask[wpy, wpx] = True

    front = camera.depth_sign * face_normals(mesh)[:, 2] > 0
    owns = np.zeros(mesh.n_faces, dtype=bool)
    owns[wface] = True
    fvis = front & owns

    return RasterResult(
        BinaryMask(mask),
        DepthMap(depth_vals),
        fvis,
        face_index,
        False,
        np.stack([wpx, wpy], axis=1),
        wface,
        wbary,
    )


def render_normal_map(camera, mesh, raster=None):
    """Per-pixel interpolated, renormalized vertex normals; NaN background."""
    if raster is None:
        raster = rasterize(camera, mesh)
    w, h = camera.image_size
    out = np.full((h, w, 3), np.nan)
    if raster.empty:
        return out
    vn = vertex_normals(mesh)
    corners = vn[mesh.faces[raster.pixel_face]]  # (N, 3, 3)
    n = np.einsum("nc,ncd->nd", raster.pixel_bary, corners)
    length = np.linalg.norm(n, axis=1, keepdims=True)
    length[length == 0] = 1.0
    n = n / length
    out[raster.pixel_xy[:, 1], raster.pixel_xy[:, 0]] = n
    return out


def gradient_coeffs(fg):
    """Finite-difference stencil coefficients per pixel for both axes.

    Central differences where both neighbors are foreground, one-sided at
    the boundary, zero where an axis has no foreground neighbor. Returns
    ((cxp, cx0, cxm), (cyp, cy0, cym), has_any_neighbor); gradients in
    value-per-pixel units are then
    gx = cxp*shift(D,+x) + cx0*D + cxm*shift(D,-x), analogously for y.
    """
    fg = np.asarray(fg, dtype=bool)

    def axis_coeffs(prev_ok, next_ok):
        cp = np.zeros(fg.shape)
        c0 = np.zeros(fg.shape)
        cm = np.zeros(fg.shape)
        both = prev_ok & next_ok
        only_next = next_ok & ~prev_ok
        only_prev = prev_ok & ~next_ok
        cp[both] = 0.5
        cm[both] = -0.5
        cp[only_next] = 1.0
        c0[only_next] = -1.0
        c0[only_prev] = 1.0
        cm[only_prev] = -1.0
        return cp, c0, cm

    right = np.zeros_like(fg)
    right[:, :-1] = fg[:, 1:]
    left = np.zeros_like(fg)
    left[:, 1:] = fg[:, :-1]
    down = np.zeros_like(fg)
    down[:-1, :] = fg[1:, :]
    up = np.zeros_like(fg)
    up[1:, :] = fg[:-1, :]

    cx = axis_coeffs(left & fg, right & fg)
    cy = axis_coeffs(up & fg, down & fg)
    has_any = fg & ((left & fg) | (right & fg) | (up & fg) | (down & fg))
    return cx, cy, has_any


def shift(a, dx, dy):
    """Shift a 2D array by (dx, dy) pixels, zero-filling exposed borders."""
    out = np.zeros_like(a)
    h, w = a.shape
    xs0, xs1 = max(dx, 0), min(w + dx, w)
    xd0, xd1 = max(-dx, 0), min(w - dx, w)
    ys0, ys1 = max(dy, 0), min(h + dy, h)
    yd0, yd1 = max(-dy, 0), min(h - dy, h)
    out[ys0:ys1, xs0:xs1] = a[yd0:yd1, xd0:xd1]
    return out


def pixel_gradients(values, fg, coeffs=None):
    """Masked finite-difference gradients (value per pixel step)."""
    if coeffs is None:
        coeffs = gradient_coeffs(fg)
    (cxp, cx0, cxm), (cyp, cy0, cym), _ = coeffs
    d = np.where(fg, values, 0.0)
    gx = cxp * shift(d, -1, 0) + cx0 * d + cxm * shift(d, 1, 0)
    gy = cyp * shift(d, 0, -1) + cy0 * d + cym * shift(d, 0, 1)
    return gx, gy


def depth_to_normals(depth, camera):
    """Per-pixel unit normals from a depth map by finite differences.

    Returns (normals, valid): normals is (H, W, 3) with NaN outside `valid`;
    isolated foreground pixels (no foreground neighbor on either axis) are
    flagged invalid.
    """
    values = depth.values
    fg = np.isfinite(values)
    coeffs = gradient_coeffs(fg)
    gx_px, gy_px = pixel_gradients(values, fg, coeffs)
    # pixel spacing is 1/scale meters
    gx = gx_px * camera.scale
    gy = gy_px * camera.scale
    valid = coeffs[2]
    m = np.stack([-gx, -gy, np.ones_like(gx)], axis=-1) * camera.depth_sign
    length = np.linalg.norm(m, axis=-1, keepdims=True)
    n = m / length
    out = np.full(values.shape + (3,), np.nan)
    out[valid] = n[valid]
    return out, valid


def check_same_size(a, b):
    if a.shape[:2] != b.shape[:2]:
        raise AlignmentError(f"grid size mismatch: {a.shape[:2]} vs {b.shape[:2]}")
