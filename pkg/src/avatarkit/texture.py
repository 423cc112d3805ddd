"""UV-space texture pipeline: projection, flow completion, symmetry.

Textures are (H, W, 3) float grids in [0, 1]; texel (x, y) addresses
array element [y, x]. UV coordinates map to texel space as
x = u * (W - 1), y = v * (H - 1).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .errors import (
    AlignmentError,
    AtlasError,
    EmptyVisibilityError,
    ParameterError,
)
from .raster import coverage


@dataclass(frozen=True)
class UVTexture:
    values: np.ndarray  # (H, W, 3) in [0, 1]

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 3 or v.shape[2] != 3:
            raise ParameterError(f"texture must be (H, W, 3), got {v.shape}")
        object.__setattr__(self, "values", v)

    @property
    def size(self):
        h, w = self.values.shape[:2]
        return (w, h)


@dataclass(frozen=True)
class UVMask:
    bits: np.ndarray  # (H, W) bool

    def __post_init__(self):
        object.__setattr__(self, "bits", np.asarray(self.bits, dtype=bool))

    @property
    def size(self):
        h, w = self.bits.shape
        return (w, h)


@dataclass(frozen=True)
class FlowField:
    """Per-texel 2D source coordinates in continuous texel units (x, y)."""

    coords: np.ndarray  # (H, W, 2)

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=np.float64)
        if c.ndim != 3 or c.shape[2] != 2:
            raise ParameterError(f"flow must be (H, W, 2), got {c.shape}")
        object.__setattr__(self, "coords", c)


@dataclass(frozen=True)
class UVSymmetry:
    """Per-texel mirrored texel coordinates; NaN where unmapped."""

    coords: np.ndarray  # (H, W, 2) continuous (x, y)

    def __post_init__(self):
        object.__setattr__(self, "coords", np.asarray(self.coords, dtype=np.float64))

    def mapped(self):
        return np.isfinite(self.coords).all(axis=-1)


@dataclass(frozen=True)
class CompleteConfig:
    symmetry_preference: bool = True
    gamma: float = 1.5
    smooth: bool = False
    smooth_radius: float = 1.0


def _uv_to_texel(uv, size):
    w, h = size
    out = np.empty_like(uv)
    out[..., 0] = uv[..., 0] * (w - 1)
    out[..., 1] = uv[..., 1] * (h - 1)
    return out


def bilinear_sample(grid, position):
    """4-neighbor bilinear interpolation at a continuous (x, y) position.

    The position must already be clamped to [0, W-1] x [0, H-1]; exact
    integer positions return the stored value bit-exactly.
    """
    a = np.asarray(grid, dtype=np.float64)
    h, w = a.shape[:2]
    x, y = float(position[0]), float(position[1])
    if not (0.0 <= x <= w - 1 and 0.0 <= y <= h - 1):
        raise ParameterError(f"position {position} outside [0,{w-1}]x[0,{h-1}]")
    x0, y0 = int(np.floor(x)), int(np.floor(y))
    fx, fy = x - x0, y - y0
    if fx == 0.0 and fy == 0.0:
        return a[y0, x0]
    x1, y1 = min(x0 + 1, w - 1), min(y0 + 1, h - 1)
    top = a[y0, x0] * (1 - fx) + a[y0, x1] * fx
    bot = a[y1, x0] * (1 - fx) + a[y1, x1] * fx
    return top * (1 - fy) + bot * fy


def _bilinear_many(grid, xs, ys):
    """Vectorized bilinear sampling; integer positions are bit-exact."""
    a = np.asarray(grid, dtype=np.float64)
    h, w = a.shape[:2]
    x = np.clip(xs, 0, w - 1)
    y = np.clip(ys, 0, h - 1)
    x0 = np.floor(x).astype(np.int64)
    y0 = np.floor(y).astype(np.int64)
    fx = x - x0
    fy = y - y0
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    if a.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
    top = a[y0, x0] * (1 - fx) + a[y0, x1] * fx
    bot = a[y1, x0] * (1 - fx) + a[y1, x1] * fx
    out = top * (1 - fy) + bot * fy
    exact = (fx == 0) & (fy == 0)
    if a.ndim == 3:
        exact = exact[..., 0]
        out[exact] = a[y0[exact], x0[exact]]
    else:
        out = np.where(exact, a[y0, x0], out)
    return out


def project_visible_texture(mesh, camera, image, face_visible, face_index=None, size=(256, 256)):
    """Bake the visible part of the image into UV space.

    Rasterizes each visible face in texel space; every covered texel maps
    through barycentric coordinates to a 3D surface point, is projected by
    the camera and bilinearly sampled from the image. Returns the partial
    texture and its visibility mask; texels of invisible faces stay black
    with mask false. Zero-UV-area faces are skipped (their count is
    reported in the returned info dict).
    """
    if mesh.uv is None:
        raise AtlasError("mesh has no UV atlas")
    w, h = size
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 2:
        img = np.repeat(img[:, :, None], 3, axis=2)
    vis = np.flatnonzero(np.asarray(face_visible, dtype=bool))
    tex = np.zeros((h, w, 3))
    mask = np.zeros((h, w), dtype=bool)
    skipped = 0
    if len(vis):
        uv_tris = _uv_to_texel(mesh.uv[vis], size)
        e1 = uv_tris[:, 1] - uv_tris[:, 0]
        e2 = uv_tris[:, 2] - uv_tris[:, 0]
        area = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        skipped = int(np.sum(area == 0))
        fi, px, py, bary = coverage(uv_tris, w, h)
        if len(fi):
            tri3d = mesh.vertices[mesh.faces[vis[fi]]]  # (N, 3, 3)
            pts = np.einsum("nc,ncd->nd", bary, tri3d)
            pix = camera.project(pts)
            iw, ih = camera.image_size
            vals = _bilinear_many(
                img, np.clip(pix[:, 0], 0, iw - 1), np.clip(pix[:, 1], 0, ih - 1)
            )
            tex[py, px] = vals
            mask[py, px] = True
    info = {"skipped_zero_uv_faces": skipped}
    return UVTexture(tex), UVMask(mask), info


def _round_coords(coords):
    return np.round(coords).astype(np.int64)


def nearest_visible_flow(mask, symmetry=None, symmetry_preference=False, gamma=1.5):
    """Deterministic completion flow: every texel maps to a visible source.

    Visible texels map to themselves. Invisible texels map to their nearest
    visible texel in Euclidean texel distance with ties broken by row-major
    order. With symmetry preference, the mirrored texel wins when it is
    visible and its distance to the symmetry seam (half the mirror
    displacement) is below gamma times the plain nearest distance.
    """
    bits = mask.bits
    h, w = bits.shape
    if not bits.any():
        raise EmptyVisibilityError("mask has no visible texel")
    ys, xs = np.nonzero(bits)
    order = np.argsort(ys * w + xs, kind="stable")
    vis_xy = np.stack([xs[order], ys[order]], axis=1)  # row-major order
    tree = cKDTree(vis_xy)

    flow = np.empty((h, w, 2))
    gy, gx = np.mgrid[0:h, 0:w]
    flow[..., 0] = gx
    flow[..., 1] = gy

    inv_y, inv_x = np.nonzero(~bits)
    if len(inv_y) == 0:
        return FlowField(flow)
    q = np.stack([inv_x, inv_y], axis=1).astype(np.float64)

    k = min(8, len(vis_xy))
    dists, idxs = tree.query(q, k=k)
    dists = np.atleast_2d(dists.reshape(len(q), -1))
    idxs = np.atleast_2d(idxs.reshape(len(q), -1))
    src = np.empty((len(q), 2), dtype=np.int64)
    for i in range(len(q)):
        di, ii = dists[i], idxs[i]
        dmin = di[0]
        if k < len(vis_xy) and di[-1] <= dmin + 1e-9:
            # tie extends past the retrieved neighbors; fetch more
            kk = min(len(vis_xy), 4 * k)
            while True:
                di, ii = tree.query(q[i], k=kk)
                if kk == len(vis_xy) or di[-1] > di[0] + 1e-9:
                    break
                kk = min(len(vis_xy), 2 * kk)
        cand = ii[np.abs(di - di[0]) <= 1e-9]
        # candidates are indices into the row-major-sorted visible list, so
        # the smallest index is the row-major-first source
        src[i] = vis_xy[int(np.min(cand))]

    if symmetry_preference and symmetry is not None:
        mir = symmetry.coords[inv_y, inv_x]
        ok = np.isfinite(mir).all(axis=1)
        mr = np.full((len(q), 2), -1, dtype=np.int64)
        mr[ok] = _round_coords(mir[ok])
        inb = ok & (mr[:, 0] >= 0) & (mr[:, 0] < w) & (mr[:, 1] >= 0) & (mr[:, 1] < h)
        mvis = np.zeros(len(q), dtype=bool)
        mvis[inb] = bits[mr[inb, 1], mr[inb, 0]]
        d_plain = np.linalg.norm(src - q, axis=1)
        d_seam = 0.5 * np.linalg.norm(mr - q, axis=1)
        use = mvis & (d_seam < gamma * np.maximum(d_plain, 1e-12))
        src[use] = mr[use]

    flow[inv_y, inv_x, 0] = src[:, 0]
    flow[inv_y, inv_x, 1] = src[:, 1]
    return FlowField(flow)


def apply_flow(texture, flow):
    """Resample the texture through the flow: out = bilinear(tex, flow)."""
    if texture.values.shape[:2] != flow.coords.shape[:2]:
        raise AlignmentError(
            f"texture {texture.values.shape[:2]} vs flow {flow.coords.shape[:2]}"
        )
    out = _bilinear_many(texture.values, flow.coords[..., 0], flow.coords[..., 1])
    return UVTexture(out)


def symmetric_composite(texture, mask, symmetry):
    """Fill invisible texels from their mirrored counterparts when visible.

    Originally visible texels are untouched; the returned mask grows by
    exactly the mirrored footprint. Idempotent.
    """
    bits = mask.bits
    h, w = bits.shape
    mir = symmetry.coords
    ok = np.isfinite(mir).all(axis=-1) & ~bits
    tex = texture.values.copy()
    out_mask = bits.copy()
    if ok.any():
        ys, xs = np.nonzero(ok)
        mr = _round_coords(mir[ys, xs])
        inb = (mr[:, 0] >= 0) & (mr[:, 0] < w) & (mr[:, 1] >= 0) & (mr[:, 1] < h)
        ys, xs, mr = ys[inb], xs[inb], mr[inb]
        # enforce involution at texel resolution: the rounded mirror of the
        # rounded mirror must land back on the texel, otherwise repeated
        # application would keep growing the mask
        back = mir[mr[:, 1], mr[:, 0]]
        inv = np.isfinite(back).all(axis=-1)
        backr = np.full_like(mr, -1)
        backr[inv] = _round_coords(back[inv])
        inv &= (backr[:, 0] == xs) & (backr[:, 1] == ys)
        ys, xs, mr = ys[inv], xs[inv], mr[inv]
        vis = bits[mr[:, 1], mr[:, 0]]
        ys, xs, mr = ys[vis], xs[vis], mr[vis]
        tex[ys, xs] = texture.values[mr[:, 1], mr[:, 0]]
        out_mask[ys, xs] = True
    return UVTexture(tex), UVMask(out_mask)


def complete_texture(partial, mask, symmetry=None, config=CompleteConfig()):
    """Full completion: symmetry composite, nearest-visible flow, sampling.

    Every output texel is defined; originally visible texels are preserved
    bit-exactly (optional smoothing is restricted to originally invisible
    texels and disabled by default).
    """
    tex, m = partial, mask
    if symmetry is not None:
        tex, m = symmetric_composite(tex, m, symmetry)
    flow = nearest_visible_flow(
        m, symmetry=symmetry, symmetry_preference=config.symmetry_preference, gamma=config.gamma
    )
    out = apply_flow(tex, flow)
    if config.smooth:
        fill = ~mask.bits
        blurred = np.stack(
            [ndimage.gaussian_filter(out.values[..., c], config.smooth_radius) for c in range(3)],
            axis=-1,
        )
        vals = out.values.copy()
        vals[fill] = blurred[fill]
        out = UVTexture(vals)
    return out


def uv_symmetry_from_mesh(mesh, symmetry_map, size=(256, 256)):
    """Derive the per-texel mirror map from mesh symmetry plus the UV atlas.

    Each texel covered by a face maps through its barycentric coordinates to
    the UVs of the mirrored corner vertices. Mirrored corner UVs are chosen
    per face as the candidate combination with the smallest spread (seam
    vertices carry several UVs). Texels failing the one-texel involution
    check are marked unmapped.
    """
    if mesh.uv is None:
        raise AtlasError("mesh has no UV atlas")
    w, h = size
    perm = symmetry_map.permutation(mesh.n_vertices)

    # candidate UVs per vertex from its face-corner occurrences
    cand = {}
    for fi, tri in enumerate(mesh.faces):
        for ci, vid in enumerate(tri):
            cand.setdefault(int(vid), []).append(mesh.uv[fi, ci])
    for vid, lst in cand.items():
        arr = np.unique(np.round(np.asarray(lst), 9), axis=0)
        cand[vid] = arr

    # per-face mirrored corner UV triple with minimal spread
    mirrored_uv = np.full((mesh.n_faces, 3, 2), np.nan)
    for fi, tri in enumerate(mesh.faces):
        mids = [perm[int(v)] for v in tri]
        if any(m < 0 for m in mids):
            continue
        options = [cand.get(m) for m in mids]
        if any(o is None for o in options):
            continue
        combos = list(itertools.product(*[range(len(o)) for o in options]))
        if len(combos) > 64:
            combos = combos[:64]
        best, best_spread = None, np.inf
        for combo in combos:
            pts = np.array([options[c][i] for c, i in enumerate(combo)])
            spread = np.max(pts.max(axis=0) - pts.min(axis=0))
            if spread < best_spread:
                best_spread = spread
                best = pts
        mirrored_uv[fi] = best

    uv_tris = _uv_to_texel(mesh.uv, size)
    fi, px, py, bary = coverage(uv_tris, w, h)
    order = np.lexsort((fi, py * w + px))
    pix_sorted = (py * w + px)[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = pix_sorted[1:] != pix_sorted[:-1]
    win = order[first]
    fi, px, py, bary = fi[win], px[win], py[win], bary[win]

    coords = np.full((h, w, 2), np.nan)
    ok = np.isfinite(mirrored_uv[fi]).all(axis=(1, 2))
    target_uv = np.einsum("nc,ncd->nd", bary[ok], mirrored_uv[fi[ok]])
    target = _uv_to_texel(target_uv, size)
    coords[py[ok], px[ok]] = target

    # involution check within one texel; failures become unmapped
    sym = UVSymmetry(coords)
    mapped = sym.mapped()
    ys, xs = np.nonzero(mapped)
    tgt = _round_coords(coords[ys, xs])
    inb = (tgt[:, 0] >= 0) & (tgt[:, 0] < w) & (tgt[:, 1] >= 0) & (tgt[:, 1] < h)
    back = np.full((len(ys), 2), np.nan)
    back[inb] = coords[tgt[inb, 1], tgt[inb, 0]]
    err = np.linalg.norm(back - np.stack([xs, ys], axis=1), axis=1)
    bad = ~(np.isfinite(err) & (err <= 1.0))
    coords[ys[bad], xs[bad]] = np.nan
    return UVSymmetry(coords)
