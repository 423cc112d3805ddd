"""Shading-based vertex-level detail recovery.

Second-order spherical harmonics model Lambertian shading of a surface
with albedo rho under 9 lighting coefficients. Lighting is estimated in
closed form from the coarse render; the depth map is then refined by
direct minimization of a photometric + data + smoothness energy, the
detail is magnified, and the result is transferred back to the mesh as
z-only vertex displacement.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.optimize import minimize

from .deform import _axis_rows, _solve_axis, depth_constraint, uniform_laplacian, differential_coords
from .errors import (
    AlignmentError,
    ConditioningError,
    NormalizationError,
    OptimizerError,
    ParameterError,
)
from .raster import DepthMap, gradient_coeffs, pixel_gradients, shift

# real SH normalization constants, closed form
_C0 = 0.5 * np.sqrt(1.0 / np.pi)
_C1 = np.sqrt(3.0 / (4.0 * np.pi))
_C2 = 0.5 * np.sqrt(15.0 / np.pi)
_C20 = 0.25 * np.sqrt(5.0 / np.pi)
_C22 = 0.25 * np.sqrt(15.0 / np.pi)

#: Coefficient ordering: Y00, Y1-1, Y10, Y11, Y2-2, Y2-1, Y20, Y21, Y22
SH_ORDER = ("Y00", "Y1-1", "Y10", "Y11", "Y2-2", "Y2-1", "Y20", "Y21", "Y22")


@dataclass(frozen=True)
class SHLighting:
    coeffs: np.ndarray  # (9,)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.float64).reshape(-1)
        if c.shape != (9,):
            raise ParameterError(f"need 9 SH coefficients, got {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ParameterError("SH coefficients must be finite")
        object.__setattr__(self, "coeffs", c)

    def to_json(self, path):
        import json

        with open(path, "w") as fh:
            json.dump(self.coeffs.tolist(), fh)


@dataclass(frozen=True)
class AlbedoMap:
    """Per-pixel nonnegative reflectance on the image grid (luminance)."""

    values: np.ndarray  # (H, W)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class RefineConfig:
    lambda_photo: float = 1.0
    lambda_data: float = 5.0
    lambda_smooth: float = 2.0
    beta: float = 10.0  # detail magnification
    ridge: float = 1e-8  # SH solve regularizer
    max_iter: int = 400
    gtol: float = 1e-10


def sh_basis(normal):
    """9 real SH basis values at a unit normal, in SH_ORDER."""
    n = np.asarray(normal, dtype=np.float64)
    if abs(np.linalg.norm(n) - 1.0) > 1e-6:
        raise NormalizationError(f"normal must be unit length, |n|={np.linalg.norm(n)}")
    return sh_basis_many(n[None, :])[0]


def sh_basis_many(normals):
    """Vectorized SH basis: (..., 3) unit normals -> (..., 9) values."""
    n = np.asarray(normals, dtype=np.float64)
    x, y, z = n[..., 0], n[..., 1], n[..., 2]
    out = np.empty(n.shape[:-1] + (9,))
    out[..., 0] = _C0
    out[..., 1] = _C1 * y
    out[..., 2] = _C1 * z
    out[..., 3] = _C1 * x
    out[..., 4] = _C2 * x * y
    out[..., 5] = _C2 * y * z
    out[..., 6] = _C20 * (3.0 * z**2 - 1.0)
    out[..., 7] = _C2 * x * z
    out[..., 8] = _C22 * (x**2 - y**2)
    return out


def sh_basis_gradient(normals):
    """d(basis_k)/d(n) as (..., 9, 3)."""
    n = np.asarray(normals, dtype=np.float64)
    x, y, z = n[..., 0], n[..., 1], n[..., 2]
    zero = np.zeros_like(x)
    g = np.empty(n.shape[:-1] + (9, 3))
    g[..., 0, :] = 0.0
    g[..., 1, :] = np.stack([zero, np.full_like(x, _C1), zero], axis=-1)
    g[..., 2, :] = np.stack([zero, zero, np.full_like(x, _C1)], axis=-1)
    g[..., 3, :] = np.stack([np.full_like(x, _C1), zero, zero], axis=-1)
    g[..., 4, :] = _C2 * np.stack([y, x, zero], axis=-1)
    g[..., 5, :] = _C2 * np.stack([zero, z, y], axis=-1)
    g[..., 6, :] = _C20 * np.stack([zero, zero, 6.0 * z], axis=-1)
    g[..., 7, :] = _C2 * np.stack([z, zero, x], axis=-1)
    g[..., 8, :] = _C22 * np.stack([2.0 * x, -2.0 * y, zero], axis=-1)
    return g


def shade(lighting, normals):
    """Lambertian shading sum_k l_k H_k(n) for an array of unit normals."""
    return sh_basis_many(normals) @ lighting.coeffs


def estimate_lighting(image, albedo, normals, mask, ridge=0.0):
    """Closed-form least-squares SH lighting fit over foreground pixels.

    Solves min_l sum (rho * sum_k l_k H_k(n) - I)^2 + ridge * |l|^2 via the
    9x9 normal equations; deterministic. Raises ConditioningError when the
    system is rank deficient and no ridge is supplied.
    """
    img = np.asarray(image, dtype=np.float64)
    rho = albedo.values if isinstance(albedo, AlbedoMap) else np.asarray(albedo, dtype=np.float64)
    n = np.asarray(normals, dtype=np.float64)
    valid = np.asarray(mask, dtype=bool) & np.isfinite(n).all(axis=-1) & np.isfinite(img)
    if valid.sum() < 9:
        raise ParameterError(f"need at least 9 valid foreground pixels, got {int(valid.sum())}")
    basis = sh_basis_many(n[valid])
    a = rho[valid][:, None] * basis
    g = a.T @ a + ridge * np.eye(9)
    if ridge == 0.0 and (not np.all(np.isfinite(g)) or np.linalg.cond(g) > 1e10):
        raise ConditioningError(
            "SH normal equations are rank deficient; supply a ridge term"
        )
    coeffs = np.linalg.solve(g, a.T @ img[valid])
    return SHLighting(coeffs)


def estimate_albedo(image, normals, mask, lighting_bootstrap, blur_radius=2.0, floor=0.05):
    """Baseline albedo: image divided by bootstrap shading, low-passed.

    Shading below `floor` is clamped so the division stays finite. The
    low-pass is a mask-normalized Gaussian restricted to the foreground.
    """
    img = np.asarray(image, dtype=np.float64)
    n = np.asarray(normals, dtype=np.float64)
    fg = np.asarray(mask, dtype=bool) & np.isfinite(n).all(axis=-1)
    shading = np.zeros(img.shape)
    shading[fg] = shade(lighting_bootstrap, n[fg])
    raw = np.zeros(img.shape)
    raw[fg] = img[fg] / np.maximum(shading[fg], floor)
    if blur_radius > 0:
        num = ndimage.gaussian_filter(np.where(fg, raw, 0.0), blur_radius)
        den = ndimage.gaussian_filter(fg.astype(np.float64), blur_radius)
        smooth = np.zeros(img.shape)
        smooth[fg] = num[fg] / np.maximum(den[fg], 1e-12)
    else:
        smooth = raw
    out = np.zeros(img.shape)
    out[fg] = np.maximum(smooth[fg], 0.0)
    return AlbedoMap(out)


class RefineObjective:
    """Photometric + data + smoothness energy over foreground depth values.

    Exposes value and analytic gradient with respect to the flattened
    foreground depth vector; the gradient is the exact adjoint of the
    finite-difference normal computation.
    """

    def __init__(self, coarse, image, albedo, lighting, mask, camera, config):
        self.config = config
        self.camera = camera
        self.image = np.asarray(image, dtype=np.float64)
        self.rho = albedo.values if isinstance(albedo, AlbedoMap) else np.asarray(albedo, dtype=np.float64)
        self.lighting = lighting
        self.d0 = coarse.values
        self.fg = coarse.foreground() & np.asarray(mask, dtype=bool)
        self.coeffs = gradient_coeffs(self.fg)
        self.valid_n = self.coeffs[2] & np.isfinite(self.image) & np.isfinite(self.rho)
        # foreground neighbor count for the masked Laplacian
        f = self.fg.astype(np.float64)
        self.nb_count = shift(f, 1, 0) + shift(f, -1, 0) + shift(f, 0, 1) + shift(f, 0, -1)

    def unpack(self, x):
        d = np.zeros(self.fg.shape)
        d[self.fg] = x
        return d

    def _lap(self, d):
        dm = np.where(self.fg, d, 0.0)
        nb = shift(dm, 1, 0) + shift(dm, -1, 0) + shift(dm, 0, 1) + shift(dm, 0, -1)
        lap = np.where(self.fg, nb - self.nb_count * dm, 0.0)
        return lap

    def __call__(self, x):
        cfg = self.config
        s = self.camera.scale
        ds = self.camera.depth_sign
        d = self.unpack(x)
        grad = np.zeros(d.shape)

        # photometric term through finite-difference normals
        if cfg.lambda_photo > 0:
            (cxp, cx0, cxm), (cyp, cy0, cym), _ = self.coeffs
            gx_px, gy_px = pixel_gradients(d, self.fg, self.coeffs)
            gx, gy = s * gx_px, s * gy_px
            m = np.stack([-gx, -gy, np.ones_like(gx)], axis=-1) * ds
            mlen = np.linalg.norm(m, axis=-1)
            n = m / mlen[..., None]
            vn = self.valid_n
            basis = sh_basis_many(n[vn])
            shading = basis @ self.lighting.coeffs
            r = self.rho[vn] * shading - self.image[vn]
            e_photo = float(np.sum(r**2))

            dshade_dn = np.einsum(
                "pkc,k->pc", sh_basis_gradient(n[vn]), self.lighting.coeffs
            )
            de_dn = (2.0 * self.rho[vn] * r)[:, None] * dshade_dn
            nv = n[vn]
            de_dm = (de_dn - nv * np.sum(nv * de_dn, axis=1, keepdims=True)) / mlen[vn][
                :, None
            ]
            de_dm_full = np.zeros(d.shape + (3,))
            de_dm_full[vn] = de_dm
            u_gx = -ds * de_dm_full[..., 0]
            u_gy = -ds * de_dm_full[..., 1]
            grad_photo = s * (
                shift(cxp * u_gx, 1, 0) + cx0 * u_gx + shift(cxm * u_gx, -1, 0)
            )
            grad_photo += s * (
                shift(cyp * u_gy, 0, 1) + cy0 * u_gy + shift(cym * u_gy, 0, -1)
            )
            grad += cfg.lambda_photo * grad_photo
        else:
            e_photo = 0.0

        # data term
        diff = np.where(self.fg, d - self.d0, 0.0)
        e_data = float(np.sum(diff**2))
        grad += cfg.lambda_data * 2.0 * diff

        # smoothness term (masked 4-neighbor Laplacian, symmetric operator)
        if cfg.lambda_smooth > 0:
            lap = self._lap(d)
            e_smooth = float(np.sum(lap**2))
            grad += cfg.lambda_smooth * 2.0 * self._lap(lap)
        else:
            e_smooth = 0.0

        energy = (
            cfg.lambda_photo * e_photo
            + cfg.lambda_data * e_data
            + cfg.lambda_smooth * e_smooth
        )
        return energy, grad[self.fg]

    def photometric_residual(self, x):
        """Sum of squared photometric residuals at the given depth vector."""
        s, ds = self.camera.scale, self.camera.depth_sign
        d = self.unpack(x)
        gx_px, gy_px = pixel_gradients(d, self.fg, self.coeffs)
        m = np.stack([-s * gx_px, -s * gy_px, np.ones_like(gx_px)], axis=-1) * ds
        n = m / np.linalg.norm(m, axis=-1, keepdims=True)
        vn = self.valid_n
        r = self.rho[vn] * (sh_basis_many(n[vn]) @ self.lighting.coeffs) - self.image[vn]
        return float(np.sum(r**2))


def refine_depth(coarse, image, albedo, lighting, mask, camera, config=RefineConfig()):
    """Minimize the shading energy over foreground depth; monotone in energy.

    Returns the refined DepthMap; the objective at the output never exceeds
    the objective at the input (L-BFGS with line search; the input is
    returned unchanged if no descent is found).
    """
    obj = RefineObjective(coarse, image, albedo, lighting, mask, camera, config)
    x0 = coarse.values[obj.fg]
    if x0.size == 0:
        return DepthMap(coarse.values.copy())
    e0, _ = obj(x0)
    res = minimize(
        obj,
        x0,
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": config.max_iter, "gtol": config.gtol},
    )
    e1, _ = obj(res.x)
    if not np.isfinite(e1):
        raise OptimizerError(f"refinement diverged (energy {e1})", trace=res)
    x = res.x if e1 <= e0 else x0
    out = coarse.values.copy()
    out[obj.fg] = x
    return DepthMap(out)


def magnify_details(coarse, refined, beta):
    """D_out = D_coarse + beta * (D_refined - D_coarse), per pixel."""
    if coarse.values.shape != refined.values.shape:
        raise AlignmentError(
            f"depth grids differ: {coarse.values.shape} vs {refined.values.shape}"
        )
    out = coarse.values + beta * (refined.values - coarse.values)
    return DepthMap(out)


def _bilinear_depth(values, x, y):
    """Bilinear depth sample with nearest-finite fallback; None off-surface."""
    h, w = values.shape
    x0, y0 = int(np.floor(x)), int(np.floor(y))
    x0 = min(max(x0, 0), w - 2) if w > 1 else 0
    y0 = min(max(y0, 0), h - 2) if h > 1 else 0
    fx, fy = x - x0, y - y0
    corners = [(y0, x0), (y0, x0 + 1), (y0 + 1, x0), (y0 + 1, x0 + 1)]
    corners = [(cy, cx) for cy, cx in corners if 0 <= cy < h and 0 <= cx < w]
    vals = [values[cy, cx] for cy, cx in corners]
    if len(vals) == 4 and all(np.isfinite(v) for v in vals):
        top = vals[0] * (1 - fx) + vals[1] * fx
        bot = vals[2] * (1 - fx) + vals[3] * fx
        return top * (1 - fy) + bot * fy
    finite = [(abs(cy - y) ** 2 + abs(cx - x) ** 2, cy, cx) for cy, cx in corners if np.isfinite(values[cy, cx])]
    if not finite:
        return None
    finite.sort()
    _, cy, cx = finite[0]
    return float(values[cy, cx])


def depth_to_vertex_displacement(mesh, camera, target_depth, face_visible):
    """Move visible vertices to the target depth along z; back-fill the rest.

    Visible vertices (any incident visible face) sample the target depth
    bilinearly at their projection and take the sampled value as their new
    z; x and y never change, so the silhouette is invariant. Invisible
    vertices get no direct constraint and are regularized by a z-only
    Laplacian solve with the moved vertices as weight-1 handles.

    Returns (mesh, skipped) with `skipped` the number of visible vertices
    whose projection landed on the background sentinel.
    """
    hits = np.zeros(mesh.n_vertices, dtype=np.int64)
    fv = np.asarray(face_visible, dtype=np.int64)
    for c in range(3):
        np.add.at(hits, mesh.faces[:, c], fv)
    vis_vertex = hits > 0
    proj = camera.project(mesh.vertices)
    values = target_depth.values
    constraints = []
    skipped = 0
    for vid in np.flatnonzero(vis_vertex):
        z = _bilinear_depth(values, proj[vid, 0], proj[vid, 1])
        if z is None:
            skipped += 1
            continue
        constraints.append(depth_constraint(vid, z, 1.0))
    if not constraints:
        return mesh, skipped

    lap = uniform_laplacian(mesh)
    delta = differential_coords(mesh)
    rows = _axis_rows(constraints, None, 2)
    z_new = _solve_axis(lap, delta[:, 2], rows, mesh.n_vertices, mesh.vertices[0, 2], 1e-10)
    out = mesh.vertices.copy()
    out[:, 2] = z_new
    return mesh.with_vertices(out), skipped
