"""Laplacian mesh editing with soft handle constraints.

The deformation minimizes

    || L V' - delta ||^2  +  sum_i w_i^2 || C(v'_i) - target_i ||^2

with L the uniform (combinatorial) graph Laplacian L = I - D^-1 A and
delta the differential coordinates of the input mesh. C is the identity
for 3D targets, the weak-perspective projection for 2D pixel targets
(depth left free), or the z-component alone for depth-only targets.

The three coordinate axes decouple, so each is solved as an independent
sparse least-squares problem via its normal equations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla

from .errors import ParameterError, RankDeficiencyError, SolverError
from .mesh import neighbor_means

KINDS = ("3d", "2d", "z")


@dataclass(frozen=True)
class HandleConstraint:
    vertex_index: int
    target: np.ndarray  # (3,) position, (2,) pixel, or scalar depth
    weight: float
    kind: str = "3d"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown constraint kind {self.kind!r}")
        if self.weight < 0:
            raise ParameterError("constraint weight must be nonnegative")
        t = np.atleast_1d(np.asarray(self.target, dtype=np.float64))
        expect = {"3d": 3, "2d": 2, "z": 1}[self.kind]
        if t.shape != (expect,):
            raise ParameterError(
                f"{self.kind} target must have {expect} components, got {t.shape}"
            )
        object.__setattr__(self, "target", t)


def point_constraint(vertex_index, target_xyz, weight):
    return HandleConstraint(int(vertex_index), target_xyz, float(weight), "3d")


def pixel_constraint(vertex_index, target_px, weight):
    """Constrain the projected position; depth stays free."""
    return HandleConstraint(int(vertex_index), target_px, float(weight), "2d")


def depth_constraint(vertex_index, target_z, weight):
    """Constrain only the z coordinate; image-plane position stays free."""
    return HandleConstraint(int(vertex_index), [target_z], float(weight), "z")


@dataclass(frozen=True)
class DeformProblem:
    mesh: object
    constraints: list
    camera: object = None

    def __post_init__(self):
        if not any(c.weight > 0 for c in self.constraints):
            raise RankDeficiencyError(
                "no constraint carries positive weight; solution is only "
                "determined up to translation"
            )
        if any(c.kind == "2d" for c in self.constraints) and self.camera is None:
            raise ParameterError("2D pixel targets require a camera")
        n = self.mesh.n_vertices
        for c in self.constraints:
            if not 0 <= c.vertex_index < n:
                raise ParameterError(f"constraint vertex {c.vertex_index} out of range")


def differential_coords(mesh, positions=None):
    """Uniform differential coordinates: vertex minus mean of its neighbors."""
    pos = mesh.vertices if positions is None else np.asarray(positions, dtype=np.float64)
    return pos - neighbor_means(mesh, pos)


def uniform_laplacian(mesh):
    """L = I - D^-1 A as a CSR matrix."""
    adj = mesh.adjacency()
    deg = np.asarray(adj.sum(axis=1)).ravel()
    if np.any(deg == 0):
        # neighbor_means raises the canonical error; reuse its message path
        neighbor_means(mesh)
    inv_deg = sparse.diags(1.0 / deg)
    n = mesh.n_vertices
    return (sparse.identity(n) - inv_deg @ adj).tocsr()


def _axis_rows(constraints, camera, axis):
    """Constraint rows for one axis: (vertex indices, coefficients, rhs)."""
    idx, coef, rhs = [], [], []
    for c in constraints:
        if c.weight == 0:
            continue
        if c.kind == "3d":
            idx.append(c.vertex_index)
            coef.append(c.weight)
            rhs.append(c.weight * c.target[axis])
        elif c.kind == "2d" and axis in (0, 1):
            s = camera.scale
            t = camera.translation[axis]
            idx.append(c.vertex_index)
            coef.append(c.weight * s)
            rhs.append(c.weight * (c.target[axis] - t))
        elif c.kind == "z" and axis == 2:
            idx.append(c.vertex_index)
            coef.append(c.weight)
            rhs.append(c.weight * c.target[0])
    return (
        np.asarray(idx, dtype=np.int64),
        np.asarray(coef, dtype=np.float64),
        np.asarray(rhs, dtype=np.float64),
    )


def _solve_axis(lap, delta_axis, rows, n, anchor, tol):
    idx, coef, rhs = rows
    if len(idx) == 0:
        # unconstrained axis: the system is singular along constants; pin the
        # anchor vertex softly, which selects an exact least-squares minimizer
        idx = np.array([0], dtype=np.int64)
        coef = np.array([1.0])
        rhs = np.array([anchor])
    c_mat = sparse.coo_matrix((coef, (np.arange(len(idx)), idx)), shape=(len(idx), n))
    a = sparse.vstack([lap, c_mat.tocsr()], format="csr")
    b = np.concatenate([delta_axis, rhs])
    normal = (a.T @ a).tocsc()
    atb = a.T @ b
    try:
        lu = spla.splu(normal)
        x = lu.solve(atb)
    except RuntimeError as exc:
        raise RankDeficiencyError(f"normal equations are singular: {exc}") from exc
    res = np.linalg.norm(normal @ x - atb) / max(np.linalg.norm(atb), 1e-30)
    if not np.isfinite(res) or res > tol:
        x, info = spla.cg(normal, atb, x0=x, rtol=tol, maxiter=20 * n)
        res = np.linalg.norm(normal @ x - atb) / max(np.linalg.norm(atb), 1e-30)
        if info != 0 or res > tol:
            raise SolverError(
                f"axis solve did not reach residual {tol} (got {res:.3e})",
                residual=res,
            )
    return x


def solve_deform(problem, tol=1e-10):
    """Solve the soft-constrained Laplacian edit; topology is unchanged."""
    mesh = problem.mesh
    n = mesh.n_vertices
    lap = uniform_laplacian(mesh)
    delta = differential_coords(mesh)
    out = np.empty_like(mesh.vertices)
    for axis in range(3):
        rows = _axis_rows(problem.constraints, problem.camera, axis)
        anchor = mesh.vertices[0, axis]
        out[:, axis] = _solve_axis(lap, delta[:, axis], rows, n, anchor, tol)
    return mesh.with_vertices(out)


def deform_objective(problem, positions):
    """Objective value at given positions (for tests and diagnostics)."""
    mesh = problem.mesh
    lap = uniform_laplacian(mesh)
    delta = differential_coords(mesh)
    pos = np.asarray(positions, dtype=np.float64)
    total = float(np.sum((lap @ pos - delta) ** 2))
    for c in problem.constraints:
        v = pos[c.vertex_index]
        if c.kind == "3d":
            r = v - c.target
        elif c.kind == "2d":
            r = problem.camera.project(v) - c.target
        else:
            r = np.array([v[2] - c.target[0]])
        total += c.weight**2 * float(np.sum(r**2))
    return total


def dump_system(problem, path):
    """Debug dump of the per-axis sparse systems in triplet text format.

    Lines are "axis row col value" for matrix entries and "axis rhs row value"
    for right-hand sides.
    """
    mesh = problem.mesh
    n = mesh.n_vertices
    lap = uniform_laplacian(mesh)
    delta = differential_coords(mesh)
    with open(path, "w") as fh:
        for axis in range(3):
            idx, coef, rhs = _axis_rows(problem.constraints, problem.camera, axis)
            coo = lap.tocoo()
            for r, c, v in zip(coo.row, coo.col, coo.data):
                fh.write(f"{axis} {r} {c} {v:.17g}\n")
            for k, (i, w) in enumerate(zip(idx, coef)):
                fh.write(f"{axis} {n + k} {i} {w:.17g}\n")
            for r, v in enumerate(delta[:, axis]):
                fh.write(f"{axis} rhs {r} {v:.17g}\n")
            for k, v in enumerate(rhs):
                fh.write(f"{axis} rhs {n + k} {v:.17g}\n")
