"""Triangle mesh core: representation, OBJ I/O, normals, subdivision, symmetry.

Conventions
-----------
* vertices are float64 positions in meters, shape (V, 3)
* faces are int64 index triples, shape (F, 3), counter-clockwise winding
  seen from outside (outward normal)
* optional UVs are stored per face corner, shape (F, 3, 2), in [0, 1]^2
* optional tags map a label string to an array of vertex indices
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.spatial import cKDTree

from .errors import (
    AsymmetryError,
    ConnectivityError,
    DegenerateNormalError,
    MeshFormatError,
    TopologyError,
)

AXES = {"x": 0, "y": 1, "z": 2}


@dataclass(frozen=True)
class TriMesh:
    """Indexed triangle mesh with optional per-corner UV atlas and vertex tags."""

    vertices: np.ndarray
    faces: np.ndarray
    uv: np.ndarray | None = None
    tags: dict | None = None

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.vertices, dtype=np.float64))
        f = np.ascontiguousarray(np.asarray(self.faces, dtype=np.int64))
        if v.ndim != 2 or v.shape[1] != 3:
            raise TopologyError(f"vertices must be (V, 3), got {v.shape}")
        if f.ndim != 2 or f.shape[1] != 3:
            raise TopologyError(f"faces must be (F, 3), got {f.shape}")
        if f.size and (f.min() < 0 or f.max() >= len(v)):
            raise TopologyError("face index out of range")
        if f.size:
            a, b, c = f[:, 0], f[:, 1], f[:, 2]
            if np.any((a == b) | (b == c) | (a == c)):
                bad = int(np.flatnonzero((a == b) | (b == c) | (a == c))[0])
                raise TopologyError(f"degenerate face {bad}: repeated vertex index")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)
        if self.uv is not None:
            uv = np.ascontiguousarray(np.asarray(self.uv, dtype=np.float64))
            if uv.shape != (len(f), 3, 2):
                raise TopologyError(
                    f"uv must be one pair per face corner (F, 3, 2), got {uv.shape}"
                )
            object.__setattr__(self, "uv", uv)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_faces(self):
        return len(self.faces)

    def edges(self):
        """Unique undirected edges as a sorted (E, 2) int array."""
        f = self.faces
        e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        e = np.sort(e, axis=1)
        return np.unique(e, axis=0)

    def adjacency(self):
        """Symmetric vertex adjacency as a CSR boolean matrix."""
        e = self.edges()
        n = self.n_vertices
        data = np.ones(len(e), dtype=np.float64)
        a = sparse.coo_matrix((data, (e[:, 0], e[:, 1])), shape=(n, n))
        a = a + a.T
        return a.tocsr()

    def tagged(self, labels):
        """Union of vertex indices carrying any of the given tag labels."""
        if not self.tags:
            return np.array([], dtype=np.int64)
        out = [np.asarray(self.tags[k], dtype=np.int64) for k in labels if k in self.tags]
        if not out:
            return np.array([], dtype=np.int64)
        return np.unique(np.concatenate(out))

    def with_vertices(self, vertices):
        """Copy of the mesh with replaced vertex positions (same topology)."""
        return TriMesh(vertices, self.faces, uv=self.uv, tags=self.tags)


@dataclass(frozen=True)
class SymmetryMap:
    """Left/right vertex correspondence of a bilaterally symmetric mesh."""

    pairs: np.ndarray  # (P, 2) left/right index pairs
    fixed: np.ndarray  # (K,) self-symmetric vertex indices

    def __post_init__(self):
        object.__setattr__(self, "pairs", np.asarray(self.pairs, dtype=np.int64).reshape(-1, 2))
        object.__setattr__(self, "fixed", np.asarray(self.fixed, dtype=np.int64).reshape(-1))

    def permutation(self, n_vertices):
        """Full involution as an index array of length n_vertices."""
        perm = np.full(n_vertices, -1, dtype=np.int64)
        perm[self.fixed] = self.fixed
        perm[self.pairs[:, 0]] = self.pairs[:, 1]
        perm[self.pairs[:, 1]] = self.pairs[:, 0]
        return perm

    def to_json(self, path):
        data = {"pairs": self.pairs.tolist(), "fixed": self.fixed.tolist()}
        with open(path, "w") as fh:
            json.dump(data, fh)

    @staticmethod
    def from_json(path):
        with open(path) as fh:
            data = json.load(fh)
        return SymmetryMap(np.asarray(data["pairs"]), np.asarray(data["fixed"]))


def load_mesh(path, tags_path=None):
    """Load a triangle-only OBJ file, with UVs when present.

    Raises MeshFormatError with the offending line number on parse failures
    and TopologyError for non-triangle faces.
    """
    positions = []
    texcoords = []
    face_v = []
    face_vt = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            key = parts[0]
            try:
                if key == "v":
                    positions.append([float(x) for x in parts[1:4]])
                elif key == "vt":
                    texcoords.append([float(x) for x in parts[1:3]])
                elif key == "f":
                    corners = parts[1:]
                    if len(corners) != 3:
                        raise TopologyError(
                            f"line {lineno}: face with {len(corners)} corners; "
                            "only triangles are supported"
                        )
                    vi, ti = [], []
                    for c in corners:
                        fields = c.split("/")
                        vi.append(int(fields[0]))
                        if len(fields) > 1 and fields[1]:
                            ti.append(int(fields[1]))
                    face_v.append(vi)
                    face_vt.append(ti if len(ti) == 3 else None)
            except TopologyError:
                raise
            except (ValueError, IndexError) as exc:
                raise MeshFormatError(str(exc), line=lineno) from exc
    if not positions or not face_v:
        raise MeshFormatError(f"no geometry found in {path}")

    nv, nt = len(positions), len(texcoords)

    def resolve(idx, count):
        return idx - 1 if idx > 0 else count + idx

    faces = np.array(
        [[resolve(i, nv) for i in tri] for tri in face_v], dtype=np.int64
    )
    uv = None
    if all(t is not None for t in face_vt) and nt:
        tex = np.asarray(texcoords, dtype=np.float64)
        uv = np.array(
            [[tex[resolve(i, nt)] for i in tri] for tri in face_vt], dtype=np.float64
        )
    tags = load_tags(tags_path) if tags_path else None
    return TriMesh(np.asarray(positions), faces, uv=uv, tags=tags)


def save_mesh(path, mesh):
    """Write an OBJ file; output is byte-deterministic for identical input."""
    lines = []
    for v in mesh.vertices:
        lines.append(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}")
    if mesh.uv is not None:
        for fi in range(mesh.n_faces):
            for ci in range(3):
                u, w = mesh.uv[fi, ci]
                lines.append(f"vt {u:.9g} {w:.9g}")
        for fi, tri in enumerate(mesh.faces):
            t = 3 * fi
            lines.append(
                f"f {tri[0] + 1}/{t + 1} {tri[1] + 1}/{t + 2} {tri[2] + 1}/{t + 3}"
            )
    else:
        for tri in mesh.faces:
            lines.append(f"f {tri[0] + 1} {tri[1] + 1} {tri[2] + 1}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_tags(path):
    """Load a sidecar JSON mapping label -> vertex index list."""
    with open(path) as fh:
        raw = json.load(fh)
    return {k: np.asarray(v, dtype=np.int64) for k, v in raw.items()}


def save_tags(path, tags):
    with open(path, "w") as fh:
        json.dump({k: np.asarray(v).tolist() for k, v in sorted(tags.items())}, fh)


def face_normals(mesh, normalize=True):
    """Per-face normals; unnormalized value is twice the face area vector."""
    v = mesh.vertices
    f = mesh.faces
    n = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
    if normalize:
        length = np.linalg.norm(n, axis=1, keepdims=True)
        length[length == 0] = 1.0
        n = n / length
    return n


def vertex_normals(mesh):
    """Area-weighted per-vertex unit normals.

    Raises DegenerateNormalError when every incident face of a referenced
    vertex is degenerate.
    """
    area_n = face_normals(mesh, normalize=False)
    acc = np.zeros_like(mesh.vertices)
    for c in range(3):
        np.add.at(acc, mesh.faces[:, c], area_n)
    length = np.linalg.norm(acc, axis=1)
    referenced = np.zeros(mesh.n_vertices, dtype=bool)
    referenced[mesh.faces.ravel()] = True
    bad = referenced & (length < 1e-14)
    if np.any(bad):
        raise DegenerateNormalError(
            f"zero-area umbrella at vertices {np.flatnonzero(bad)[:10].tolist()}"
        )
    out = np.zeros_like(acc)
    out[referenced] = acc[referenced] / length[referenced, None]
    return out


def subdivide_1to4(mesh):
    """Midpoint 1-to-4 subdivision.

    Each edge gains a midpoint vertex, each face becomes four; original
    vertex positions are untouched, so V' = V + E and F' = 4F. UVs are
    subdivided per corner when present.
    """
    f = mesh.faces
    directed = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
    und = np.sort(directed, axis=1)
    edges, inverse, counts = np.unique(
        und, axis=0, return_inverse=True, return_counts=True
    )
    if np.any(counts > 2):
        bad = edges[np.argmax(counts > 2)]
        raise TopologyError(f"non-manifold edge {tuple(bad.tolist())}")
    nv = mesh.n_vertices
    midpoints = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    new_v = np.concatenate([mesh.vertices, midpoints])

    nf = mesh.n_faces
    # midpoint vertex index per face edge (ab, bc, ca)
    mid = nv + inverse.reshape(3, nf).T
    mab, mbc, mca = mid[:, 0], mid[:, 1], mid[:, 2]
    a, b, c = f[:, 0], f[:, 1], f[:, 2]
    new_f = np.concatenate(
        [
            np.stack([a, mab, mca], axis=1),
            np.stack([b, mbc, mab], axis=1),
            np.stack([c, mca, mbc], axis=1),
            np.stack([mab, mbc, mca], axis=1),
        ]
    )
    new_uv = None
    if mesh.uv is not None:
        uv = mesh.uv
        uab = 0.5 * (uv[:, 0] + uv[:, 1])
        ubc = 0.5 * (uv[:, 1] + uv[:, 2])
        uca = 0.5 * (uv[:, 2] + uv[:, 0])
        new_uv = np.concatenate(
            [
                np.stack([uv[:, 0], uab, uca], axis=1),
                np.stack([uv[:, 1], ubc, uab], axis=1),
                np.stack([uv[:, 2], uca, ubc], axis=1),
                np.stack([uab, ubc, uca], axis=1),
            ]
        )
    return TriMesh(new_v, new_f, uv=new_uv, tags=mesh.tags)


def mirror_correspondence(mesh, plane_axis="x", tolerance=1e-6):
    """Pair each vertex with its reflection about the given coordinate plane.

    Vertices whose reflection lands within tolerance of themselves go to
    `fixed`. Raises AsymmetryError listing offending indices when a vertex
    has no counterpart within tolerance.
    """
    axis = AXES[plane_axis] if isinstance(plane_axis, str) else int(plane_axis)
    v = mesh.vertices
    reflected = v.copy()
    reflected[:, axis] = -reflected[:, axis]
    tree = cKDTree(v)
    dist, idx = tree.query(reflected)
    missing = np.flatnonzero(dist > tolerance)
    if missing.size:
        raise AsymmetryError(
            f"{missing.size} vertices lack a mirror counterpart within "
            f"{tolerance}: first {missing[:10].tolist()}",
            offending=missing,
        )
    n = len(v)
    self_sym = idx == np.arange(n)
    # involution check: partner of my partner must be me
    if not np.array_equal(idx[idx], np.arange(n)):
        bad = np.flatnonzero(idx[idx] != np.arange(n))
        raise AsymmetryError(
            f"mirror pairing is not an involution at {bad[:10].tolist()}",
            offending=bad,
        )
    fixed = np.flatnonzero(self_sym)
    left = np.flatnonzero(~self_sym & (np.arange(n) < idx))
    pairs = np.stack([left, idx[left]], axis=1)
    return SymmetryMap(pairs, fixed)


def neighbor_means(mesh, positions=None):
    """Mean neighbor position per vertex; errors on isolated vertices."""
    pos = mesh.vertices if positions is None else positions
    adj = mesh.adjacency()
    deg = np.asarray(adj.sum(axis=1)).ravel()
    if np.any(deg == 0):
        raise ConnectivityError(
            f"isolated vertices: {np.flatnonzero(deg == 0)[:10].tolist()}"
        )
    return (adj @ pos) / deg[:, None]
