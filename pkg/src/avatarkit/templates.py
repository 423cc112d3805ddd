"""Procedural body template and its handle/label assets.

The template is a closed, bilaterally symmetric (about the x=0 plane...
note: left/right run along +x/-x) ellipsoid triangulated as a UV sphere
with an equirectangular UV atlas. With the default resolution it carries
exactly 6890 vertices and 13776 faces, the vertex/face budget the rest of
the pipeline is sized for; `subdivide_1to4` takes it to 27554 vertices.

Joint handle vertex sets and the face/fingers/toes exclusion labels are
generated from canonical surface points and shipped as editable JSON
sidecar assets.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .handles import JOINT_NAMES, JointHandleSet
from .mesh import TriMesh

FULL_RES = (84, 83)  # slices, stacks -> 6890 vertices / 13776 faces
HARNESS_RES = (28, 25)  # 674 vertices / 1344 faces, fast enough for sweeps

# canonical joint locations as (theta/pi, phi) on the ellipsoid; left = +x
_JOINT_ANGLES = {
    "head": (0.06, 0.5 * np.pi),
    "waist": (0.50, 0.5 * np.pi),
    "l_shoulder": (0.30, 0.0),
    "r_shoulder": (0.30, np.pi),
    "l_elbow": (0.42, 0.0),
    "r_elbow": (0.42, np.pi),
    "l_knee": (0.68, 0.0),
    "r_knee": (0.68, np.pi),
    "l_ankle": (0.88, 0.0),
    "r_ankle": (0.88, np.pi),
}


def body_template(slices=HARNESS_RES[0], stacks=HARNESS_RES[1], radii=(0.25, 0.15, 0.9)):
    """Closed triangulated ellipsoid with per-corner equirectangular UVs.

    V = (stacks - 1) * slices + 2 and F = 2 * slices * (stacks - 1);
    `slices` must be even so the vertex set is mirror-symmetric in x.
    """
    if slices % 2 != 0:
        raise ValueError("slices must be even for x-mirror symmetry")
    rx, ry, rz = radii
    # height runs along +y (image vertical), depth along z (camera axis);
    # the embedding is the polar construction rotated by Rx(-90 deg), which
    # keeps the face winding outward.
    verts = [(0.0, rz, 0.0)]
    ring_theta = np.pi * np.arange(1, stacks) / stacks
    phi = 2.0 * np.pi * np.arange(slices) / slices
    for th in ring_theta:
        st, ct = np.sin(th), np.cos(th)
        for ph in phi:
            verts.append((rx * st * np.cos(ph), rz * ct, -ry * st * np.sin(ph)))
    verts.append((0.0, -rz, 0.0))
    verts = np.asarray(verts)
    south = len(verts) - 1

    def ring(i, j):
        return 1 + i * slices + (j % slices)

    faces = []
    uvs = []
    n_rings = stacks - 1

    def corner_uv(i, j):
        # i = -1 north pole, n_rings = south pole; j may exceed slices (wrap)
        if i == -1:
            return None, 0.0
        if i == n_rings:
            return None, 1.0
        return j / slices, (i + 1) / stacks

    def face_with_uv(tri_idx, tri_ij):
        us = []
        vs = []
        for i, j in tri_ij:
            u, v = corner_uv(i, j)
            us.append(u)
            vs.append(v)
        known = [u for u in us if u is not None]
        # seam faces: unwrap small u values so the triangle is contiguous
        if max(known) - min(known) > 0.5:
            known = [u + 1.0 if u < 0.5 else u for u in known]
        fill = sum(known) / len(known)
        out = []
        ki = 0
        for u in us:
            if u is None:
                out.append(fill)
            else:
                out.append(known[ki])
                ki += 1
        out = [min(u, 1.0) for u in out]
        faces.append(tri_idx)
        uvs.append([[out[c], vs[c]] for c in range(3)])

    for j in range(slices):
        face_with_uv([0, ring(0, j), ring(0, j + 1)], [(-1, j), (0, j), (0, j + 1)])
    for i in range(n_rings - 1):
        for j in range(slices):
            a, b = (i, j), (i, j + 1)
            d, c = (i + 1, j), (i + 1, j + 1)
            face_with_uv(
                [ring(*a), ring(*d), ring(*c)], [a, d, c]
            )
            face_with_uv(
                [ring(*a), ring(*c), ring(*b)], [a, c, b]
            )
    last = n_rings - 1
    for j in range(slices):
        face_with_uv(
            [south, ring(last, j + 1), ring(last, j)],
            [(n_rings, j), (last, j + 1), (last, j)],
        )

    mesh = TriMesh(verts, np.asarray(faces), uv=np.asarray(uvs))
    return TriMesh(mesh.vertices, mesh.faces, uv=mesh.uv, tags=default_tags(mesh, radii))


def full_template(radii=(0.25, 0.15, 0.9)):
    """The full-resolution template: 6890 vertices, 13776 faces."""
    return body_template(*FULL_RES, radii=radii)


def default_tags(mesh, radii=(0.25, 0.15, 0.9)):
    """Face/fingers/toes exclusion labels for anchor selection."""
    rz = radii[2]
    height = mesh.vertices[:, 1]
    return {
        "face": np.flatnonzero(height > 0.92 * rz),
        "fingers": np.array([], dtype=np.int64),
        "toes": np.flatnonzero(height < -0.92 * rz),
    }


def default_joint_handles(mesh, k_per_joint=8, radii=(0.25, 0.15, 0.9)):
    """Joint handle sets: the k vertices nearest each canonical joint point."""
    rx, ry, rz = radii
    tree = cKDTree(mesh.vertices)
    taken = set()
    joints = {}
    for name in JOINT_NAMES:
        tfrac, ph = _JOINT_ANGLES[name]
        th = np.pi * tfrac
        target = np.array(
            [rx * np.sin(th) * np.cos(ph), rz * np.cos(th), -ry * np.sin(th) * np.sin(ph)]
        )
        _, idx = tree.query(target, k=4 * k_per_joint)
        chosen = [int(i) for i in np.atleast_1d(idx) if int(i) not in taken][:k_per_joint]
        taken.update(chosen)
        joints[name] = np.asarray(chosen, dtype=np.int64)
    return JointHandleSet(joints)
