import numpy as np
import pytest

from avatarkit.errors import (
    AsymmetryError,
    DegenerateNormalError,
    MeshFormatError,
    TopologyError,
)
from avatarkit.mesh import (
    SymmetryMap,
    TriMesh,
    face_normals,
    load_mesh,
    load_tags,
    mirror_correspondence,
    save_mesh,
    save_tags,
    subdivide_1to4,
    vertex_normals,
)
from avatarkit.templates import body_template, full_template

from conftest import tetrahedron


def closed_random_mesh(seed, n_base=16):
    """Random closed convex mesh: convex hull of random points."""
    from scipy.spatial import ConvexHull

    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(n_base, 3))
    hull = ConvexHull(pts)
    verts = pts[np.unique(hull.simplices)]
    remap = {int(old): i for i, old in enumerate(np.unique(hull.simplices))}
    faces = np.array([[remap[int(i)] for i in tri] for tri in hull.simplices])
    # orient all faces outward (hull simplices are not consistently wound)
    centroid = verts.mean(axis=0)
    mesh = TriMesh(verts, faces)
    fn = face_normals(mesh, normalize=False)
    centers = verts[faces].mean(axis=1)
    flip = np.einsum("ij,ij->i", fn, centers - centroid) < 0
    faces[flip] = faces[flip][:, [0, 2, 1]]
    return TriMesh(verts, faces)


class TestTriMesh:
    def test_invariants(self, tetra):
        assert tetra.n_vertices == 4
        assert tetra.n_faces == 4
        assert len(tetra.edges()) == 6

    def test_index_out_of_range(self):
        with pytest.raises(TopologyError):
            TriMesh(np.zeros((3, 3)), [[0, 1, 3]])

    def test_degenerate_face(self):
        with pytest.raises(TopologyError):
            TriMesh(np.zeros((3, 3)), [[0, 1, 1]])

    def test_uv_shape_checked(self, tetra):
        with pytest.raises(TopologyError):
            TriMesh(tetra.vertices, tetra.faces, uv=np.zeros((2, 3, 2)))


class TestObjIO:
    def test_tetrahedron_roundtrip(self, tmp_path, tetra):
        path = tmp_path / "tet.obj"
        save_mesh(path, tetra)
        back = load_mesh(path)
        assert back.n_vertices == 4 and back.n_faces == 4
        np.testing.assert_array_equal(back.vertices, tetra.vertices)
        np.testing.assert_array_equal(back.faces, tetra.faces)

    def test_uv_roundtrip(self, tmp_path, template):
        path = tmp_path / "tpl.obj"
        save_mesh(path, template)
        back = load_mesh(path)
        np.testing.assert_allclose(back.uv, template.uv, atol=1e-8)

    def test_quad_face_rejected(self, tmp_path):
        path = tmp_path / "quad.obj"
        path.write_text("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n")
        with pytest.raises(TopologyError):
            load_mesh(path)

    def test_parse_error_carries_line_number(self, tmp_path):
        path = tmp_path / "bad.obj"
        path.write_text("v 0 0 0\nv zero 0 0\n")
        with pytest.raises(MeshFormatError) as exc:
            load_mesh(path)
        assert exc.value.line == 2

    def test_negative_indices(self, tmp_path):
        path = tmp_path / "neg.obj"
        path.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n")
        mesh = load_mesh(path)
        np.testing.assert_array_equal(mesh.faces, [[0, 1, 2]])

    def test_save_deterministic(self, tmp_path, template):
        a, b = tmp_path / "a.obj", tmp_path / "b.obj"
        save_mesh(a, template)
        save_mesh(b, template)
        assert a.read_bytes() == b.read_bytes()

    def test_tags_sidecar(self, tmp_path):
        path = tmp_path / "tags.json"
        save_tags(path, {"face": [1, 2], "toes": [7]})
        tags = load_tags(path)
        np.testing.assert_array_equal(tags["face"], [1, 2])
        np.testing.assert_array_equal(tags["toes"], [7])


class TestNormals:
    def test_cube_corner_normals(self):
        # axis-aligned cube corners: area-weighted normal = (+-1,+-1,+-1)/sqrt(3)
        verts = np.array(
            [[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)], dtype=float
        )
        quads = [
            (0, 1, 3, 2),  # x=0
            (4, 6, 7, 5),  # x=1
            (0, 4, 5, 1),  # y=0
            (2, 3, 7, 6),  # y=1
            (0, 2, 6, 4),  # z=0
            (1, 5, 7, 3),  # z=1
        ]
        faces = []
        for a, b, c, d in quads:
            faces += [[a, b, c], [a, c, d]]
        cube = TriMesh(verts, faces)
        vn = vertex_normals(cube)
        expect = (verts - 0.5) / np.linalg.norm(verts - 0.5, axis=1, keepdims=True)
        # corner triangulation is asymmetric, so compare direction loosely but
        # require the exact (+-1,+-1,+-1)/sqrt(3) octant membership
        assert np.all(np.sign(vn) == np.sign(expect))

    def test_flat_sheet(self):
        sheet = TriMesh(
            [[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], [[0, 1, 2], [0, 2, 3]]
        )
        vn = vertex_normals(sheet)
        np.testing.assert_allclose(vn, np.tile([0, 0, 1.0], (4, 1)), atol=1e-12)

    def test_sphere_radial(self, sphere):
        vn = vertex_normals(sphere)
        radial = sphere.vertices / np.linalg.norm(sphere.vertices, axis=1, keepdims=True)
        ang = np.degrees(np.arccos(np.clip(np.einsum("ij,ij->i", vn, radial), -1, 1)))
        assert ang.max() < 5.0

    def test_outward_on_closed_convex(self):
        for seed in range(5):
            mesh = closed_random_mesh(seed)
            vn = vertex_normals(mesh)
            rel = mesh.vertices - mesh.vertices.mean(axis=0)
            assert np.all(np.einsum("ij,ij->i", vn, rel) > 0)

    def test_degenerate_umbrella(self):
        mesh = TriMesh([[0, 0, 0], [1, 0, 0], [2, 0, 0]], [[0, 1, 2]])
        with pytest.raises(DegenerateNormalError):
            vertex_normals(mesh)


class TestSubdivide:
    def test_tetrahedron_counts(self, tetra):
        sub = subdivide_1to4(tetra)
        assert sub.n_vertices == 10 and sub.n_faces == 16

    def test_single_triangle(self):
        tri = TriMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])
        sub = subdivide_1to4(tri)
        assert sub.n_vertices == 6 and sub.n_faces == 4

    def test_full_template_count(self):
        tpl = full_template()
        assert (tpl.n_vertices, tpl.n_faces) == (6890, 13776)
        sub = subdivide_1to4(tpl)
        assert sub.n_vertices == 27554
        assert sub.n_faces == 4 * 13776

    def test_original_positions_bit_exact(self, template):
        sub = subdivide_1to4(template)
        assert np.array_equal(sub.vertices[: template.n_vertices], template.vertices)

    def test_euler_characteristic_preserved(self):
        for seed in range(5):
            mesh = closed_random_mesh(seed)
            sub = subdivide_1to4(mesh)
            chi0 = mesh.n_vertices - len(mesh.edges()) + mesh.n_faces
            chi1 = sub.n_vertices - len(sub.edges()) + sub.n_faces
            assert chi0 == chi1 == 2

    def test_vplus_e_property(self):
        for seed in range(8):
            mesh = closed_random_mesh(seed, n_base=10 + seed)
            sub = subdivide_1to4(mesh)
            assert sub.n_vertices == mesh.n_vertices + len(mesh.edges())
            assert sub.n_faces == 4 * mesh.n_faces

    def test_uv_subdivided(self, template):
        sub = subdivide_1to4(template)
        assert sub.uv.shape == (sub.n_faces, 3, 2)
        # the three corner sub-faces keep the original corner UVs
        np.testing.assert_array_equal(
            sub.uv[: template.n_faces, 0], template.uv[:, 0]
        )

    def test_non_manifold_edge(self):
        mesh = TriMesh(
            [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1], [0, 0, -1]],
            [[0, 1, 2], [0, 1, 3], [0, 1, 4]],
        )
        with pytest.raises(TopologyError):
            subdivide_1to4(mesh)


class TestMirror:
    def test_two_points(self):
        mesh = TriMesh(
            [[1, 0, 0], [-1, 0, 0], [0, 1, 0]], [[0, 1, 2]]
        )
        sym = mirror_correspondence(mesh, "x", tolerance=1e-6)
        assert len(sym.pairs) == 1 and set(sym.pairs[0]) == {0, 1}
        np.testing.assert_array_equal(sym.fixed, [2])

    def test_on_plane_fixed(self):
        mesh = TriMesh([[0, 1, 0], [0, 0, 1], [0, -1, 0]], [[0, 1, 2]])
        sym = mirror_correspondence(mesh, "x")
        assert len(sym.pairs) == 0 and len(sym.fixed) == 3

    def test_asymmetric_raises(self):
        mesh = TriMesh([[1, 0, 0], [0.5, 2, 0], [0, 1, 0]], [[0, 1, 2]])
        with pytest.raises(AsymmetryError):
            mirror_correspondence(mesh, "x", tolerance=1e-6)

    def test_template_involution(self, template):
        sym = mirror_correspondence(template, "x", tolerance=5e-3)
        perm = sym.permutation(template.n_vertices)
        assert np.all(perm >= 0)
        np.testing.assert_array_equal(perm[perm], np.arange(template.n_vertices))

    def test_full_template_involution(self):
        tpl = full_template()
        sym = mirror_correspondence(tpl, "x", tolerance=5e-3)
        perm = sym.permutation(tpl.n_vertices)
        np.testing.assert_array_equal(perm[perm], np.arange(tpl.n_vertices))

    def test_json_roundtrip(self, tmp_path, template):
        sym = mirror_correspondence(template, "x", tolerance=5e-3)
        path = tmp_path / "sym.json"
        sym.to_json(path)
        back = SymmetryMap.from_json(path)
        np.testing.assert_array_equal(back.pairs, sym.pairs)
        np.testing.assert_array_equal(back.fixed, sym.fixed)
