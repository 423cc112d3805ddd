import numpy as np
import pytest
from scipy import ndimage

from avatarkit.camera import WeakPerspectiveCamera, fit_camera_to_bbox
from avatarkit.errors import (
    AlignmentError,
    AtlasError,
    EmptyVisibilityError,
    ParameterError,
)
from avatarkit.mesh import TriMesh, face_normals, mirror_correspondence
from avatarkit.pipeline import render_textured
from avatarkit.raster import rasterize
from avatarkit.texture import (
    CompleteConfig,
    FlowField,
    UVMask,
    UVSymmetry,
    UVTexture,
    apply_flow,
    bilinear_sample,
    complete_texture,
    nearest_visible_flow,
    project_visible_texture,
    symmetric_composite,
    uv_symmetry_from_mesh,
)


def quad_mesh(z=1.0, flip=False):
    """Unit square in the image plane with a full-square UV atlas."""
    v = [[-0.5, -0.5, z], [0.5, -0.5, z], [0.5, 0.5, z], [-0.5, 0.5, z]]
    f = [[0, 1, 2], [0, 2, 3]]
    uv = [
        [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]],
        [[0.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
    ]
    if flip:
        f = [list(reversed(t)) for t in f]
        uv = [list(reversed(t)) for t in uv]
    return TriMesh(v, f, uv=uv)


def random_mask(shape, visible_fraction, seed):
    rng = np.random.default_rng(seed)
    return UVMask(rng.random(shape) < visible_fraction)


def horizontal_mirror(h, w):
    coords = np.empty((h, w, 2))
    gy, gx = np.mgrid[0:h, 0:w]
    coords[..., 0] = w - 1 - gx
    coords[..., 1] = gy
    return UVSymmetry(coords)


class TestBilinear:
    grid = np.array([[0.0, 1.0], [2.0, 3.0]])

    def test_integer_positions_exact(self):
        assert bilinear_sample(self.grid, (0, 0)) == 0.0
        assert bilinear_sample(self.grid, (1, 1)) == 3.0

    def test_center(self):
        assert bilinear_sample(self.grid, (0.5, 0.5)) == pytest.approx(1.5)

    def test_quarter_lerp(self):
        assert bilinear_sample(self.grid, (0.25, 0.0)) == pytest.approx(0.25)

    def test_out_of_bounds(self):
        with pytest.raises(ParameterError):
            bilinear_sample(self.grid, (1.5, 0.0))

    def test_rgb(self):
        rgb = np.zeros((2, 2, 3))
        rgb[1, 1] = [1.0, 0.5, 0.25]
        np.testing.assert_allclose(
            bilinear_sample(rgb, (0.5, 0.5)), [0.25, 0.125, 0.0625]
        )


class TestProjectVisibleTexture:
    def test_green_quad(self):
        mesh = quad_mesh()
        cam = WeakPerspectiveCamera(100.0, (64.0, 64.0), (128, 128))
        r = rasterize(cam, mesh)
        img = np.zeros((128, 128, 3))
        img[..., 1] = 1.0
        tex, mask, info = project_visible_texture(
            mesh, cam, img, r.face_visible, size=(64, 64)
        )
        assert info["skipped_zero_uv_faces"] == 0
        assert mask.bits.mean() > 0.95  # full atlas covered
        np.testing.assert_allclose(tex.values[mask.bits, 1], 1.0)
        np.testing.assert_allclose(tex.values[mask.bits, 0], 0.0)

    def test_backfacing_empty(self):
        mesh = quad_mesh(flip=True)
        cam = WeakPerspectiveCamera(100.0, (64.0, 64.0), (128, 128))
        r = rasterize(cam, mesh)
        tex, mask, _ = project_visible_texture(
            mesh, cam, np.ones((128, 128, 3)), r.face_visible, size=(64, 64)
        )
        assert not mask.bits.any()
        np.testing.assert_array_equal(tex.values, 0.0)

    def test_no_atlas(self, tetra):
        cam = WeakPerspectiveCamera(10.0, (16.0, 16.0), (32, 32))
        with pytest.raises(AtlasError):
            project_visible_texture(tetra, cam, np.ones((32, 32)), [True] * 4)

    def test_image_roundtrip(self, template):
        # bake a smooth gradient, re-render, compare away from the contour
        # and from grazing faces
        cam = fit_camera_to_bbox(template.vertices, (448, 448))
        r = rasterize(cam, template)
        ys, xs = np.mgrid[0:448, 0:448]
        img = (xs + ys) / (2.0 * 447.0)
        tex, mask, _ = project_visible_texture(
            template, cam, img, r.face_visible, face_index=r.face_index, size=(256, 256)
        )
        back = render_textured(template, cam, tex)
        interior = ndimage.binary_erosion(r.mask.bits, iterations=3)
        nz = np.abs(face_normals(template)[:, 2])
        frontal = np.zeros_like(interior)
        frontal[r.mask.bits] = nz[r.face_index[r.mask.bits]] > 0.3
        sel = interior & frontal
        assert sel.sum() > 1000
        err = np.abs(back[..., 0][sel] - img[sel])
        assert err.max() < 2.0 / 255.0


class TestNearestVisibleFlow:
    def test_visible_identity(self):
        mask = random_mask((16, 16), 0.5, seed=0)
        flow = nearest_visible_flow(mask)
        ys, xs = np.nonzero(mask.bits)
        np.testing.assert_array_equal(flow.coords[ys, xs, 0], xs)
        np.testing.assert_array_equal(flow.coords[ys, xs, 1], ys)

    def test_nearest_source(self):
        bits = np.zeros((8, 8), dtype=bool)
        bits[2, 2] = True
        bits[7, 7] = True
        flow = nearest_visible_flow(UVMask(bits))
        np.testing.assert_array_equal(flow.coords[0, 0], [2, 2])
        np.testing.assert_array_equal(flow.coords[7, 6], [7, 7])

    def test_row_major_tie_break(self):
        bits = np.zeros((3, 3), dtype=bool)
        for x, y in [(1, 0), (0, 1), (2, 1), (1, 2)]:
            bits[y, x] = True
        flow = nearest_visible_flow(UVMask(bits))
        np.testing.assert_array_equal(flow.coords[1, 1], [1, 0])

    def test_source_always_visible(self):
        mask = random_mask((32, 32), 0.2, seed=3)
        flow = nearest_visible_flow(mask)
        xi = flow.coords[..., 0].astype(int)
        yi = flow.coords[..., 1].astype(int)
        assert mask.bits[yi, xi].all()

    def test_empty_mask(self):
        with pytest.raises(EmptyVisibilityError):
            nearest_visible_flow(UVMask(np.zeros((4, 4), dtype=bool)))

    def test_symmetry_preference(self):
        h, w = 8, 8
        bits = np.zeros((h, w), dtype=bool)
        bits[:, :4] = True
        sym = horizontal_mirror(h, w)
        plain = nearest_visible_flow(UVMask(bits))
        pref = nearest_visible_flow(UVMask(bits), symmetry=sym, symmetry_preference=True)
        # far from the seam the mirrored texel is closer to the symmetry axis
        # than gamma times the plain nearest distance, so it wins
        np.testing.assert_array_equal(plain.coords[3, 6], [3, 3])
        np.testing.assert_array_equal(pref.coords[3, 6], [1, 3])
        # mirrored sources must still be visible
        xi = pref.coords[..., 0].astype(int)
        yi = pref.coords[..., 1].astype(int)
        assert bits[yi, xi].all()


class TestApplyFlow:
    def test_identity_bit_exact(self):
        rng = np.random.default_rng(0)
        tex = UVTexture(rng.random((6, 5, 3)))
        gy, gx = np.mgrid[0:6, 0:5]
        flow = FlowField(np.stack([gx, gy], axis=-1).astype(float))
        out = apply_flow(tex, flow)
        np.testing.assert_array_equal(out.values, tex.values)

    def test_shift(self):
        tex = UVTexture(np.arange(12, dtype=float).reshape(2, 2, 3))
        flow = FlowField(np.zeros((2, 2, 2)))  # all texels read (0, 0)
        out = apply_flow(tex, flow)
        np.testing.assert_array_equal(out.values, np.broadcast_to(tex.values[0, 0], (2, 2, 3)))

    def test_integer_flow_invents_no_colors(self):
        rng = np.random.default_rng(1)
        tex = UVTexture(rng.random((8, 8, 3)))
        coords = np.stack(
            [rng.integers(0, 8, (8, 8)), rng.integers(0, 8, (8, 8))], axis=-1
        ).astype(float)
        out = apply_flow(tex, FlowField(coords))
        palette = {tuple(v) for v in tex.values.reshape(-1, 3)}
        assert all(tuple(v) in palette for v in out.values.reshape(-1, 3))

    def test_shape_mismatch(self):
        with pytest.raises(AlignmentError):
            apply_flow(UVTexture(np.zeros((2, 2, 3))), FlowField(np.zeros((3, 3, 2))))


class TestSymmetricComposite:
    def test_fully_visible_unchanged(self):
        rng = np.random.default_rng(0)
        tex = UVTexture(rng.random((8, 8, 3)))
        mask = UVMask(np.ones((8, 8), dtype=bool))
        out_tex, out_mask = symmetric_composite(tex, mask, horizontal_mirror(8, 8))
        np.testing.assert_array_equal(out_tex.values, tex.values)
        assert out_mask.bits.all()

    def test_half_visible_filled_from_mirror(self):
        rng = np.random.default_rng(1)
        tex = UVTexture(np.where(np.arange(8)[None, :, None] < 4, rng.random((8, 8, 3)), 0.0))
        bits = np.zeros((8, 8), dtype=bool)
        bits[:, :4] = True
        out_tex, out_mask = symmetric_composite(tex, UVMask(bits), horizontal_mirror(8, 8))
        assert out_mask.bits.all()
        np.testing.assert_array_equal(out_tex.values[:, 4:], tex.values[:, 3::-1])

    def test_idempotent(self):
        rng = np.random.default_rng(2)
        tex = UVTexture(rng.random((16, 16, 3)))
        mask = random_mask((16, 16), 0.4, seed=5)
        # an asymmetric, partly out-of-range mirror map exercises the
        # involution filter
        coords = np.empty((16, 16, 2))
        gy, gx = np.mgrid[0:16, 0:16]
        coords[..., 0] = 15 - gx + 0.3 * np.sin(gy)
        coords[..., 1] = gy
        sym = UVSymmetry(coords)
        t1, m1 = symmetric_composite(tex, mask, sym)
        t2, m2 = symmetric_composite(t1, m1, sym)
        np.testing.assert_array_equal(t2.values, t1.values)
        np.testing.assert_array_equal(m2.bits, m1.bits)

    def test_both_sides_invisible_stay_invisible(self):
        tex = UVTexture(np.zeros((4, 4, 3)))
        bits = np.zeros((4, 4), dtype=bool)
        bits[0, 0] = True
        out_tex, out_mask = symmetric_composite(tex, UVMask(bits), horizontal_mirror(4, 4))
        assert out_mask.bits[0, 3]  # mirror of the visible texel
        assert not out_mask.bits[1:].any()


class TestCompleteTexture:
    def test_identity_when_fully_visible(self):
        rng = np.random.default_rng(0)
        tex = UVTexture(rng.random((16, 16, 3)))
        out = complete_texture(tex, UVMask(np.ones((16, 16), dtype=bool)))
        np.testing.assert_array_equal(out.values, tex.values)

    def test_sixty_percent_masked(self):
        rng = np.random.default_rng(7)
        tex = UVTexture(rng.random((64, 64, 3)))
        mask = random_mask((64, 64), 0.4, seed=11)
        vals = np.where(mask.bits[..., None], tex.values, 0.0)
        out = complete_texture(UVTexture(vals), mask)
        assert np.isfinite(out.values).all()
        np.testing.assert_array_equal(out.values[mask.bits], tex.values[mask.bits])

    def test_constant_color_preserved(self):
        color = np.array([0.2, 0.5, 0.8])
        mask = random_mask((32, 32), 0.3, seed=1)
        vals = np.where(mask.bits[..., None], color, 0.0)
        out = complete_texture(UVTexture(vals), mask, symmetry=horizontal_mirror(32, 32))
        np.testing.assert_allclose(out.values, np.broadcast_to(color, (32, 32, 3)))

    def test_smooth_leaves_visible_alone(self):
        rng = np.random.default_rng(3)
        tex = UVTexture(rng.random((32, 32, 3)))
        mask = random_mask((32, 32), 0.5, seed=2)
        out = complete_texture(
            UVTexture(np.where(mask.bits[..., None], tex.values, 0.0)),
            mask,
            config=CompleteConfig(smooth=True, smooth_radius=1.0),
        )
        np.testing.assert_array_equal(out.values[mask.bits], tex.values[mask.bits])


class TestUVSymmetryFromMesh:
    def test_involution_within_one_texel(self, template):
        sym_map = mirror_correspondence(template, "x")
        sym = uv_symmetry_from_mesh(template, sym_map, size=(128, 128))
        mapped = sym.mapped()
        assert mapped.sum() > 0.3 * mapped.size
        ys, xs = np.nonzero(mapped)
        tgt = np.round(sym.coords[ys, xs]).astype(int)
        back = sym.coords[tgt[:, 1], tgt[:, 0]]
        ok = np.isfinite(back).all(axis=1)
        err = np.linalg.norm(back[ok] - np.stack([xs, ys], axis=1)[ok], axis=1)
        assert err.max() <= 1.0

    def test_no_atlas(self, tetra):
        sym_map = mirror_correspondence(quad_mesh(), "x")
        with pytest.raises(AtlasError):
            uv_symmetry_from_mesh(tetra, sym_map)
