import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from extremal.field import (
    BoundsError, FieldError, NormalField, RenderSpec, ScalarField, TILT_UNDEFINED, add_noise, gen_blob,
    gen_ring_stimulus, gen_sigmoid_bump, gradient, hessian, light_from_angles,
    normals_from_height, normals_from_slant_tilt, render, slant_of_height, slant_tilt,
)
from extremal.morse import MAXIMUM, build_ms_complex, morse_check, simplify

YX = lambda n: np.mgrid[0:n, 0:n].astype(float)


def test_scalar_field_validation():
    with pytest.raises(FieldError):
        ScalarField(np.zeros((2, 5)))
    with pytest.raises(FieldError):
        ScalarField(np.array([[0, 1, np.nan]] * 3))
    with pytest.raises(FieldError):
        ScalarField(np.zeros((3, 3)), spacing=0)
    f = ScalarField(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        f.values[0, 0] = 1


def test_normal_field_validation():
    n = np.zeros((4, 4, 3))
    n[..., 2] = 1
    NormalField(n)
    with pytest.raises(FieldError):
        NormalField(n * 2)
    n[..., 2] = -1
    with pytest.raises(FieldError):
        NormalField(n)


def test_render_spec_validation():
    with pytest.raises(FieldError):
        RenderSpec("lambertian", (0, 0, -1))
    with pytest.raises(FieldError):
        RenderSpec("phong")
    with pytest.raises(FieldError):
        RenderSpec("specular", shininess=0)


# -- calculus -----------------------------------------------------------------------

def test_gradient_examples():
    y, x = YX(8)
    assert np.allclose(gradient(ScalarField(np.full((8, 8), 3.0)), 4, 4), 0)
    lin = ScalarField(2 * x + 3 * y)
    for px, py in [(1, 1), (3, 5), (6, 6)]:
        assert np.allclose(gradient(lin, px, py), (2, 3))
    assert gradient(ScalarField(x ** 2), 1, 3)[0] == pytest.approx(2.0)


def test_gradient_refuses_boundary():
    f = ScalarField(np.zeros((5, 5)))
    with pytest.raises(BoundsError):
        gradient(f, 0, 2)
    with pytest.raises(BoundsError):
        hessian(f, 2, 4)


def test_hessian_examples():
    y, x = YX(9)
    x, y = x - 4, y - 4
    assert np.allclose(hessian(ScalarField(x ** 2 - y ** 2), 4, 4), [[2, 0], [0, -2]])
    assert np.allclose(hessian(ScalarField(x * y), 3, 5), [[0, 1], [1, 0]])


def test_hessian_richardson_oracle():
    # the same smooth function on a grid of half the spacing has a 4x smaller O(h^2) error
    f = lambda x, y: np.sin(1.3 * x) * np.cos(0.7 * y) + 0.2 * x * y
    exact = lambda x, y: np.array([[-1.69 * np.sin(1.3 * x) * np.cos(0.7 * y),
                                    -0.91 * np.cos(1.3 * x) * np.sin(0.7 * y) + 0.2],
                                   [-0.91 * np.cos(1.3 * x) * np.sin(0.7 * y) + 0.2,
                                    -0.49 * np.sin(1.3 * x) * np.cos(0.7 * y)]])
    errs = []
    for h in (0.1, 0.05):
        n = int(round(2 / h)) + 1
        c = np.arange(n) * h
        X, Y = np.meshgrid(c, c)
        g = ScalarField(f(X, Y), spacing=h)
        k = (n - 1) // 2
        errs.append(np.abs(hessian(g, k, k) - exact(1.0, 1.0)).max())
    assert errs[1] < errs[0] / 3


@given(arrays(np.float64, (3,), elements=st.floats(-3, 3)), st.floats(0.5, 2))
def test_calculus_exact_on_quadratics(c, spacing):
    y, x = YX(7) * spacing
    f = ScalarField(c[0] * x * x + c[1] * x * y + c[2] * y * y + x - 2 * y, spacing)
    px, py = 3, 2
    X, Y = px * spacing, py * spacing
    assert np.allclose(gradient(f, px, py), (2 * c[0] * X + c[1] * Y + 1, c[1] * X + 2 * c[2] * Y - 2), atol=1e-9)
    assert np.allclose(hessian(f, px, py), [[2 * c[0], c[1]], [c[1], 2 * c[2]]], atol=1e-8)


# -- normals, slant, tilt -------------------------------------------------------------

def test_normals_examples():
    n = normals_from_height(ScalarField(np.full((6, 6), 2.0))).normals
    assert np.allclose(n, (0, 0, 1))
    y, x = YX(6)
    n = normals_from_height(ScalarField(x)).normals
    assert np.allclose(n, np.array([-1, 0, 1]) / np.sqrt(2))


def test_normals_match_analytic_sphere():
    size, R = 256, 120.0
    y, x = YX(size) - 127.5
    r2 = x * x + y * y
    z = np.sqrt(np.clip(R * R - r2, 0, None))
    n = normals_from_height(ScalarField(z)).normals
    exact = np.stack([x, y, z], axis=-1) / R
    inside = np.sqrt(r2) < 0.8 * R
    assert np.abs(n[inside] - exact[inside]).max() < 1e-3
    apex = n[127:129, 127:129].reshape(-1, 3)
    assert np.allclose(apex, (0, 0, 1), atol=1e-2)


def test_slant_tilt_examples():
    s, t = slant_tilt(normals_from_height(ScalarField(np.zeros((5, 5)))))
    assert np.all(s.values == 0)
    assert np.all(np.isnan(t.values)) and np.isnan(TILT_UNDEFINED)
    y, x = YX(6)
    s, t = slant_tilt(normals_from_height(ScalarField(x)))
    assert np.allclose(s.values, np.pi / 4)
    assert np.allclose(t.values, np.pi)


def test_sphere_slant_increases_towards_rim():
    size, R = 256, 120.0
    y, x = YX(size) - 127.5
    r = np.hypot(x, y)
    s = slant_of_height(ScalarField(np.sqrt(np.clip(R * R - r * r, 0, None)))).values
    radii = np.arange(2, 118, 4)
    prof = [s[(r >= a) & (r < a + 1)].mean() for a in radii]
    assert np.all(np.diff(prof) > 0)
    assert prof[-1] > np.radians(70)


@pytest.mark.parametrize("seed", range(5))
def test_grazing_window_slant_peaks_at_rim(seed):
    # a square-root window goes vertical at the border, like an occluding contour
    from extremal.field import boundary_window
    z = 64 * np.sqrt(boundary_window((64, 64))) * (0.8 + 0.2 * gen_blob((64, 64), seed=seed).values)
    s = slant_of_height(ScalarField(z)).values
    y, x = np.unravel_index(np.argmax(s), s.shape)
    assert min(x, y, 63 - x, 63 - y) <= 1
    assert s.max() <= np.pi / 2


@given(st.integers(0, 10_000))
def test_slant_tilt_round_trip(seed):
    f = gen_blob((24, 24), seed=seed, cutoff=3)
    nf = normals_from_height(ScalarField(f.values * 20))
    s, t = slant_tilt(nf)
    ok = np.isfinite(t.values)
    back = normals_from_slant_tilt(s.values, t.values)
    assert np.abs(back[ok] - nf.normals[ok]).max() < 1e-9
    assert s.values.min() >= 0 and s.values.max() <= np.pi / 2


# -- rendering ------------------------------------------------------------------------

def test_render_examples():
    flat = normals_from_height(ScalarField(np.zeros((5, 5))))
    assert np.all(render(flat, RenderSpec("lambertian", (0, 0, 1))).values == 1)
    graze = np.zeros((5, 5, 3))
    graze[..., 0] = 1
    img = render(NormalField(graze), RenderSpec("lambertian", light_from_angles(np.pi / 4, np.pi)))
    assert np.all(img.values == 0)


def test_lambertian_peak_at_slant_minimum():
    h = gen_sigmoid_bump((128, 128), radius=24, height=16)
    img = render(normals_from_height(h), RenderSpec("lambertian", (0, 0, 1))).values
    s = slant_of_height(h).values
    y, x = YX(128) - 63.5
    disk = np.hypot(x, y) <= 20  # the flat surround is slant 0 as well
    s_in = np.where(disk, s, np.inf)
    i_in = np.where(disk, img, -np.inf)
    top = np.array(np.unravel_index(np.argmax(i_in), s.shape))
    low = np.array(np.unravel_index(np.argmin(s_in), s.shape))
    assert np.hypot(*(top - low)) <= 2
    assert np.hypot(*(low - 63.5)) <= 2


def test_render_depends_only_on_normals():
    h1 = gen_blob((32, 32), seed=1)
    h2 = ScalarField(h1.values + 5.0)  # same normals
    for spec in [RenderSpec("lambertian", light_from_angles(0.3, 1.0)), RenderSpec("specular"),
                 RenderSpec("glass-texture", texture_seed=4)]:
        n1 = normals_from_height(h1)
        assert np.array_equal(render(n1, spec).values, render(NormalField(n1.normals.copy()), spec).values)
        a = render(n1, spec).values
        b = render(normals_from_height(h2), spec).values
        assert np.abs(a - b).max() < 1e-9


def test_glass_texture_is_seeded():
    n = normals_from_height(gen_sigmoid_bump((96, 96), radius=16, height=8))
    a = render(n, RenderSpec("glass-texture", texture_seed=1)).values
    b = render(n, RenderSpec("glass-texture", texture_seed=1)).values
    c = render(n, RenderSpec("glass-texture", texture_seed=2)).values
    assert np.array_equal(a, b) and not np.array_equal(a, c)
    assert a.min() >= 0 and a.max() <= 1


# -- scenes -----------------------------------------------------------------------------

def test_sigmoid_bump_zero_height_is_plane():
    z = gen_sigmoid_bump((64, 64), radius=12, height=0.0, base_tilt=0.2)
    cx = build_ms_complex(z)
    assert all(c.virtual or c.position[0] in (0, 63) or c.position[1] in (0, 63) for c in cx.criticals)


def test_sigmoid_bump_peak_at_centre():
    z = gen_sigmoid_bump((256, 256), radius=32, height=1.0)
    y, x = np.unravel_index(np.argmax(z.values), z.shape)
    assert np.hypot(x - 127.5, y - 127.5) <= 1


def test_sigmoid_bump_slant_ring():
    z = gen_sigmoid_bump((128, 128), radius=24, height=16)
    s = slant_of_height(z).values
    y, x = YX(128) - 63.5
    r = np.hypot(x, y)
    prof = np.array([s[(r >= a) & (r < a + 1)].mean() for a in range(0, 60)])
    peak = int(np.argmax(prof))
    assert abs(peak - 24) <= 2
    assert prof[0] < 0.2 * prof[peak] and prof[-1] < 0.2 * prof[peak]


def test_gen_blob_deterministic():
    assert gen_blob((48, 48), seed=7) == gen_blob((48, 48), seed=7)
    assert gen_blob((48, 48), seed=7) != gen_blob((48, 48), seed=8)


def test_gen_blob_cutoff_one_single_maximum():
    for seed in range(20):
        cx = simplify(build_ms_complex(gen_blob((64, 64), seed=seed, cutoff=1)), 0.01)
        assert cx.counts()[MAXIMUM] <= 1


def test_gen_blob_cutoff_eight_is_morse():
    for seed in range(20):
        assert morse_check(gen_blob((128, 128), seed=seed, cutoff=8))["morse"]


def test_ring_stimulus_polarity_relation():
    a = gen_ring_stimulus((128, 128), ring_radius=30).values
    b = gen_ring_stimulus((128, 128), ring_radius=30, polarity="b").values
    y, x = YX(128) - 63.5
    r = np.hypot(x, y)
    assert np.array_equal(a[r >= 30], b[r >= 30])
    inside = r < 29
    assert np.abs(b[inside] - (a.max() + a.min() - a[inside])).max() <= 1e-6


def test_add_noise():
    f = gen_blob((32, 32), seed=0)
    assert add_noise(f, 0.0, 1) == f
    g = add_noise(f, 0.02, 5)
    assert np.abs(g.values - f.values).max() <= 0.02
    assert g == add_noise(f, 0.02, 5)
    with pytest.raises(FieldError):
        add_noise(f, -1)
