import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from tactsim.elastomer import DeformParams
from tactsim.illumination import (
    BASELINE_LIGHTS,
    IlluminationConfig,
    LightSource,
    background_image,
    calibrate_pixel_to_meter,
    measure_contact_span,
    phong_render,
    render_tactile,
    surface_normals,
)

# independent scalar evaluation (mpmath) of the flat membrane under the four baseline LEDs
FLAT_BASELINE_AMBIENT_128 = (190, 174, 189)
FLAT_BASELINE_AMBIENT_100 = (168, 151, 167)


def flat_normals(h=8, w=8):
    n = np.zeros((h, w, 3))
    n[..., 2] = 1.0
    return n


def test_flat_heightmap_normals():
    n = surface_normals(np.full((6, 9), 0.004), 5e-5)
    assert np.array_equal(n, flat_normals(6, 9))


def test_ramp_normals_closed_form():
    x = np.arange(12, dtype=float)
    h = np.tile(x, (10, 1))  # h = a*x with a = 1
    n = surface_normals(h, 1.0)
    expected = np.array([-1.0, 0.0, 1.0]) / np.sqrt(2.0)
    np.testing.assert_allclose(n[1:-1, 1:-1], np.broadcast_to(expected, (8, 10, 3)), rtol=0, atol=1e-9)


def test_normals_rotate_with_heightmap():
    rng = np.random.default_rng(4)
    h = rng.uniform(0, 1e-3, size=(20, 20))
    n = surface_normals(h, 5e-5)
    # rot90 counter-clockwise: new[y, x] = old[x, W-1-y]
    nr = surface_normals(np.rot90(h), 5e-5)
    rotated = np.rot90(n)
    expected = np.stack([rotated[..., 1], -rotated[..., 0], rotated[..., 2]], axis=-1)
    np.testing.assert_allclose(nr[1:-1, 1:-1], expected[1:-1, 1:-1], rtol=0, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(c=st.floats(-1e-2, 1e-2), seed=st.integers(0, 1000))
def test_normals_ignore_constant_offset(c, seed):
    h = np.random.default_rng(seed).uniform(0, 1e-3, size=(9, 9))
    np.testing.assert_allclose(surface_normals(h + c, 5e-5), surface_normals(h, 5e-5), rtol=0, atol=1e-9)


def test_ambient_only():
    cfg = IlluminationConfig(lights=(), ambient=(100, 100, 100), k_a=0.8)
    img = phong_render(flat_normals(), cfg)
    assert img.dtype == np.uint8
    assert np.all(img == 80)


def test_single_axis_diffuse():
    light = LightSource((0, 0, 1), (255, 255, 255), k_d=0.5, k_s=0.0)
    cfg = IlluminationConfig(lights=(light,), ambient=(0, 0, 0), k_a=0.0)
    assert np.all(phong_render(flat_normals(), cfg) == 128)


@pytest.mark.parametrize("ambient,expected", [(128, FLAT_BASELINE_AMBIENT_128), (100, FLAT_BASELINE_AMBIENT_100)])
def test_flat_baseline_golden(ambient, expected):
    cfg = IlluminationConfig(ambient=(ambient,) * 3)
    img = phong_render(flat_normals(5, 7), cfg)
    assert np.all(img == np.array(expected, dtype=np.uint8))


def test_matches_scalar_oracle_on_random_normals():
    rng = np.random.default_rng(11)
    v = rng.normal(size=(6, 6, 3))
    v[..., 2] = np.abs(v[..., 2]) + 0.2
    n = v / np.linalg.norm(v, axis=-1, keepdims=True)
    cfg = IlluminationConfig(ambient=(90, 110, 70), k_a=0.7)
    lights = [(tuple(l.to_light()), l.color, l.k_d, l.k_s) for l in BASELINE_LIGHTS]
    img = phong_render(n, cfg)
    for y in range(6):
        for x in range(6):
            assert tuple(img[y, x]) == oracles.phong_pixel(tuple(n[y, x]), lights, cfg.ambient, 0.7, 5.0)


@pytest.mark.parametrize("t", [0.25, 0.5, 1.0, 2.0])
def test_diffuse_scales_linearly_with_kd(t):
    n = flat_normals(3, 3)
    d = np.array([0.3, -0.2, 0.9])
    d /= np.linalg.norm(d)
    light = LightSource(tuple(d), (100, 100, 100), k_d=0.3 * t / 2, k_s=0.0)
    img = phong_render(n, IlluminationConfig(lights=(light,), ambient=(0, 0, 0), k_a=0.0))
    assert np.all(img == np.floor(0.3 * t / 2 * d[2] * 100 + 0.5))


def test_monotone_in_ka_and_channels_in_range():
    rng = np.random.default_rng(2)
    h = rng.uniform(0, 2e-3, size=(32, 32))
    n = surface_normals(h, 5e-5)
    prev = None
    for k_a in (0.0, 0.3, 0.6, 1.0):
        img = phong_render(n, IlluminationConfig(k_a=k_a, ambient=(200, 200, 200)))
        if prev is not None:
            assert np.all(img >= prev)
        prev = img


def test_flat_depth_renders_uniform_background():
    depth = np.full((48, 64), 0.05)
    img = render_tactile(depth, DeformParams(), IlluminationConfig())
    assert np.all(img == np.array(FLAT_BASELINE_AMBIENT_128, dtype=np.uint8))
    assert np.array_equal(img, background_image((48, 64), IlluminationConfig()))


def test_background_image_as_ambient():
    bg = np.random.default_rng(5).integers(0, 256, size=(12, 10, 3), dtype=np.uint8)
    cfg = IlluminationConfig(lights=(), ambient=bg, k_a=1.0)
    assert np.array_equal(phong_render(flat_normals(12, 10), cfg), bg)
    with pytest.raises(ValueError, match="does not match"):
        phong_render(flat_normals(4, 4), cfg)


def test_light_and_config_validation():
    with pytest.raises(ValueError):
        LightSource((0, 0, 0), (1, 1, 1), 0.5, 0.5)
    with pytest.raises(ValueError):
        LightSource((0, 0, 1), (300, 1, 1), 0.5, 0.5)
    with pytest.raises(ValueError):
        LightSource((0, 0, 1), (1, 1, 1), 1.5, 0.5)
    with pytest.raises(ValueError):
        IlluminationConfig(k_a=-0.1)
    with pytest.raises(ValueError):
        IlluminationConfig(pixel_to_meter=0)


def test_quadrant_lobes_follow_led_layout(sphere_depth):
    img = render_tactile(sphere_depth, DeformParams(), IlluminationConfig()).astype(float)
    bg = np.array(FLAT_BASELINE_AMBIENT_128, dtype=float)
    assert np.all(img[:20, :20] == bg)
    delta = img - bg
    h, w = sphere_depth.shape
    cy, cx = h // 2, w // 2
    yy, xx = np.mgrid[0:h, 0:w]
    dy, dx = yy - cy, xx - cx
    ring = (np.hypot(dx, dy) > 20) & (np.hypot(dx, dy) < 90)
    quads = {
        "top": ring & (dy < -np.abs(dx)),
        "bottom": ring & (dy > np.abs(dx)),
        "left": ring & (dx < -np.abs(dy)),
        "right": ring & (dx > np.abs(dy)),
    }
    mean = {k: delta[m].mean(axis=0) for k, m in quads.items()}
    # white lobe on top: brightest overall, every channel lifted
    assert np.all(mean["top"] > 0)
    assert mean["top"].sum() == max(m.sum() for m in mean.values())
    assert np.argmax(mean["right"]) == 2  # blue
    assert np.argmax(mean["bottom"]) == 0  # red
    assert np.argmax(mean["left"]) == 1  # green


def test_render_is_deterministic(sphere_depth):
    a = render_tactile(sphere_depth, DeformParams(), IlluminationConfig())
    b = render_tactile(sphere_depth, DeformParams(), IlluminationConfig())
    assert a.tobytes() == b.tobytes()


@pytest.mark.parametrize("span,expected", [(100, 5.0e-5), (125, 4.0e-5)])
def test_calibration_examples(span, expected):
    assert calibrate_pixel_to_meter(span, 0.005) == pytest.approx(expected, rel=1e-15)


def test_contact_span():
    d = np.full((10, 20), 0.05)
    d[4, 3:15] = 0.02
    d[5, 6:9] = 0.02
    assert measure_contact_span(d, 0.03) == 12
    assert measure_contact_span(d, 0.03, row=5) == 3
    with pytest.raises(ValueError):
        measure_contact_span(np.full((5, 5), 1.0), 0.03)
