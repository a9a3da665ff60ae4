import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from PIL import Image

from tactsim.augment import (
    BUILTIN_TEXTURES,
    AugmentSpec,
    TextureMap,
    _draw,
    augment_batch,
    builtin_textures,
    load_texture,
    perturb_depth,
)
from tactsim.elastomer import DeformParams


def depth_map(h=60, w=80, seed=0):
    rng = np.random.default_rng(seed)
    d = np.full((h, w), 0.04)
    r, c = h // 3, w // 3
    d[r:2 * r, c:2 * c] = rng.uniform(0.028, 0.03, size=(r, c))
    return d


def test_builtin_set():
    tex = builtin_textures()
    assert len(tex) == 12 == len(BUILTIN_TEXTURES)
    assert len({t.name for t in tex}) == 12
    for t in tex:
        assert t.data.min() == 0.0 and t.data.max() == 1.0


def test_zero_amplitude_is_identity():
    d = depth_map()
    spec = AugmentSpec(amplitude_range=(0.0, 0.0))
    out = perturb_depth(d, spec, 3)
    assert out.tobytes() == d.tobytes()


def test_constant_texture_shifts_every_pixel():
    d = depth_map()
    spec = AugmentSpec(textures=(TextureMap(np.ones((8, 8)), "flat"),), amplitude_range=(1e-4, 1e-4), distort=False)
    np.testing.assert_allclose(perturb_depth(d, spec) - d, 1e-4, rtol=0, atol=1e-15)


def test_same_draw_is_reproducible_and_indices_differ():
    d = depth_map()
    spec = AugmentSpec(seed=42, elastic_px=3.0)
    a = perturb_depth(d, spec, 5)
    assert a.tobytes() == perturb_depth(d, spec, 5).tobytes()
    assert not np.array_equal(a, perturb_depth(d, spec, 6))
    draws = [_draw(spec, i) for i in range(20)]
    assert len({(t.name, round(s[0], 9), round(ang, 9)) for t, _, s, ang, _, _ in draws}) == 20


def test_seed_changes_draws():
    d = depth_map()
    assert not np.array_equal(perturb_depth(d, AugmentSpec(seed=1)), perturb_depth(d, AugmentSpec(seed=2)))


@settings(max_examples=25, deadline=None)
@given(
    amp=st.floats(0, 5e-4),
    index=st.integers(0, 10**6),
    seed=st.integers(0, 2**64 - 1),
    distort=st.booleans(),
)
def test_no_pixel_moves_more_than_amplitude(amp, index, seed, distort):
    d = depth_map(30, 40)
    spec = AugmentSpec(amplitude_range=(amp, amp), seed=seed, distort=distort, elastic_px=2.0)
    diff = perturb_depth(d, spec, index) - d
    assert diff.min() >= 0
    assert diff.max() <= amp * (1 + 1e-12)


def test_perturbation_is_independent_of_depth_content():
    spec = AugmentSpec(distort=False, seed=9)
    a, b = depth_map(seed=1), depth_map(seed=2)
    np.testing.assert_allclose(perturb_depth(a, spec, 4) - a, perturb_depth(b, spec, 4) - b, rtol=0, atol=1e-15)


def test_commutes_with_translation_by_texture_period():
    spec = AugmentSpec(textures=(TextureMap(np.random.default_rng(0).uniform(size=(16, 16)), "t"),),
                       distort=False)
    d = depth_map(64, 64)
    k = 16
    shifted = np.roll(d, (k, k), axis=(0, 1))
    a = np.roll(perturb_depth(d, spec), (k, k), axis=(0, 1))
    b = perturb_depth(shifted, spec)
    assert np.array_equal(a[k:, k:], b[k:, k:])


def test_per_texture_amplitude_override():
    spec = AugmentSpec(textures=(TextureMap(np.ones((4, 4)), "flat", amplitude=2e-4),), distort=False)
    d = depth_map()
    np.testing.assert_allclose(perturb_depth(d, spec) - d, 2e-4, rtol=0, atol=1e-15)


def test_spec_validation():
    with pytest.raises(ValueError):
        AugmentSpec(textures=())
    with pytest.raises(ValueError):
        AugmentSpec(amplitude_range=(-1e-4, 1e-4))
    with pytest.raises(ValueError):
        AugmentSpec(scale_range=(0.0, 1.0))
    with pytest.raises(ValueError):
        TextureMap(np.full((3, 3), 1.5))


def test_load_texture(tmp_path):
    g = (np.arange(64, dtype=np.uint8).reshape(8, 8) * 4)
    Image.fromarray(g).save(tmp_path / "wood.png")
    t = load_texture(tmp_path / "wood.png")
    assert t.name == "wood"
    np.testing.assert_allclose(t.data, g / 255.0)


def test_batch_cardinality_and_determinism():
    depths = [depth_map(48, 64, s) for s in (0, 1)]
    spec = AugmentSpec(seed=7)
    deform = DeformParams(kernel_size=7, sigma_narrow=2.0, sigma_wide=5.0, steps=2)
    assert augment_batch(depths, spec, 0, deform=deform) == []
    a = augment_batch(depths, spec, 3, deform=deform)
    b = augment_batch(depths, spec, 3, deform=deform, n_jobs=4)
    assert len(a) == 6
    for x, y in zip(a, b):
        assert x.dtype == np.uint8 and x.shape == (48, 64, 3)
        assert x.tobytes() == y.tobytes()
