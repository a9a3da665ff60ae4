import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from conftest import plateau
from tactsim.elastomer import (
    DeformParams,
    dog_heightmap,
    elastomer_heightmap,
    legacy_masked_smooth,
    smooth_heightmap,
    threshold_depth,
)
from tactsim.imagecore import convolve, gaussian_kernel

small_maps = arrays(np.float64, st.tuples(st.integers(6, 14), st.integers(6, 14)),
                    elements=st.floats(0, 1e-3, allow_nan=False))


@pytest.mark.parametrize("d,expected", [(0.035, 0.0), (0.028, 0.002), (0.03, 0.0), (0.0, 0.03)])
def test_threshold_examples(d, expected):
    out = threshold_depth(np.full((3, 3), d), 0.03)
    np.testing.assert_allclose(out, expected, rtol=0, atol=1e-15)


def test_all_background_depth_gives_zero_heightmap():
    assert not threshold_depth(np.full((20, 30), 0.5), 0.03).any()


@settings(max_examples=50, deadline=None)
@given(d=arrays(np.float64, (5, 7), elements=st.floats(0, 0.1)), d_max=st.floats(1e-3, 0.05))
def test_threshold_range_and_idempotent_clip(d, d_max):
    e = threshold_depth(d, d_max)
    assert e.min() >= 0 and e.max() <= d_max
    # clipping the depth first changes nothing
    assert np.array_equal(threshold_depth(np.minimum(d, d_max), d_max), e)


def test_zero_input_gives_zero_for_all_variants():
    z = np.zeros((40, 40))
    p = DeformParams(kernel_size=7, sigma_narrow=2, sigma_wide=5, steps=3)
    for steps in (1, 4):
        assert not smooth_heightmap(z, 7, 2.0, steps).any()
    assert not dog_heightmap(z, p).any()
    assert not legacy_masked_smooth(z, p).any()


def test_single_step_is_one_convolve_then_max():
    e0 = plateau()
    expected = np.maximum(convolve(e0, gaussian_kernel(7, 2.0)), e0)
    np.testing.assert_allclose(smooth_heightmap(e0, 7, 2.0, 1), expected, rtol=0, atol=1e-15)


def test_plateau_matches_loop_oracle():
    e0 = plateau()
    ref = np.array(oracles.smooth(e0.tolist(), 7, 2.0, 3))
    out = smooth_heightmap(e0, 7, 2.0, 3)
    assert np.abs(out - ref).max() < 1e-9
    inside = e0 > 0
    assert np.array_equal(out[inside], e0[inside])
    # decays away from the plateau along the centre row
    row = out[16, 21:]
    assert np.all(np.diff(row) <= 0) and row[0] > row[8] > 0 == row[-1]


def test_dog_plateau_matches_composed_oracles():
    e0 = plateau()
    p = DeformParams(kernel_size=21, sigma_narrow=2.0, sigma_wide=6.0, steps=2)
    narrow = np.array(oracles.smooth(e0.tolist(), 21, 2.0, 2))
    wide = np.array(oracles.smooth(e0.tolist(), 21, 6.0, 2))
    assert np.abs(dog_heightmap(e0, p) - (2 * narrow - wide)).max() < 1e-9


def test_dog_identity_when_sigmas_equal():
    e0 = plateau(48, 12)
    p = DeformParams(kernel_size=11, sigma_narrow=3.0, sigma_wide=3.0, steps=4)
    assert np.array_equal(dog_heightmap(e0, p), smooth_heightmap(e0, 11, 3.0, 4))


@settings(max_examples=30, deadline=None)
@given(e0=small_maps, steps=st.integers(1, 4))
def test_smoothing_never_below_e0(e0, steps):
    assert np.all(smooth_heightmap(e0, 5, 1.5, steps) >= e0)


@settings(max_examples=30, deadline=None)
@given(a=small_maps, seed=st.integers(0, 2**32 - 1))
def test_smoothing_is_monotone(a, seed):
    b = a + np.random.default_rng(seed).uniform(0, 1e-3, size=a.shape)
    assert np.all(smooth_heightmap(a, 5, 1.5, 3) <= smooth_heightmap(b, 5, 1.5, 3) + 1e-18)


def test_locally_constant_region_is_unchanged():
    e0 = plateau(64, 30)
    out = smooth_heightmap(e0, 7, 2.0, 5)
    # pixels whose kernel footprint is fully inside a constant region
    assert np.array_equal(out[20:44, 20:44], e0[20:44, 20:44])
    assert np.array_equal(out[:2, :2], e0[:2, :2])


@pytest.mark.parametrize("ksize,steps", [(5, 1), (7, 3), (21, 6)])
def test_far_field_stays_zero(ksize, steps):
    e0 = np.zeros((200, 200))
    e0[10:14, 10:14] = 2e-3
    out = smooth_heightmap(e0, ksize, ksize / 3, steps)
    reach = steps * ksize
    far = np.ones_like(e0, dtype=bool)
    far[: 14 + reach, : 14 + reach] = False
    assert np.abs(out[far]).max() <= 1e-12


@pytest.mark.parametrize("variant", ["single", "dog", "legacy"])
def test_translation_equivariance(variant):
    p = DeformParams(kernel_size=9, sigma_narrow=2.0, sigma_wide=4.0, steps=3, variant=variant)
    d = np.full((80, 80), 0.05)
    d[30:40, 25:38] = 0.029
    d[35:45, 33:36] = 0.0285
    k = 7
    shifted = np.roll(d, (k, k), axis=(0, 1))
    a = elastomer_heightmap(d, p)
    b = elastomer_heightmap(shifted, p)
    np.testing.assert_allclose(b[k:, k:], a[:-k, :-k], rtol=0, atol=1e-15)


def boundary_jump(h, e0):
    contact = e0 > 0
    dx = np.abs(np.diff(h, axis=1))[contact[:, 1:] ^ contact[:, :-1]]
    dy = np.abs(np.diff(h, axis=0))[contact[1:, :] ^ contact[:-1, :]]
    return max(dx.max(), dy.max())


def test_legacy_keeps_contact_and_jumps_at_boundary():
    e0 = plateau(64, 20)
    p = DeformParams(kernel_size=21, sigma_narrow=7.0, steps=6)
    legacy = legacy_masked_smooth(e0, p)
    assert np.array_equal(legacy[e0 > 0], e0[e0 > 0])
    merged = smooth_heightmap(e0, 21, 7.0, 6)
    assert boundary_jump(legacy, e0) > boundary_jump(merged, e0)


def test_dog_has_negative_ring_single_does_not():
    e0 = plateau(96, 24)
    p = DeformParams()
    dog = dog_heightmap(e0, p)
    single = smooth_heightmap(e0, p.kernel_size, p.sigma_narrow, p.steps)
    outside = e0 == 0
    assert dog[outside].min() < 0
    assert single[outside].min() >= 0


def test_params_validation():
    for bad in (dict(d_max=0), dict(kernel_size=4), dict(kernel_size=1), dict(sigma_narrow=8, sigma_wide=7),
                dict(steps=0), dict(variant="blur")):
        with pytest.raises(ValueError):
            DeformParams(**bad)
