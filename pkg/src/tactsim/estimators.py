"""scikit-learn style wrappers so the renderer composes with ``Pipeline``.

Inputs are a single depth map ``(H, W)`` or a stack ``(N, H, W)``; outputs
follow the same convention (``(H, W, 3)`` or ``(N, H, W, 3)`` images).
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .augment import AugmentSpec, builtin_textures, perturb_depth
from .elastomer import DeformParams, elastomer_heightmap
from .illumination import (
    BASELINE_LIGHTS,
    IlluminationConfig,
    background_image,
    phong_render,
    surface_normals,
)
from .imagecore import check_depth

__all__ = ["ElastomerDeformer", "TactileRenderer", "DepthTextureAugmenter"]


def _as_stack(X):
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 2:
        return arr[None], True
    if arr.ndim == 3:
        return arr, False
    raise ValueError(f"expected a depth map (H, W) or a stack (N, H, W), got shape {arr.shape}")


def _unstack(out, single):
    out = np.stack(out) if out else np.empty((0,))
    return out[0] if single else out


class ElastomerDeformer(TransformerMixin, BaseEstimator):
    """Depth maps to elastomer heightmaps (elevation, meters)."""

    def __init__(self, d_max=0.03, kernel_size=21, sigma_narrow=7.0, sigma_wide=21.0, steps=6, variant="dog"):
        self.d_max = d_max
        self.kernel_size = kernel_size
        self.sigma_narrow = sigma_narrow
        self.sigma_wide = sigma_wide
        self.steps = steps
        self.variant = variant

    def _deform_params(self):
        return DeformParams(
            d_max=self.d_max,
            kernel_size=self.kernel_size,
            sigma_narrow=self.sigma_narrow,
            sigma_wide=self.sigma_wide,
            steps=self.steps,
            variant=self.variant,
        )

    def fit(self, X=None, y=None):
        self.params_ = self._deform_params()
        if X is not None:
            stack, _ = _as_stack(X)
            self.image_shape_ = stack.shape[1:]
        return self

    def transform(self, X):
        check_is_fitted(self, "params_")
        stack, single = _as_stack(X)
        return _unstack([elastomer_heightmap(d, self.params_) for d in stack], single)


class TactileRenderer(ElastomerDeformer):
    """Depth maps to RGB tactile images.

    ``ambient`` is an RGB triple or a background image ``(H, W, 3)``.
    After ``fit`` with data, ``background_`` holds the no-contact render.
    """

    def __init__(
        self,
        d_max=0.03,
        kernel_size=21,
        sigma_narrow=7.0,
        sigma_wide=21.0,
        steps=6,
        variant="dog",
        lights=BASELINE_LIGHTS,
        ambient=(128.0, 128.0, 128.0),
        k_a=0.8,
        alpha=5.0,
        pixel_to_meter=5e-5,
    ):
        super().__init__(d_max, kernel_size, sigma_narrow, sigma_wide, steps, variant)
        self.lights = lights
        self.ambient = ambient
        self.k_a = k_a
        self.alpha = alpha
        self.pixel_to_meter = pixel_to_meter

    @classmethod
    def from_config(cls, deform: DeformParams, illum: IlluminationConfig):
        return cls(
            **deform.to_dict(),
            lights=illum.lights,
            ambient=illum.ambient,
            k_a=illum.k_a,
            alpha=illum.alpha,
            pixel_to_meter=illum.pixel_to_meter,
        )

    def fit(self, X=None, y=None):
        super().fit(X, y)
        self.illumination_ = IlluminationConfig(
            lights=tuple(self.lights),
            ambient=self.ambient,
            k_a=self.k_a,
            alpha=self.alpha,
            pixel_to_meter=self.pixel_to_meter,
        )
        if X is not None:
            self.background_ = background_image(self.image_shape_, self.illumination_)
        return self

    def transform(self, X):
        check_is_fitted(self, "illumination_")
        stack, single = _as_stack(X)
        out = []
        for d in stack:
            h = elastomer_heightmap(d, self.params_)
            out.append(phong_render(surface_normals(h, self.pixel_to_meter), self.illumination_))
        return _unstack(out, single)


class DepthTextureAugmenter(TransformerMixin, BaseEstimator):
    """Adds seeded texture perturbations to depth maps.

    Map ``i`` of a stack uses draw index ``index_offset + i``, so a given
    stack always receives the same perturbations.
    """

    def __init__(
        self,
        textures=None,
        amplitude_range=(1.5e-4, 1.5e-4),
        distort=True,
        translate_px=64.0,
        rotate_deg=180.0,
        scale_range=(0.75, 1.5),
        elastic_px=0.0,
        elastic_sigma=16.0,
        seed=0,
        index_offset=0,
    ):
        self.textures = textures
        self.amplitude_range = amplitude_range
        self.distort = distort
        self.translate_px = translate_px
        self.rotate_deg = rotate_deg
        self.scale_range = scale_range
        self.elastic_px = elastic_px
        self.elastic_sigma = elastic_sigma
        self.seed = seed
        self.index_offset = index_offset

    def fit(self, X=None, y=None):
        self.spec_ = AugmentSpec(
            textures=builtin_textures() if self.textures is None else tuple(self.textures),
            amplitude_range=tuple(self.amplitude_range),
            distort=self.distort,
            translate_px=self.translate_px,
            rotate_deg=self.rotate_deg,
            scale_range=tuple(self.scale_range),
            elastic_px=self.elastic_px,
            elastic_sigma=self.elastic_sigma,
            seed=self.seed,
        )
        return self

    def transform(self, X):
        check_is_fitted(self, "spec_")
        stack, single = _as_stack(X)
        out = [perturb_depth(check_depth(d), self.spec_, self.index_offset + i) for i, d in enumerate(stack)]
        return _unstack(out, single)
