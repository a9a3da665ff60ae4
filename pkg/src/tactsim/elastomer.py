"""Elastomer surface approximation from a camera depth map.

All heightmaps use the elevation convention: 0 is the undeformed membrane
and positive values protrude toward the camera.  A depth ``D`` maps to
elevation ``d_max - min(D, d_max)``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import cv2
import numpy as np

from .imagecore import check_depth, check_heightmap, convolve_separable, gaussian_kernel_1d

__all__ = [
    "VARIANTS",
    "DeformParams",
    "threshold_depth",
    "smooth_heightmap",
    "dog_heightmap",
    "legacy_masked_smooth",
    "elastomer_heightmap",
]

#: "raw" is the thresholded map before any smoothing, "legacy" the
#: mask-merged single Gaussian kept for comparison.
VARIANTS = ("single", "dog", "raw", "legacy")


@dataclass(frozen=True)
class DeformParams:
    d_max: float = 0.03
    kernel_size: int = 21
    sigma_narrow: float = 7.0
    sigma_wide: float = 21.0
    steps: int = 6
    variant: str = "dog"

    def __post_init__(self):
        if not self.d_max > 0:
            raise ValueError(f"d_max must be positive, got {self.d_max}")
        if int(self.kernel_size) != self.kernel_size or self.kernel_size < 3 or self.kernel_size % 2 == 0:
            raise ValueError(f"kernel_size must be an odd integer >= 3, got {self.kernel_size}")
        if not 0 < self.sigma_narrow <= self.sigma_wide:
            raise ValueError(
                f"need 0 < sigma_narrow <= sigma_wide, got {self.sigma_narrow}, {self.sigma_wide}"
            )
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError(f"steps must be a positive integer, got {self.steps}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")

    def to_dict(self):
        return asdict(self)


def threshold_depth(depth, d_max: float) -> np.ndarray:
    """Clip depth at ``d_max`` and convert to elevation in ``[0, d_max]``."""
    if not d_max > 0:
        raise ValueError(f"d_max must be positive, got {d_max}")
    d = check_depth(depth)
    return d_max - np.minimum(d, d_max)


def _active_window(e0, reach):
    """Slices bounding the non-zero support of ``e0`` grown by ``reach`` pixels."""
    rows = np.flatnonzero(e0.any(axis=1))
    if rows.size == 0:
        return None
    cols = np.flatnonzero(e0.any(axis=0))
    h, w = e0.shape
    r0, r1 = max(rows[0] - reach, 0), min(rows[-1] + reach + 1, h)
    c0, c1 = max(cols[0] - reach, 0), min(cols[-1] + reach + 1, w)
    return slice(r0, r1), slice(c0, c1)


def _smooth(e0, kernel, steps):
    h = e0
    for _ in range(steps):
        h = cv2.max(convolve_separable(h, kernel), e0)
    return h


def smooth_heightmap(e0, kernel_size: int, sigma: float, steps: int) -> np.ndarray:
    """Repeated Gaussian blur, each step merged back with ``max(., e0)``.

    Work is restricted to the window that the blur can reach from the
    non-zero part of ``e0``; everything outside it is exactly zero.
    """
    e0 = check_heightmap(e0)
    if int(steps) != steps or steps < 1:
        raise ValueError(f"steps must be a positive integer, got {steps}")
    kernel = gaussian_kernel_1d(kernel_size, sigma)
    # one extra half-kernel keeps the window edge at zero through every step
    window = _active_window(e0, (steps + 1) * (int(kernel_size) // 2) + 1)
    out = np.zeros_like(e0)
    if window is None:
        return out
    out[window] = _smooth(np.ascontiguousarray(e0[window]), kernel, int(steps))
    return out


def dog_heightmap(e0, params: DeformParams) -> np.ndarray:
    """Difference of Gaussians: ``2 * narrow - wide``, both branches with the same step count."""
    narrow = smooth_heightmap(e0, params.kernel_size, params.sigma_narrow, params.steps)
    wide = smooth_heightmap(e0, params.kernel_size, params.sigma_wide, params.steps)
    return 2.0 * narrow - wide


def legacy_masked_smooth(e0, params: DeformParams) -> np.ndarray:
    """Older single-Gaussian scheme: blur only the not-in-contact region.

    ``e0`` is blurred ``steps`` times with no intermediate merge, then
    combined with the original through complementary contact masks.  The
    contact area keeps its sharp values, which leaves a height
    discontinuity along the contact boundary.
    """
    e0 = check_heightmap(e0)
    kernel = gaussian_kernel_1d(params.kernel_size, params.sigma_narrow)
    blurred = e0
    for _ in range(params.steps):
        blurred = convolve_separable(blurred, kernel)
    contact = (e0 > 0).astype(np.float64)
    return contact * e0 + (1.0 - contact) * blurred


def elastomer_heightmap(depth, params: DeformParams) -> np.ndarray:
    """Depth map to elastomer heightmap using ``params.variant``."""
    e0 = threshold_depth(depth, params.d_max)
    if params.variant == "raw":
        return e0
    if params.variant == "single":
        return smooth_heightmap(e0, params.kernel_size, params.sigma_narrow, params.steps)
    if params.variant == "dog":
        return dog_heightmap(e0, params)
    return legacy_masked_smooth(e0, params)
