"""Surface normals and Phong shading of the deformed elastomer.

Frame conventions
-----------------
Image axes: ``x`` runs along columns (right), ``y`` along rows (down), and
``z`` points from the membrane toward the camera.  Light directions are
LED *emission* directions as tabulated for the sensor: the white LED at
the top edge shines down the image, ``(0, 1, 0.25)``.  The vector from the
surface toward an LED is therefore the emission direction with its planar
part reversed; the ``z`` part (LED elevation toward the camera) is kept.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import cv2
import numba
import numpy as np

from .elastomer import DeformParams, elastomer_heightmap, threshold_depth
from .imagecore import check_depth, check_heightmap, check_image

__all__ = [
    "LightSource",
    "IlluminationConfig",
    "BASELINE_LIGHTS",
    "surface_normals",
    "phong_render",
    "background_image",
    "render_tactile",
    "measure_contact_span",
    "calibrate_pixel_to_meter",
]

def _rgb(value, name):
    rgb = tuple(float(c) for c in value)
    if len(rgb) != 3 or not all(0.0 <= c <= 255.0 for c in rgb):
        raise ValueError(f"{name} must be an RGB triple in [0, 255], got {value!r}")
    return rgb


@dataclass(frozen=True)
class LightSource:
    """One LED: emission direction (normalised on construction), colour and reflectances."""

    direction: tuple
    color: tuple
    k_d: float
    k_s: float
    name: str = ""

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=np.float64)
        n = np.linalg.norm(d)
        if d.shape != (3,) or not np.isfinite(n) or n == 0:
            raise ValueError(f"light direction must be a non-zero 3-vector, got {self.direction!r}")
        if abs(n - 1.0) > 1e-12:
            d = d / n
        object.__setattr__(self, "direction", tuple(float(v) for v in d))
        object.__setattr__(self, "color", _rgb(self.color, "light color"))
        for key in ("k_d", "k_s"):
            v = float(getattr(self, key))
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{key} must lie in [0, 1], got {v}")
            object.__setattr__(self, key, v)

    def to_light(self) -> np.ndarray:
        """Unit vector from the surface toward the LED."""
        dx, dy, dz = self.direction
        return np.array([-dx, -dy, dz])


BASELINE_LIGHTS = (
    LightSource((0, 1, 0.25), (255, 255, 255), 0.6, 0.5, "white"),
    LightSource((-1, 0, 0.25), (115, 130, 255), 0.5, 0.3, "blue"),
    LightSource((0, -1, 0.25), (225, 82, 108), 0.6, 0.4, "red"),
    LightSource((1, 0, 0.25), (153, 255, 120), 0.1, 0.1, "green"),
)


@dataclass(frozen=True, eq=False)
class IlluminationConfig:
    """Lights plus ambient term.

    ``ambient`` is either an RGB triple or an ``(H, W, 3)`` background image
    sampled per pixel.  ``pixel_to_meter`` is the membrane size of one pixel.
    """

    lights: tuple = BASELINE_LIGHTS
    ambient: object = (128.0, 128.0, 128.0)
    k_a: float = 0.8
    alpha: float = 5.0
    pixel_to_meter: float = 5e-5
    ambient_source: str | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "lights", tuple(self.lights))
        for light in self.lights:
            if not isinstance(light, LightSource):
                raise TypeError(f"lights must be LightSource instances, got {type(light).__name__}")
        amb = np.asarray(self.ambient)
        if amb.ndim == 3:
            object.__setattr__(self, "ambient", check_image(amb))
        else:
            object.__setattr__(self, "ambient", _rgb(self.ambient, "ambient"))
        if not 0.0 <= self.k_a <= 1.0:
            raise ValueError(f"k_a must lie in [0, 1], got {self.k_a}")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not self.pixel_to_meter > 0:
            raise ValueError(f"pixel_to_meter must be positive, got {self.pixel_to_meter}")

    @property
    def has_background_image(self) -> bool:
        return isinstance(self.ambient, np.ndarray)

    def __eq__(self, other):
        if not isinstance(other, IlluminationConfig):
            return NotImplemented
        if self.has_background_image != other.has_background_image:
            return False
        same_ambient = (
            np.array_equal(self.ambient, other.ambient)
            if self.has_background_image
            else self.ambient == other.ambient
        )
        return (
            same_ambient
            and self.lights == other.lights
            and (self.k_a, self.alpha, self.pixel_to_meter)
            == (other.k_a, other.alpha, other.pixel_to_meter)
        )

    __hash__ = None


def surface_normals(height, pixel_to_meter: float) -> np.ndarray:
    """Unit normals ``(H, W, 3)`` of the heightmap, oriented toward the camera.

    Slopes are central differences ``[-1, 0, 1] / (2 r)`` with edge
    replication; the normal of elevation ``h`` is ``(-dh/dx, -dh/dy, 1)``
    normalised.
    """
    if not pixel_to_meter > 0:
        raise ValueError(f"pixel_to_meter must be positive, got {pixel_to_meter}")
    h = check_heightmap(height)
    p = cv2.copyMakeBorder(h, 1, 1, 1, 1, cv2.BORDER_REPLICATE)
    scale = -1.0 / (2.0 * pixel_to_meter)
    nx = p[1:-1, 2:] - p[1:-1, :-2]
    nx *= scale
    ny = p[2:, 1:-1] - p[:-2, 1:-1]
    ny *= scale
    inv = nx * nx
    inv += ny * ny
    inv += 1.0
    np.sqrt(inv, out=inv)
    np.divide(1.0, inv, out=inv)
    nx *= inv
    ny *= inv
    return cv2.merge([nx, ny, inv])


@numba.njit(cache=True, nogil=True)
def _shade(normals, ambient, to_light, k_d, k_s, colors, alpha, int_alpha, out):
    h, w = normals.shape[:2]
    n_lights = to_light.shape[0]
    for i in range(h):
        for j in range(w):
            nx = normals[i, j, 0]
            ny = normals[i, j, 1]
            nz = normals[i, j, 2]
            r = ambient[i, j, 0]
            g = ambient[i, j, 1]
            b = ambient[i, j, 2]
            for m in range(n_lights):
                lx = to_light[m, 0]
                ly = to_light[m, 1]
                lz = to_light[m, 2]
                ndl = nx * lx + ny * ly + nz * lz
                wgt = k_d[m] * max(ndl, 0.0)
                if k_s[m] != 0.0:
                    # R.V with V = (0, 0, 1)
                    rv = max(2.0 * ndl * nz - lz, 0.0)
                    if int_alpha > 0:
                        p = rv
                        for _ in range(int_alpha - 1):
                            p *= rv
                    else:
                        p = rv**alpha
                    wgt += k_s[m] * p
                r += wgt * colors[m, 0]
                g += wgt * colors[m, 1]
                b += wgt * colors[m, 2]
            out[i, j, 0] = np.uint8(np.floor(min(max(r, 0.0), 255.0) + 0.5))
            out[i, j, 1] = np.uint8(np.floor(min(max(g, 0.0), 255.0) + 0.5))
            out[i, j, 2] = np.uint8(np.floor(min(max(b, 0.0), 255.0) + 0.5))


def phong_render(normals, config: IlluminationConfig) -> np.ndarray:
    """Shade a normal map: ambient plus diffuse and specular terms per light.

    Dot products are clamped at zero.  Channels are clipped to [0, 255]
    and rounded half-up to ``uint8``.
    """
    n = np.ascontiguousarray(normals, dtype=np.float64)
    if n.ndim != 3 or n.shape[2] != 3:
        raise ValueError(f"normal map must have shape (H, W, 3), got {n.shape}")
    h, w = n.shape[:2]
    if config.has_background_image:
        if config.ambient.shape[:2] != (h, w):
            raise ValueError(
                f"background image {config.ambient.shape[:2]} does not match render size {(h, w)}"
            )
        ambient = config.k_a * config.ambient.astype(np.float64)
    else:
        ambient = np.broadcast_to(config.k_a * np.asarray(config.ambient), (h, w, 3))
    lights = config.lights
    to_light = np.array([light.to_light() for light in lights]).reshape(-1, 3)
    k_d = np.array([light.k_d for light in lights], dtype=np.float64)
    k_s = np.array([light.k_s for light in lights], dtype=np.float64)
    colors = np.array([light.color for light in lights], dtype=np.float64).reshape(-1, 3)
    alpha = float(config.alpha)
    int_alpha = int(alpha) if alpha == int(alpha) and alpha <= 16 else 0
    out = np.empty((h, w, 3), dtype=np.uint8)
    _shade(n, ambient, to_light, k_d, k_s, colors, alpha, int_alpha, out)
    return out


def background_image(shape, config: IlluminationConfig) -> np.ndarray:
    """Render of the undeformed membrane at ``shape = (H, W)``."""
    flat = np.zeros(tuple(shape) + (3,))
    flat[..., 2] = 1.0
    return phong_render(flat, config)


def render_tactile(depth, deform: DeformParams, illum: IlluminationConfig) -> np.ndarray:
    """Depth map to RGB tactile image: heightmap, normals, then shading."""
    height = elastomer_heightmap(depth, deform)
    normals = surface_normals(height, illum.pixel_to_meter)
    return phong_render(normals, illum)


def measure_contact_span(depth, d_max: float, row: int | None = None) -> int:
    """Pixel count from the first to the last in-contact pixel of one row.

    ``row`` defaults to the row with the most in-contact pixels.
    """
    contact = threshold_depth(check_depth(depth), d_max) > 0
    if row is None:
        counts = contact.sum(axis=1)
        if counts.max() == 0:
            raise ValueError("depth map has no in-contact pixels")
        row = int(np.argmax(counts))
    cols = np.flatnonzero(contact[row])
    if cols.size == 0:
        raise ValueError(f"row {row} has no in-contact pixels")
    return int(cols[-1] - cols[0] + 1)


def calibrate_pixel_to_meter(pixel_span: float, cube_side: float = 0.005) -> float:
    """Meters per pixel from the measured pixel span of an object of known side."""
    if not pixel_span > 0:
        raise ValueError(f"pixel span must be positive, got {pixel_span}")
    if not cube_side > 0:
        raise ValueError(f"cube side must be positive, got {cube_side}")
    return cube_side / pixel_span
