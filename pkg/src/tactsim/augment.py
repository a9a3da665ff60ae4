"""Depth-space texture augmentation.

A randomly chosen texture heightfield is distorted (shift, rotation,
scale, optional smooth elastic warp), scaled to a random amplitude in
meters and added to the depth map before rendering.  Every draw is a pure
function of ``(seed, draw_index)``.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from .imagecore import ImageFormatError, check_depth
from .illumination import IlluminationConfig, render_tactile
from .elastomer import DeformParams

__all__ = [
    "TextureMap",
    "AugmentSpec",
    "BUILTIN_TEXTURES",
    "builtin_texture",
    "builtin_textures",
    "load_texture",
    "perturb_depth",
    "augment_batch",
]

TEXTURE_SIZE = 256
BUILTIN_TEXTURES = (
    "stripes_fine",
    "stripes_medium",
    "stripes_coarse",
    "layers",
    "crosshatch",
    "grain_fine",
    "grain_medium",
    "grain_coarse",
    "blotch_small",
    "blotch_medium",
    "blotch_large",
    "dots",
)


@dataclass(frozen=True, eq=False)
class TextureMap:
    """Grayscale heightfield in [0, 1].

    ``amplitude`` (meters), when set, overrides :attr:`AugmentSpec.amplitude_range`
    for this texture.
    """

    data: np.ndarray
    name: str = ""
    amplitude: float | None = None

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2 or min(arr.shape) < 1:
            raise ValueError(f"texture must be a non-empty 2-D array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)) or arr.min() < 0 or arr.max() > 1:
            raise ValueError("texture values must be finite and lie in [0, 1]")
        if self.amplitude is not None and self.amplitude < 0:
            raise ValueError("texture amplitude must be non-negative")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    def __eq__(self, other):
        if not isinstance(other, TextureMap):
            return NotImplemented
        return (
            self.name == other.name
            and self.amplitude == other.amplitude
            and np.array_equal(self.data, other.data)
        )

    __hash__ = None


def _normalise(a):
    a = a - a.min()
    top = a.max()
    return a / top if top > 0 else a


@lru_cache(maxsize=None)
def _builtin(name):
    n = TEXTURE_SIZE
    yy, xx = np.mgrid[0:n, 0:n].astype(np.float64)
    # fixed per-texture seed so the bundled set never changes
    rng = np.random.default_rng(BUILTIN_TEXTURES.index(name) + 1000)
    if name.startswith("stripes"):
        period = {"fine": 6.0, "medium": 12.0, "coarse": 24.0}[name.split("_")[1]]
        # integer wave numbers keep the texture seamless when tiled
        kx, ky = round(n / period), round(n / period / 3)
        tex = np.sin(2 * np.pi * (kx * xx + ky * yy) / n)
    elif name == "layers":
        tex = ((yy / 8.0) % 1.0) ** 2
    elif name == "crosshatch":
        k = n / 16
        tex = np.abs(np.sin(np.pi * k * xx / n)) + np.abs(np.sin(np.pi * k * yy / n))
    elif name.startswith("grain"):
        sigma = {"fine": 0.8, "medium": 1.6, "coarse": 3.2}[name.split("_")[1]]
        tex = ndimage.gaussian_filter(rng.standard_normal((n, n)), sigma, mode="wrap")
    elif name.startswith("blotch"):
        sigma = {"small": 6.0, "medium": 12.0, "large": 24.0}[name.split("_")[1]]
        noise = ndimage.gaussian_filter(rng.standard_normal((n, n)), sigma, mode="wrap")
        tex = 1.0 / (1.0 + np.exp(-noise / (noise.std() * 0.25)))
    else:
        pitch = 16
        cy = (yy % pitch) - pitch / 2 + 0.5
        cx = (xx % pitch) - pitch / 2 + 0.5
        tex = np.clip(1.0 - np.hypot(cx, cy) / 5.0, 0.0, 1.0)
    return _normalise(tex)


def builtin_texture(name: str) -> TextureMap:
    if name not in BUILTIN_TEXTURES:
        raise ValueError(f"unknown builtin texture {name!r}; choose from {BUILTIN_TEXTURES}")
    return TextureMap(_builtin(name), name=name)


def builtin_textures() -> tuple:
    """The twelve bundled procedural textures."""
    return tuple(builtin_texture(n) for n in BUILTIN_TEXTURES)


def load_texture(path, amplitude=None) -> TextureMap:
    """Load a grayscale PNG (8- or 16-bit) as a texture scaled to [0, 1]."""
    try:
        with Image.open(path) as img:
            img.load()
            if img.mode in ("I;16", "I;16B", "I"):
                arr = np.array(img).astype(np.float64) / 65535.0
            else:
                arr = np.array(img.convert("L")).astype(np.float64) / 255.0
    except OSError as exc:
        raise ImageFormatError(f"{path}: malformed texture image ({exc})") from exc
    return TextureMap(np.clip(arr, 0.0, 1.0), name=Path(path).stem, amplitude=amplitude)


@dataclass(frozen=True)
class AugmentSpec:
    """Texture set, amplitude range (meters) and distortion ranges.

    Distortion draws: shift uniform in ``[-translate_px, translate_px]``,
    rotation uniform in ``[-rotate_deg, rotate_deg]``, scale uniform in
    ``scale_range``; ``elastic_px > 0`` adds a smooth random displacement
    field with that peak-ish magnitude and ``elastic_sigma`` correlation
    length.
    """

    textures: tuple = field(default_factory=builtin_textures)
    amplitude_range: tuple = (1.5e-4, 1.5e-4)
    distort: bool = True
    translate_px: float = 64.0
    rotate_deg: float = 180.0
    scale_range: tuple = (0.75, 1.5)
    elastic_px: float = 0.0
    elastic_sigma: float = 16.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "textures", tuple(self.textures))
        if not self.textures:
            raise ValueError("augmentation needs at least one texture")
        for t in self.textures:
            if not isinstance(t, TextureMap):
                raise TypeError(f"textures must be TextureMap instances, got {type(t).__name__}")
        lo, hi = (float(v) for v in self.amplitude_range)
        if lo < 0 or hi < lo:
            raise ValueError(f"amplitude_range must satisfy 0 <= lo <= hi, got {self.amplitude_range}")
        object.__setattr__(self, "amplitude_range", (lo, hi))
        s0, s1 = (float(v) for v in self.scale_range)
        if not 0 < s0 <= s1:
            raise ValueError(f"scale_range must satisfy 0 < lo <= hi, got {self.scale_range}")
        object.__setattr__(self, "scale_range", (s0, s1))
        if self.translate_px < 0 or self.rotate_deg < 0 or self.elastic_px < 0:
            raise ValueError("distortion magnitudes must be non-negative")
        if not self.elastic_sigma > 0:
            raise ValueError("elastic_sigma must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


def _draw(spec, draw_index):
    rng = np.random.default_rng([int(spec.seed), int(draw_index)])
    tex_i = int(rng.integers(len(spec.textures)))
    lo, hi = spec.amplitude_range
    amp = lo + (hi - lo) * float(rng.random())
    shift = rng.uniform(-1.0, 1.0, size=2) * spec.translate_px
    angle = np.deg2rad(rng.uniform(-1.0, 1.0) * spec.rotate_deg)
    scale = float(rng.uniform(*spec.scale_range))
    elastic_seed = int(rng.integers(2**63))
    tex = spec.textures[tex_i]
    if tex.amplitude is not None:
        amp = tex.amplitude
    return tex, amp, shift, angle, scale, elastic_seed


def _texture_field(tex, shape, spec, shift, angle, scale, elastic_seed):
    h, w = shape
    rows, cols = np.mgrid[0:h, 0:w].astype(np.float64)
    if not spec.distort:
        th, tw = tex.shape
        return tex[np.mod(rows.astype(np.intp), th), np.mod(cols.astype(np.intp), tw)]
    # output pixel -> texture coordinate: undo shift, rotation and scale about the centre
    y = rows - (h - 1) / 2.0 - shift[1]
    x = cols - (w - 1) / 2.0 - shift[0]
    c, s = np.cos(angle), np.sin(angle)
    tx = (c * x + s * y) / scale
    ty = (-s * x + c * y) / scale
    if spec.elastic_px > 0:
        erng = np.random.default_rng(elastic_seed)
        for grid in (tx, ty):
            field_ = ndimage.gaussian_filter(erng.standard_normal(shape), spec.elastic_sigma)
            peak = np.abs(field_).max()
            if peak > 0:
                grid += field_ * (spec.elastic_px / peak)
    th, tw = tex.shape
    coords = np.stack([ty + (th - 1) / 2.0, tx + (tw - 1) / 2.0])
    out = ndimage.map_coordinates(tex, coords, order=1, mode="grid-wrap")
    return np.clip(out, 0.0, 1.0)


def perturb_depth(depth, spec: AugmentSpec, draw_index: int = 0) -> np.ndarray:
    """Add a randomly distorted, randomly scaled texture to a depth map.

    The draw is determined by ``(spec.seed, draw_index)``.  No pixel moves
    by more than the drawn amplitude.
    """
    d = check_depth(depth)
    tex, amp, shift, angle, scale, elastic_seed = _draw(spec, draw_index)
    if amp == 0.0:
        return d.copy()
    field_ = _texture_field(tex.data, d.shape, spec, shift, angle, scale, elastic_seed)
    return np.maximum(d + amp * field_, 0.0)


def augment_batch(
    depths,
    spec: AugmentSpec,
    count_per_input: int,
    deform: DeformParams | None = None,
    illum: IlluminationConfig | None = None,
    n_jobs: int = 1,
):
    """Render ``count_per_input`` perturbed images per depth map.

    Item ``j`` of input ``i`` uses draw index ``i * count_per_input + j``;
    output order is input-major and independent of ``n_jobs``.
    """
    if int(count_per_input) != count_per_input or count_per_input < 0:
        raise ValueError(f"count_per_input must be a non-negative integer, got {count_per_input}")
    deform = deform or DeformParams()
    illum = illum or IlluminationConfig()
    depths = [check_depth(d) for d in depths]
    jobs = [(d, i * count_per_input + j) for i, d in enumerate(depths) for j in range(count_per_input)]

    def run(job):
        d, idx = job
        return render_tactile(perturb_depth(d, spec, idx), deform, illum)

    if n_jobs == 1 or len(jobs) < 2:
        return [run(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(run, jobs))
