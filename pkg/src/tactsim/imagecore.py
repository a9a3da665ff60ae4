"""Raster helpers shared by the rest of the package.

Depth maps and heightmaps are plain ``float64`` arrays of shape ``(H, W)``;
tactile images are ``uint8`` arrays of shape ``(H, W, 3)`` in RGB order.
The ``check_*`` helpers validate and normalise inputs the way
``sklearn.utils.check_array`` does for tabular data.
"""
from __future__ import annotations

import json
from pathlib import Path

import cv2
import numpy as np
from PIL import Image, PngImagePlugin, UnidentifiedImageError

__all__ = [
    "ImageFormatError",
    "check_depth",
    "check_heightmap",
    "check_image",
    "gaussian_kernel_1d",
    "gaussian_kernel",
    "convolve",
    "convolve_separable",
    "read_depth",
    "write_depth",
    "read_rgb",
    "write_rgb",
]

MIN_SIDE = 3
SCALE_KEY = "meters_per_unit"


class ImageFormatError(ValueError):
    """Raised when an image file is malformed or cannot be decoded."""


def _as_grid(a, name):
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < MIN_SIDE or arr.shape[1] < MIN_SIDE:
        raise ValueError(f"{name} must be at least {MIN_SIDE}x{MIN_SIDE}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return np.ascontiguousarray(arr)


def check_depth(depth) -> np.ndarray:
    """Validate a depth map: 2-D, finite, non-negative, at least 3x3."""
    arr = _as_grid(depth, "depth map")
    if arr.min() < 0:
        raise ValueError("depth map contains negative distances")
    return arr


def check_heightmap(height) -> np.ndarray:
    return _as_grid(height, "heightmap")


def check_image(image) -> np.ndarray:
    arr = np.asarray(image)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"tactile image must have shape (H, W, 3), got {arr.shape}")
    if arr.dtype != np.uint8:
        if not np.issubdtype(arr.dtype, np.number):
            raise ValueError(f"unsupported image dtype {arr.dtype}")
        if arr.min() < 0 or arr.max() > 255:
            raise ValueError("image channel values must lie in [0, 255]")
        arr = arr.astype(np.uint8)
    return np.ascontiguousarray(arr)


def _check_kernel_args(size, sigma):
    if int(size) != size or size < 1 or size % 2 == 0:
        raise ValueError(f"kernel size must be a positive odd integer, got {size!r}")
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma!r}")


def gaussian_kernel_1d(size: int, sigma: float) -> np.ndarray:
    """Sampled 1-D Gaussian on the centred integer lattice, normalised to unit sum."""
    _check_kernel_args(size, sigma)
    half = int(size) // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    w = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return w / w.sum()


def gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    """Square 2-D Gaussian kernel with weights summing to one.

    The weights are proportional to ``exp(-(x**2 + y**2) / (2 sigma**2))``;
    the discrete sum replaces the continuous normaliser so that constant
    regions pass through unchanged.
    """
    k = gaussian_kernel_1d(size, sigma)
    return np.outer(k, k)


def convolve(image, kernel) -> np.ndarray:
    """2-D convolution with clamp-to-edge borders, output the same size as ``image``."""
    arr = check_heightmap(image)
    k = np.asarray(kernel, dtype=np.float64)
    if k.ndim != 2 or k.shape[0] != k.shape[1] or k.shape[0] % 2 == 0:
        raise ValueError(f"kernel must be square with odd side, got shape {k.shape}")
    # filter2D correlates; flip for a true convolution
    flipped = np.ascontiguousarray(k[::-1, ::-1])
    return cv2.filter2D(arr, cv2.CV_64F, flipped, borderType=cv2.BORDER_REPLICATE)


def convolve_separable(image, kernel_1d) -> np.ndarray:
    """Convolve with ``outer(kernel_1d, kernel_1d)`` as two 1-D passes (clamp-to-edge)."""
    arr = np.ascontiguousarray(image, dtype=np.float64)
    k = np.ascontiguousarray(np.asarray(kernel_1d, dtype=np.float64)[::-1])
    return cv2.sepFilter2D(arr, cv2.CV_64F, k, k, borderType=cv2.BORDER_REPLICATE)


# --------------------------------------------------------------------------
# depth IO

def _depth_format(path, fmt):
    if fmt is not None:
        fmt = fmt.lower()
    else:
        fmt = Path(path).suffix.lower().lstrip(".")
    if fmt not in ("pfm", "png"):
        raise ValueError(f"unsupported depth format {fmt!r} (expected 'pfm' or 'png')")
    return fmt


def write_depth(depth, path, fmt=None, scale=None):
    """Write a depth map as 32-bit PFM or 16-bit grayscale PNG.

    For PNG, ``scale`` gives meters per stored unit; it is recorded in a
    ``meters_per_unit`` text chunk of the file.
    """
    arr = check_depth(depth)
    fmt = _depth_format(path, fmt)
    path = Path(path)
    if fmt == "pfm":
        h, w = arr.shape
        with open(path, "wb") as fh:
            fh.write(b"Pf\n")
            fh.write(f"{w} {h}\n".encode("ascii"))
            fh.write(b"-1.0\n")
            # PFM stores rows bottom to top
            fh.write(np.ascontiguousarray(arr[::-1], dtype="<f4").tobytes())
        return
    if scale is None or not scale > 0:
        raise ValueError("16-bit PNG depth requires a positive meters-per-unit scale")
    units = np.rint(arr / scale)
    if units.max() > 65535:
        raise ValueError(
            f"depth {arr.max():.6g} m exceeds the 16-bit range at scale {scale} m/unit"
        )
    info = PngImagePlugin.PngInfo()
    info.add_text(SCALE_KEY, repr(float(scale)))
    Image.fromarray(units.astype(np.uint16)).save(path, format="PNG", pnginfo=info)


def _read_pfm(path):
    data = Path(path).read_bytes()
    try:
        magic, dims, scale_line, payload = data.split(b"\n", 3)
        if magic.strip() != b"Pf":
            raise ImageFormatError(f"{path}: not a grayscale PFM file (magic {magic[:4]!r})")
        w, h = (int(v) for v in dims.split())
        scale = float(scale_line)
    except ImageFormatError:
        raise
    except ValueError as exc:
        raise ImageFormatError(f"{path}: malformed PFM header") from exc
    if w <= 0 or h <= 0:
        raise ImageFormatError(f"{path}: PFM has zero dimension {w}x{h}")
    if scale == 0:
        raise ImageFormatError(f"{path}: PFM scale must be non-zero")
    nbytes = w * h * 4
    if len(payload) < nbytes:
        raise ImageFormatError(
            f"{path}: malformed image, expected {nbytes} data bytes, found {len(payload)}"
        )
    dtype = "<f4" if scale < 0 else ">f4"
    grid = np.frombuffer(payload[:nbytes], dtype=dtype).reshape(h, w)[::-1]
    return grid.astype(np.float64)


def _read_png16(path, scale):
    try:
        with Image.open(path) as img:
            img.load()
            text = dict(getattr(img, "text", {}) or {})
            arr = np.array(img)
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise ImageFormatError(f"{path}: malformed image ({exc})") from exc
    if arr.ndim != 2:
        raise ImageFormatError(f"{path}: depth PNG must be single-channel, got shape {arr.shape}")
    if scale is None:
        if SCALE_KEY in text:
            scale = float(text[SCALE_KEY])
        else:
            sidecar = Path(str(path) + ".json")
            if not sidecar.exists():
                raise ImageFormatError(
                    f"{path}: no {SCALE_KEY} text chunk and no sidecar {sidecar.name}"
                )
            scale = float(json.loads(sidecar.read_text())[SCALE_KEY])
    return arr.astype(np.float64) * scale


def read_depth(path, fmt=None, scale=None) -> np.ndarray:
    """Read a depth map in meters from PFM or 16-bit PNG.

    For PNG the scale is taken from ``scale`` if given, otherwise from the
    file's ``meters_per_unit`` text chunk, otherwise from a ``<path>.json``
    sidecar with the same key.
    """
    fmt = _depth_format(path, fmt)
    if not Path(path).is_file():
        raise FileNotFoundError(f"depth file not found: {path}")
    grid = _read_pfm(path) if fmt == "pfm" else _read_png16(path, scale)
    if grid.shape[0] == 0 or grid.shape[1] == 0:
        raise ImageFormatError(f"{path}: image has a zero dimension")
    if not np.all(np.isfinite(grid)):
        raise ImageFormatError(f"{path}: depth map contains non-finite values")
    try:
        return check_depth(grid)
    except ValueError as exc:
        raise ImageFormatError(f"{path}: {exc}") from exc


def read_rgb(path) -> np.ndarray:
    """Read an 8-bit image as RGB; grayscale inputs are replicated to three channels."""
    if not Path(path).is_file():
        raise FileNotFoundError(f"image file not found: {path}")
    try:
        with Image.open(path) as img:
            img.load()
            if img.mode in ("I;16", "I;16B", "I", "F"):
                raise ImageFormatError(f"{path}: expected an 8-bit image, got mode {img.mode}")
            arr = np.array(img.convert("RGB"))
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise ImageFormatError(f"{path}: malformed image ({exc})") from exc
    return arr


def write_rgb(image, path):
    arr = check_image(image)
    Image.fromarray(arr).save(Path(path), format="PNG")
