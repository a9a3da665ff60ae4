"""Comparison of real and generated tactile images.

Alignment uses two manually picked point pairs; a third pair is derived so
that each triple forms a right isosceles triangle, which restricts the
affine solution to translation plus uniform scale.  Images are then warped,
cropped to their common area and scored with SSIM, PSNR and MAE.
"""
from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np
from scipy import ndimage

from .imagecore import check_image, gaussian_kernel_1d, read_rgb

__all__ = [
    "AlignmentTransform",
    "MetricReport",
    "ManifestError",
    "constrained_affine",
    "warp_and_crop",
    "compare",
    "ssim",
    "dataset_report",
    "format_report",
    "contact_centroids",
    "load_annotations",
]

log = logging.getLogger(__name__)

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1, SSIM_K2 = 0.01, 0.03
_PARALLEL_TOL = 1e-6


class ManifestError(ValueError):
    """Real and generated directories do not hold the same files."""

    def __init__(self, missing_generated, missing_real):
        self.missing_generated = list(missing_generated)
        self.missing_real = list(missing_real)
        lines = ["real and generated file manifests differ:"]
        lines += [f"  missing in generated: {n}" for n in self.missing_generated]
        lines += [f"  missing in real: {n}" for n in self.missing_real]
        super().__init__("\n".join(lines))


@dataclass(frozen=True, eq=False)
class AlignmentTransform:
    """2x3 affine ``[[s, 0, tx], [0, s, ty]]`` mapping source pixels to target pixels."""

    matrix: np.ndarray
    source: str = "real"
    target: str = "generated"

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.float64)
        if m.shape != (2, 3):
            raise ValueError(f"alignment matrix must be 2x3, got {m.shape}")
        if abs(m[0, 1]) > 1e-9 or abs(m[1, 0]) > 1e-9 or abs(m[0, 0] - m[1, 1]) > 1e-9:
            raise ValueError("alignment must be translation plus uniform scale only")
        if not m[0, 0] > 0:
            raise ValueError("alignment scale must be positive")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_scale_translation(cls, scale, tx, ty, **kw):
        return cls(np.array([[scale, 0.0, tx], [0.0, scale, ty]]), **kw)

    @property
    def scale(self) -> float:
        return float(self.matrix[0, 0])

    @property
    def translation(self):
        return float(self.matrix[0, 2]), float(self.matrix[1, 2])

    def apply(self, points) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return p @ self.matrix[:, :2].T + self.matrix[:, 2]

    def to_dict(self):
        return {
            "matrix": self.matrix.tolist(),
            "scale": self.scale,
            "translation": list(self.translation),
            "source": self.source,
            "target": self.target,
        }


def _perp(v):
    return np.array([-v[1], v[0]])


def constrained_affine(p1_src, p2_src, p1_dst, p2_dst) -> AlignmentTransform:
    """Translation + uniform scale taking ``p*_src`` onto ``p*_dst``.

    A third point ``p1 + perp(p2 - p1)`` completes a right isosceles
    triangle in each frame and the affine through the three pairs is
    solved exactly.  If the two chords are not parallel (hand-picked points
    rarely are exactly), the translation + scale least-squares fit to the
    two pairs is returned instead.
    """
    a1, a2, b1, b2 = (np.asarray(p, dtype=np.float64).reshape(2) for p in (p1_src, p2_src, p1_dst, p2_dst))
    if np.allclose(a1, a2, rtol=0, atol=1e-12):
        raise ValueError("source points coincide")
    if np.allclose(b1, b2, rtol=0, atol=1e-12):
        raise ValueError("destination points coincide")
    a3 = a1 + _perp(a2 - a1)
    b3 = b1 + _perp(b2 - b1)
    src = np.column_stack([np.stack([a1, a2, a3]), np.ones(3)])
    dst = np.stack([b1, b2, b3])
    m = np.linalg.solve(src, dst).T
    lin = m[:, :2]
    size = max(abs(lin).max(), 1.0)
    if (
        abs(lin[0, 1]) <= _PARALLEL_TOL * size
        and abs(lin[1, 0]) <= _PARALLEL_TOL * size
        and abs(lin[0, 0] - lin[1, 1]) <= _PARALLEL_TOL * size
        and lin[0, 0] > 0
    ):
        s = 0.5 * (lin[0, 0] + lin[1, 1])
        # re-centre translation on the point centroid after dropping residual shear
        t = dst.mean(axis=0) - s * src[:, :2].mean(axis=0)
        return AlignmentTransform.from_scale_translation(s, t[0], t[1])
    log.warning("alignment chords are not parallel; using least-squares scale and translation")
    pa, pb = np.stack([a1, a2]), np.stack([b1, b2])
    ca, cb = pa - pa.mean(axis=0), pb - pb.mean(axis=0)
    s = float((ca * cb).sum() / (ca * ca).sum())
    if not s > 0:
        raise ValueError("point pairs imply a reflection or zero scale")
    t = pb.mean(axis=0) - s * pa.mean(axis=0)
    return AlignmentTransform.from_scale_translation(s, t[0], t[1])


def warp_and_crop(real, gen, transform: AlignmentTransform):
    """Warp ``real`` into ``gen``'s frame (bilinear) and crop both to the common area."""
    real = check_image(real)
    gen = check_image(gen)
    hg, wg = gen.shape[:2]
    hr, wr = real.shape[:2]
    s = transform.scale
    tx, ty = transform.translation
    eps = 1e-9
    x0 = max(0, math.ceil(tx - eps))
    y0 = max(0, math.ceil(ty - eps))
    x1 = min(wg - 1, math.floor(s * (wr - 1) + tx + eps))
    y1 = min(hg - 1, math.floor(s * (hr - 1) + ty + eps))
    if x1 < x0 or y1 < y0:
        raise ValueError("aligned images have no common area")
    warped = cv2.warpAffine(
        real, np.asarray(transform.matrix), (wg, hg), flags=cv2.INTER_LINEAR,
        borderMode=cv2.BORDER_CONSTANT,
    )
    crop = (slice(y0, y1 + 1), slice(x0, x1 + 1))
    return np.ascontiguousarray(warped[crop]), np.ascontiguousarray(gen[crop])


@dataclass(frozen=True)
class MetricReport:
    ssim: float
    psnr: float
    mae: float

    def to_dict(self):
        finite = math.isfinite(self.psnr)
        return {
            "ssim": self.ssim,
            "psnr": self.psnr if finite else None,
            "psnr_infinite": not finite,
            "mae": self.mae,
        }


def _valid_filter(x, k):
    full = cv2.sepFilter2D(x, cv2.CV_64F, k, k, borderType=cv2.BORDER_REPLICATE)
    r = len(k) // 2
    return full[r:-r, r:-r]


def ssim(a, b) -> float:
    """Mean SSIM over valid 11x11 Gaussian windows (sigma 1.5), averaged over channels."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    if a.ndim == 2:
        a, b = a[..., None], b[..., None]
    if min(a.shape[:2]) < SSIM_WINDOW:
        raise ValueError(f"SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}")
    k = gaussian_kernel_1d(SSIM_WINDOW, SSIM_SIGMA)
    c1 = (SSIM_K1 * 255) ** 2
    c2 = (SSIM_K2 * 255) ** 2
    scores = []
    for ch in range(a.shape[2]):
        x = np.ascontiguousarray(a[..., ch])
        y = np.ascontiguousarray(b[..., ch])
        mx, my = _valid_filter(x, k), _valid_filter(y, k)
        sxx = _valid_filter(x * x, k) - mx * mx
        syy = _valid_filter(y * y, k) - my * my
        sxy = _valid_filter(x * y, k) - mx * my
        num = (2 * mx * my + c1) * (2 * sxy + c2)
        den = (mx * mx + my * my + c1) * (sxx + syy + c2)
        scores.append(float(np.mean(num / den)))
    return float(np.mean(scores))


def compare(a, b) -> MetricReport:
    """SSIM, PSNR (dB, ``inf`` when identical) and MAE (% of 255)."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    af = a.astype(np.float64)
    bf = b.astype(np.float64)
    diff = af - bf
    mae = float(np.mean(np.abs(diff))) / 255.0 * 100.0
    mse = float(np.mean(diff * diff))
    psnr = math.inf if mse == 0 else 10.0 * math.log10(255.0**2 / mse)
    return MetricReport(ssim=ssim(af, bf), psnr=psnr, mae=mae)


# --------------------------------------------------------------------------
# datasets

def load_annotations(path) -> dict:
    """Alignment annotations::

        {"global": {"src": [[x, y], [x, y]], "dst": [[x, y], [x, y]]},
         "objects": {"<object>": {"src": ..., "dst": ...}}}

    ``src`` points are in the real frame, ``dst`` in the generated frame.
    """
    data = json.loads(Path(path).read_text())
    if not isinstance(data, dict):
        raise ValueError(f"{path}: annotations must be a JSON object")
    return data


def _transform_from(entry, where):
    try:
        (p1, p2), (q1, q2) = entry["src"], entry["dst"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"{where}: expected {{'src': [[x,y],[x,y]], 'dst': [[x,y],[x,y]]}}") from exc
    return constrained_affine(p1, p2, q1, q2)


def _manifest(root):
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"not a directory: {root}")
    return sorted(p.relative_to(root).as_posix() for p in root.rglob("*.png"))


def _object_of(name):
    parts = name.split("/")
    return parts[0] if len(parts) > 1 else Path(name).stem.split("_")[0]


def _aggregate(values):
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        return None, None
    return float(arr.mean()), float(arr.std())


def dataset_report(real_dir, gen_dir, alignment="none", annotations=None, n_jobs=1) -> dict:
    """Compare every matching PNG pair and aggregate mean and standard deviation.

    ``alignment`` is ``"none"``, ``"global"`` (one transform for all pairs)
    or ``"per-object"`` (transform chosen by the pair's top-level
    directory).  PSNR statistics cover finite values only; the count of
    identical pairs is reported separately.
    """
    if alignment not in ("none", "global", "per-object"):
        raise ValueError(f"alignment must be 'none', 'global' or 'per-object', got {alignment!r}")
    real_names, gen_names = _manifest(real_dir), _manifest(gen_dir)
    missing_gen = sorted(set(real_names) - set(gen_names))
    missing_real = sorted(set(gen_names) - set(real_names))
    if missing_gen or missing_real:
        raise ManifestError(missing_gen, missing_real)
    if alignment != "none" and annotations is None:
        raise ValueError(f"alignment {alignment!r} needs an annotations file")
    transforms = {}
    if alignment == "global":
        transforms[None] = _transform_from(annotations.get("global"), "global annotation")
    elif alignment == "per-object":
        objects = annotations.get("objects", {})
        needed = sorted({_object_of(n) for n in real_names})
        missing = [o for o in needed if o not in objects]
        if missing:
            raise ValueError(f"no alignment annotation for objects: {', '.join(missing)}")
        transforms = {o: _transform_from(objects[o], f"object {o}") for o in needed}

    def score(name):
        real = read_rgb(Path(real_dir) / name)
        gen = read_rgb(Path(gen_dir) / name)
        if alignment == "none":
            a, b = real, gen
        else:
            key = None if alignment == "global" else _object_of(name)
            a, b = warp_and_crop(real, gen, transforms[key])
        entry = {"name": name, **compare(a, b).to_dict(), "size": [int(b.shape[1]), int(b.shape[0])]}
        return entry

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            pairs = list(pool.map(score, real_names))
    else:
        pairs = [score(n) for n in real_names]

    mean, sd = {}, {}
    for key in ("ssim", "mae"):
        mean[key], sd[key] = _aggregate([p[key] for p in pairs])
    mean["psnr"], sd["psnr"] = _aggregate([p["psnr"] for p in pairs if p["psnr"] is not None])
    sizes = np.array([p["size"] for p in pairs], dtype=np.float64).reshape(-1, 2)
    return {
        "schema_version": 1,
        "alignment": alignment,
        "count": len(pairs),
        "psnr_infinite_count": sum(p["psnr_infinite"] for p in pairs),
        "mean_size": sizes.mean(axis=0).tolist() if len(pairs) else None,
        "pairs": pairs,
        "mean": mean,
        "sd": sd,
    }


def format_report(report) -> str:
    """Human-readable one-row summary table."""

    def cell(key, fmt, suffix=""):
        m, s = report["mean"].get(key), report["sd"].get(key)
        if m is None:
            return "inf" if key == "psnr" and report.get("psnr_infinite_count") else "n/a"
        return f"{m:{fmt}} +/- {s:{fmt}}{suffix}"

    head = f"{'alignment':<12} {'pairs':>5}  {'SSIM':>18}  {'PSNR (dB)':>18}  {'MAE':>18}"
    row = (
        f"{report['alignment']:<12} {report['count']:>5}  {cell('ssim', '.3f'):>18}  "
        f"{cell('psnr', '.2f'):>18}  {cell('mae', '.2f', '%'):>18}"
    )
    return head + "\n" + row


def contact_centroids(image, background, threshold=12.0, min_area=20):
    """Centroids ``(x, y, area)`` of regions that differ from the background.

    Meant to help pick alignment points by hand.
    """
    img = check_image(image).astype(np.float64)
    bg = check_image(background).astype(np.float64)
    if img.shape != bg.shape:
        raise ValueError("image and background sizes differ")
    mask = np.abs(img - bg).max(axis=2) > threshold
    labels, n = ndimage.label(mask)
    out = []
    for i in range(1, n + 1):
        ys, xs = np.nonzero(labels == i)
        if ys.size >= min_area:
            out.append((float(xs.mean()), float(ys.mean()), int(ys.size)))
    return sorted(out, key=lambda c: -c[2])
