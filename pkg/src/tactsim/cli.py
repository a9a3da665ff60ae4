"""Command line entry point: ``tactsim <command> ...``.

Exit codes: 0 success, 1 computation error, 2 usage or IO error.
"""
from __future__ import annotations

import argparse
import contextlib
import hashlib
import json
import logging
import os
import shutil
import sys
import tempfile
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .augment import perturb_depth
from .config import ConfigError, augment_from_dict, default_config, dump_config, load_config
from .evaluate import (
    ManifestError,
    compare,
    constrained_affine,
    contact_centroids,
    dataset_report,
    format_report,
    load_annotations,
    warp_and_crop,
)
from .illumination import calibrate_pixel_to_meter, measure_contact_span, render_tactile
from .imagecore import ImageFormatError, read_depth, read_rgb, write_depth, write_rgb
from .scenegen import SceneSpec, grid_poses, render_depth, scene_from_dict

log = logging.getLogger("tactsim")

EXIT_OK, EXIT_COMPUTE, EXIT_IO = 0, 1, 2
IO_ERRORS = (OSError, ImageFormatError, ConfigError, ManifestError, json.JSONDecodeError)


class CommandError(Exception):
    def __init__(self, stage, message, code):
        super().__init__(message)
        self.stage = stage
        self.code = code


@contextlib.contextmanager
def stage(name):
    """Tag any failure inside the block with the pipeline stage name."""
    try:
        yield
    except CommandError:
        raise
    except FileNotFoundError as exc:
        msg = f"file not found: {exc.filename}" if exc.filename else str(exc)
        raise CommandError(name, msg, EXIT_IO) from exc
    except IO_ERRORS as exc:
        raise CommandError(name, str(exc), EXIT_IO) from exc
    except (ValueError, TypeError, ArithmeticError) as exc:
        raise CommandError(name, str(exc), EXIT_COMPUTE) from exc


def _threads():
    try:
        return max(1, int(os.environ.get("TACTSIM_THREADS", os.cpu_count() or 1)))
    except ValueError:
        return 1


def _emit(payload, as_json, text=None):
    if as_json:
        print(json.dumps(payload, indent=2, allow_nan=False))
    else:
        print(text if text is not None else json.dumps(payload, indent=2, allow_nan=False))


def _load_cfg(args):
    with stage("load-config"):
        cfg = load_config(args.config, strict=not args.lenient) if args.config else default_config()
    variant = getattr(args, "variant", None)
    if variant:
        cfg = replace(cfg, deform=replace(cfg.deform, variant=variant))
    if getattr(args, "background", None):
        with stage("load-background"):
            cfg = replace(cfg, illumination=replace(
                cfg.illumination, ambient=read_rgb(args.background), ambient_source=str(args.background)
            ))
    return cfg


def _depth_files(directory):
    d = Path(directory)
    if not d.is_dir():
        raise FileNotFoundError(f"not a directory: {d}")
    return sorted(p for p in d.iterdir() if p.suffix.lower() in (".pfm", ".png"))


# --------------------------------------------------------------------------
# commands

def cmd_render(args):
    cfg = _load_cfg(args)
    with stage("read-depth"):
        depth = read_depth(args.depth, scale=args.scale)
    with stage("render"):
        image = render_tactile(depth, cfg.deform, cfg.illumination)
    with stage("write-image"):
        write_rgb(image, args.out)
    return EXIT_OK


def cmd_batch(args):
    cfg = _load_cfg(args)
    with stage("list-inputs"):
        files = _depth_files(args.depth_dir)
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)

    def one(path):
        try:
            with stage("read-depth"):
                depth = read_depth(path, scale=args.scale)
            with stage("render"):
                image = render_tactile(depth, cfg.deform, cfg.illumination)
            with stage("write-image"):
                write_rgb(image, out_dir / (path.stem + ".png"))
            return None
        except CommandError as exc:
            return f"{path.name}: {exc.stage}: {exc}"

    workers = args.jobs or _threads()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            errors = [e for e in pool.map(one, files) if e]
    else:
        errors = [e for e in map(one, files) if e]
    summary = {"inputs": len(files), "written": len(files) - len(errors), "errors": errors}
    _emit(summary, args.json, f"rendered {summary['written']}/{len(files)} depth maps")
    for e in errors:
        print(f"tactsim batch: {e}", file=sys.stderr)
    return EXIT_COMPUTE if errors else EXIT_OK


def _write_depth(depth, path, args):
    fmt = args.format or Path(path).suffix.lstrip(".").lower() or "pfm"
    write_depth(depth, path, fmt=fmt, scale=args.scale if fmt == "png" else None)


def cmd_gen_depth(args):
    with stage("load-scene"):
        if args.scene:
            scene = scene_from_dict(json.loads(Path(args.scene).read_text()))
        elif args.config:
            scene = load_config(args.config).scene
        else:
            raise CommandError("load-scene", "gen-depth needs --scene or --config", EXIT_IO)
    if not args.grid:
        if not args.out:
            raise CommandError("write-depth", "--out is required without --grid", EXIT_IO)
        with stage("render-depth"):
            depth = render_depth(scene)
        with stage("write-depth"):
            _write_depth(depth, args.out, args)
        return EXIT_OK
    if not args.out_dir:
        raise CommandError("write-depth", "--out-dir is required with --grid", EXIT_IO)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ext = args.format or "pfm"
    points = grid_poses(dx=args.dx, dz=args.dz)
    for point in points:
        with stage("render-depth"):
            prims = tuple(
                replace(p, pose=replace(p.pose, x=p.pose.x + point.pose.x, y=p.pose.y + point.pose.y))
                for p in scene.primitives
            )
            depth = render_depth(SceneSpec(
                camera=scene.camera, primitives=prims,
                press_depth=scene.press_depth + point.press_depth, far=scene.far,
            ))
        with stage("write-depth"):
            _write_depth(depth, out_dir / f"{point.name}.{ext}", args)
    _emit({"written": len(points)}, args.json, f"wrote {len(points)} depth maps to {out_dir}")
    return EXIT_OK


def cmd_augment(args):
    cfg = _load_cfg(args)
    with stage("load-spec"):
        spec_path = Path(args.spec)
        spec = augment_from_dict(json.loads(spec_path.read_text()), base_dir=spec_path.parent)
        if args.seed is not None:
            spec = replace(spec, seed=args.seed)
    with stage("list-inputs"):
        files = _depth_files(args.depth_dir)
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
    jobs = [(i, j, f) for i, f in enumerate(files) for j in range(args.count)]

    def one(job):
        i, j, path = job
        try:
            with stage("read-depth"):
                depth = read_depth(path, scale=args.scale)
            with stage("augment"):
                image = render_tactile(perturb_depth(depth, spec, i * args.count + j), cfg.deform, cfg.illumination)
            with stage("write-image"):
                write_rgb(image, out_dir / f"{path.stem}_aug{j:03d}.png")
            return None
        except CommandError as exc:
            return f"{path.name}#{j}: {exc.stage}: {exc}"

    workers = args.jobs or _threads()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            errors = [e for e in pool.map(one, jobs) if e]
    else:
        errors = [e for e in map(one, jobs) if e]
    summary = {"inputs": len(files), "written": len(jobs) - len(errors), "errors": errors}
    _emit(summary, args.json, f"wrote {summary['written']} augmented images to {out_dir}")
    return EXIT_COMPUTE if errors else EXIT_OK


def _points(path):
    data = json.loads(Path(path).read_text())
    (p1, p2), (q1, q2) = data["src"], data["dst"]
    return constrained_affine(p1, p2, q1, q2)


def cmd_compare(args):
    with stage("read-images"):
        a, b = read_rgb(args.a), read_rgb(args.b)
    with stage("align"):
        if args.points:
            a, b = warp_and_crop(a, b, _points(args.points))
    with stage("compare"):
        report = compare(a, b).to_dict()
    psnr = "inf" if report["psnr_infinite"] else f"{report['psnr']:.2f} dB"
    _emit(report, args.json, f"SSIM {report['ssim']:.4f}  PSNR {psnr}  MAE {report['mae']:.2f}%")
    return EXIT_OK


def cmd_align(args):
    with stage("read-points"):
        data = json.loads(Path(args.points).read_text())
    with stage("align"):
        (p1, p2), (q1, q2) = data["src"], data["dst"]
        t = constrained_affine(p1, p2, q1, q2)
    result = t.to_dict()
    if args.real and args.gen:
        with stage("read-images"):
            real, gen = read_rgb(args.real), read_rgb(args.gen)
        with stage("warp"):
            wr, wg = warp_and_crop(real, gen, t)
        result["crop_size"] = [int(wg.shape[1]), int(wg.shape[0])]
        if args.out_dir:
            with stage("write-image"):
                out = Path(args.out_dir)
                out.mkdir(parents=True, exist_ok=True)
                write_rgb(wr, out / ("real_" + Path(args.real).name))
                write_rgb(wg, out / ("gen_" + Path(args.gen).name))
    _emit(result, args.json, f"scale {t.scale:.6f}  translation ({t.translation[0]:.3f}, {t.translation[1]:.3f})")
    return EXIT_OK


def cmd_report(args):
    with stage("read-annotations"):
        ann = load_annotations(args.annotations) if args.annotations else None
    with stage("report"):
        report = dataset_report(args.real_dir, args.gen_dir, args.alignment, ann, n_jobs=args.jobs or _threads())
    if args.out:
        with stage("write-report"):
            Path(args.out).write_text(json.dumps(report, indent=2, allow_nan=False) + "\n")
    _emit(report, args.json, format_report(report))
    return EXIT_OK


def cmd_calibrate(args):
    with stage("read-depth"):
        depth = read_depth(args.depth, scale=args.scale)
    with stage("calibrate"):
        span = measure_contact_span(depth, args.d_max, args.row)
        r = calibrate_pixel_to_meter(span, args.cube_side)
    _emit({"pixel_span": span, "pixel_to_meter": r}, args.json, f"span {span} px -> r = {r:.6e} m/px")
    return EXIT_OK


def cmd_candidates(args):
    with stage("read-images"):
        image, bg = read_rgb(args.image), read_rgb(args.background)
    with stage("centroids"):
        cents = contact_centroids(image, bg, threshold=args.threshold, min_area=args.min_area)
    payload = [{"x": x, "y": y, "area": a} for x, y, a in cents]
    text = "\n".join(f"x={x:.1f} y={y:.1f} area={a}" for x, y, a in cents) or "no contact regions found"
    _emit(payload, args.json, text)
    return EXIT_OK


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def cmd_fetch_dataset(args):
    with stage("read-manifest"):
        if args.manifest:
            manifest = json.loads(Path(args.manifest).read_text())
        else:
            manifest = json.loads(resources.files("tactsim").joinpath("data/dataset_manifest.json").read_text())
        files = manifest.get("files", [])
        if not files:
            raise CommandError(
                "read-manifest",
                f"manifest pins no files; supply --manifest with URLs and SHA-256 digests "
                f"(dataset home: {manifest.get('homepage', 'unknown')})",
                EXIT_IO,
            )
    dest = Path(args.dest)
    dest.mkdir(parents=True, exist_ok=True)
    fetched = []
    for entry in files:
        url, digest = entry["url"], entry["sha256"].lower()
        name = entry.get("path") or Path(urllib.parse.urlparse(url).path).name
        with stage("download"):
            fd, tmp = tempfile.mkstemp(dir=dest, suffix=".part")
            os.close(fd)
            try:
                with urllib.request.urlopen(url) as resp, open(tmp, "wb") as fh:
                    shutil.copyfileobj(resp, fh)
                got = _sha256(tmp)
                if got != digest:
                    raise CommandError(
                        "verify", f"{name}: checksum mismatch (expected {digest}, got {got}); refusing to unpack",
                        EXIT_COMPUTE,
                    )
                target = dest / name
                os.replace(tmp, target)
            finally:
                if os.path.exists(tmp):
                    os.remove(tmp)
        if entry.get("unpack", True) and any(name.endswith(s) for s in (".zip", ".tar.gz", ".tgz", ".tar")):
            with stage("unpack"):
                shutil.unpack_archive(str(target), str(dest))
        fetched.append(name)
    _emit({"fetched": fetched}, args.json, "\n".join(f"fetched {n}" for n in fetched))
    return EXIT_OK


def cmd_config(args):
    cfg = _load_cfg(args)
    with stage("write-config"):
        text = dump_config(cfg, args.out)
    if not args.out:
        print(text)
    return EXIT_OK


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tactsim", description="GelSight-style tactile image simulation")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=func)
        p.add_argument("--json", action="store_true", help="machine-readable output")
        return p

    def cfg_opts(p, variant=True):
        p.add_argument("--config", help="pipeline config JSON (default: built-in baseline)")
        p.add_argument("--lenient", action="store_true", help="warn instead of failing on unknown config keys")
        p.add_argument("--background", help="background image used as per-pixel ambient term")
        if variant:
            p.add_argument("--variant", choices=["single", "dog", "raw", "legacy"])

    p = add("render", cmd_render, "render one depth map")
    p.add_argument("--depth", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--scale", type=float, help="meters per unit for 16-bit PNG depth")
    cfg_opts(p)

    p = add("batch", cmd_batch, "render every depth map in a directory")
    p.add_argument("--depth-dir", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--scale", type=float)
    p.add_argument("--jobs", type=int, help="worker threads (default: TACTSIM_THREADS or CPU count)")
    cfg_opts(p)

    p = add("gen-depth", cmd_gen_depth, "ray-cast a primitive scene to a depth map")
    p.add_argument("--scene", help="scene JSON")
    p.add_argument("--config", help="take the scene section of a pipeline config")
    p.add_argument("--out")
    p.add_argument("--grid", action="store_true", help="render the 3x3x11 contact grid")
    p.add_argument("--out-dir")
    p.add_argument("--dx", type=float, default=1e-3)
    p.add_argument("--dz", type=float, default=1e-4)
    p.add_argument("--format", choices=["pfm", "png"])
    p.add_argument("--scale", type=float, default=1e-5, help="meters per unit for 16-bit PNG output")

    p = add("augment", cmd_augment, "texture-perturb depth maps and render them")
    p.add_argument("--depth-dir", required=True)
    p.add_argument("--spec", required=True, help="augmentation spec JSON")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--count", type=int, default=1, help="renders per input")
    p.add_argument("--seed", type=int)
    p.add_argument("--scale", type=float)
    p.add_argument("--jobs", type=int)
    cfg_opts(p)

    p = add("compare", cmd_compare, "SSIM/PSNR/MAE between two images")
    p.add_argument("--a", required=True, help="real (source) image")
    p.add_argument("--b", required=True, help="generated (target) image")
    p.add_argument("--points", help="alignment points JSON {src: [[x,y],[x,y]], dst: [...]}")

    p = add("align", cmd_align, "constrained alignment from two point pairs")
    p.add_argument("--points", required=True)
    p.add_argument("--real")
    p.add_argument("--gen")
    p.add_argument("--out-dir")

    p = add("report", cmd_report, "dataset comparison report")
    p.add_argument("--real-dir", required=True)
    p.add_argument("--gen-dir", required=True)
    p.add_argument("--alignment", choices=["none", "global", "per-object"], default="none")
    p.add_argument("--annotations")
    p.add_argument("--out", help="write the JSON report here")
    p.add_argument("--jobs", type=int)

    p = add("calibrate", cmd_calibrate, "pixel-to-meter ratio from a cube contact")
    p.add_argument("--depth", required=True)
    p.add_argument("--d-max", type=float, default=0.03)
    p.add_argument("--cube-side", type=float, default=0.005)
    p.add_argument("--row", type=int)
    p.add_argument("--scale", type=float)

    p = add("candidates", cmd_candidates, "print contact centroids to help pick alignment points")
    p.add_argument("--image", required=True)
    p.add_argument("--background", required=True)
    p.add_argument("--threshold", type=float, default=12.0)
    p.add_argument("--min-area", type=int, default=20)

    p = add("fetch-dataset", cmd_fetch_dataset, "download and verify the released dataset")
    p.add_argument("--manifest", help="manifest JSON with url/sha256 entries")
    p.add_argument("--dest", required=True)

    p = add("config", cmd_config, "print or write the effective config")
    p.add_argument("--out")
    cfg_opts(p)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except CommandError as exc:
        if getattr(args, "json", False):
            print(json.dumps({"error": str(exc), "stage": exc.stage, "exit_code": exc.code}), file=sys.stderr)
        else:
            print(f"tactsim {args.command}: {exc.stage}: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
