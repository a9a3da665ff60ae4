"""Synthetic depth maps of primitive objects pressed into the sensor.

The camera sits at the origin looking along ``+Z``; image columns run
along ``+X`` and rows along ``+Y``.  The membrane rest plane is at
``Z = camera.distance``.  Primitives are placed in membrane coordinates
``(x, y, z)`` where ``x, y`` are camera ``X, Y`` and ``z`` is elevation
toward the camera (``z = distance - Z``).

Every primitive's local origin is its top centre, the point that first
touches the membrane, and its body extends toward negative local ``z``.
A pose therefore puts the top of an unrotated object at elevation
``pose.z``; ``press_depth`` then pushes the whole scene further toward the
camera.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

__all__ = [
    "Camera",
    "Pose",
    "Primitive",
    "SceneSpec",
    "GridPoint",
    "SHAPES",
    "render_depth",
    "grid_poses",
    "scene_from_dict",
    "scene_to_dict",
]

SHAPES = ("sphere", "box", "cylinder", "cone", "torus", "wave", "composite")

# dimension keys per shape
_DIMS = {
    "sphere": ("radius",),
    "box": ("size_x", "size_y", "size_z"),
    "cylinder": ("radius", "height"),
    "cone": ("radius", "height"),
    "torus": ("major_radius", "minor_radius"),
    "wave": ("size_x", "size_y", "size_z", "wavelength", "amplitude"),
    "composite": (),
}

_TRACE_TOL = 1e-10
_TRACE_ITERS = 400


@dataclass(frozen=True)
class Camera:
    """Orthographic (``pixel_size`` m/px) or pinhole (horizontal ``fov`` degrees)."""

    model: str = "orthographic"
    width: int = 640
    height: int = 480
    distance: float = 0.03
    pixel_size: float = 5e-5
    fov: float = 70.0

    def __post_init__(self):
        if self.model not in ("orthographic", "pinhole"):
            raise ValueError(f"camera model must be 'orthographic' or 'pinhole', got {self.model!r}")
        if self.width < 3 or self.height < 3:
            raise ValueError(f"camera must be at least 3x3 pixels, got {self.width}x{self.height}")
        if not self.distance > 0 or not self.pixel_size > 0:
            raise ValueError("camera distance and pixel_size must be positive")
        if not 0 < self.fov < 180:
            raise ValueError(f"fov must lie in (0, 180) degrees, got {self.fov}")

    def rays(self):
        """Ray origins and unit directions in camera coordinates, each ``(H*W, 3)``."""
        cols = np.arange(self.width) - (self.width - 1) / 2.0
        rows = np.arange(self.height) - (self.height - 1) / 2.0
        u, v = np.meshgrid(cols, rows)
        n = u.size
        if self.model == "orthographic":
            origins = np.zeros((n, 3))
            origins[:, 0] = u.ravel() * self.pixel_size
            origins[:, 1] = v.ravel() * self.pixel_size
            dirs = np.zeros((n, 3))
            dirs[:, 2] = 1.0
            return origins, dirs
        focal = (self.width / 2.0) / math.tan(math.radians(self.fov) / 2.0)
        dirs = np.stack([u.ravel(), v.ravel(), np.full(n, focal)], axis=1)
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        return np.zeros((n, 3)), dirs


@dataclass(frozen=True)
class Pose:
    """Position in meters (membrane coordinates) and XYZ Euler angles in degrees."""

    x: float = 0.0
    y: float = 0.0
    z: float = 0.0
    roll: float = 0.0
    pitch: float = 0.0
    yaw: float = 0.0

    def rotation(self) -> np.ndarray:
        rx, ry, rz = (math.radians(a) for a in (self.roll, self.pitch, self.yaw))
        cx, sx, cy, sy, cz, sz = (
            math.cos(rx), math.sin(rx), math.cos(ry), math.sin(ry), math.cos(rz), math.sin(rz)
        )
        Rx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
        Ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
        Rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
        return Rz @ Ry @ Rx

    @property
    def position(self):
        return np.array([self.x, self.y, self.z])


@dataclass(frozen=True)
class Primitive:
    shape: str
    dims: dict = field(default_factory=dict)
    pose: Pose = Pose()
    children: tuple = ()

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown shape {self.shape!r}; expected one of {SHAPES}")
        dims = {k: float(v) for k, v in dict(self.dims).items()}
        needed = _DIMS[self.shape]
        missing = [k for k in needed if k not in dims]
        if missing:
            raise ValueError(f"{self.shape} needs dimensions {missing}")
        extra = sorted(set(dims) - set(needed))
        if extra:
            raise ValueError(f"{self.shape} does not take dimensions {extra}")
        for k, v in dims.items():
            if not v > 0:
                raise ValueError(f"{self.shape} dimension {k} must be positive, got {v}")
        if self.shape == "torus" and dims["minor_radius"] >= dims["major_radius"]:
            raise ValueError("torus minor_radius must be smaller than major_radius")
        if self.shape == "composite" and not self.children:
            raise ValueError("composite primitive needs at least one child")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "children", tuple(self.children))

    def bounding_radius(self) -> float:
        """Radius of a sphere about the local origin that contains the primitive."""
        d = self.dims
        if self.shape == "sphere":
            return 2.0 * d["radius"]
        if self.shape in ("box", "wave"):
            return math.sqrt((d["size_x"] / 2) ** 2 + (d["size_y"] / 2) ** 2 + d["size_z"] ** 2) + d.get(
                "amplitude", 0.0
            )
        if self.shape in ("cylinder", "cone"):
            return math.hypot(d["radius"], d["height"])
        if self.shape == "torus":
            return math.hypot(d["major_radius"] + d["minor_radius"], 2 * d["minor_radius"])
        return max(
            np.linalg.norm(c.pose.position) + c.bounding_radius() for c in self.children
        )


@dataclass(frozen=True)
class SceneSpec:
    camera: Camera = Camera()
    primitives: tuple = ()
    press_depth: float = 0.0
    far: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "primitives", tuple(self.primitives))
        if self.press_depth < 0:
            raise ValueError(f"press_depth must be non-negative, got {self.press_depth}")
        if self.press_depth >= self.camera.distance:
            raise ValueError("press_depth must be smaller than the camera-to-membrane distance")
        if not self.far > self.camera.distance:
            raise ValueError("far value must exceed the camera-to-membrane distance")


# --------------------------------------------------------------------------
# analytic intersections in the local frame (local z up, top at origin)

def _hit_sphere(o, d, dims):
    r = dims["radius"]
    c = o - np.array([0.0, 0.0, -r])
    b = np.einsum("ij,ij->i", c, d)
    disc = b * b - (np.einsum("ij,ij->i", c, c) - r * r)
    t = np.full(len(o), np.inf)
    ok = disc >= 0
    sq = np.sqrt(disc[ok])
    t0 = -b[ok] - sq
    t1 = -b[ok] + sq
    t[ok] = np.where(t0 >= 0, t0, np.where(t1 >= 0, t1, np.inf))
    return t


def _slab(o, d, lo, hi):
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / d
        a = (lo - o) * inv
        b = (hi - o) * inv
    tmin, tmax = np.minimum(a, b), np.maximum(a, b)
    # rays parallel to a slab: inside -> unbounded, outside -> empty
    par = d == 0
    inside = (o >= lo) & (o <= hi)
    tmin = np.where(par, np.where(inside, -np.inf, np.inf), tmin)
    tmax = np.where(par, np.where(inside, np.inf, -np.inf), tmax)
    return tmin, tmax


def _hit_box(o, d, dims):
    half = np.array([dims["size_x"] / 2, dims["size_y"] / 2])
    lo = np.array([-half[0], -half[1], -dims["size_z"]])
    hi = np.array([half[0], half[1], 0.0])
    tmin, tmax = _slab(o, d, lo, hi)
    t0 = tmin.max(axis=1)
    t1 = tmax.min(axis=1)
    t = np.where((t1 >= t0) & (t1 >= 0), np.where(t0 >= 0, t0, t1), np.inf)
    return t


def _hit_cylinder(o, d, dims):
    r, h = dims["radius"], dims["height"]
    n = len(o)
    best = np.full(n, np.inf)
    # lateral surface
    a = d[:, 0] ** 2 + d[:, 1] ** 2
    b = o[:, 0] * d[:, 0] + o[:, 1] * d[:, 1]
    c = o[:, 0] ** 2 + o[:, 1] ** 2 - r * r
    disc = b * b - a * c
    ok = (a > 0) & (disc >= 0)
    for sign in (-1.0, 1.0):
        t = np.full(n, np.inf)
        t[ok] = (-b[ok] + sign * np.sqrt(disc[ok])) / a[ok]
        z = o[:, 2] + t * d[:, 2]
        valid = (t >= 0) & (z <= 0) & (z >= -h)
        best = np.where(valid & (t < best), t, best)
    # caps
    for zc in (0.0, -h):
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (zc - o[:, 2]) / d[:, 2]
        x = o[:, 0] + t * d[:, 0]
        y = o[:, 1] + t * d[:, 1]
        valid = (t >= 0) & (x * x + y * y <= r * r) & np.isfinite(t)
        best = np.where(valid & (t < best), t, best)
    return best


# --------------------------------------------------------------------------
# signed distance functions for sphere-traced shapes

def _sdf_cone(p, dims):
    r, h = dims["radius"], dims["height"]
    q = np.stack([np.hypot(p[:, 0], p[:, 1]), p[:, 2]], axis=1)
    # apex at origin, base disc at z = -h
    a = np.array([0.0, 0.0])
    b = np.array([r, -h])
    ba = b - a
    pa = q - a
    hh = np.clip((pa @ ba) / (ba @ ba), 0.0, 1.0)
    d_side = np.linalg.norm(pa - hh[:, None] * ba, axis=1)
    d_base = np.hypot(np.maximum(q[:, 0] - r, 0.0), q[:, 1] + h)
    d_base = np.where(q[:, 0] <= r, np.abs(q[:, 1] + h), d_base)
    dist = np.minimum(d_side, d_base)
    inside = (q[:, 1] <= 0) & (q[:, 1] >= -h) & (q[:, 0] <= r * (-q[:, 1]) / h)
    return np.where(inside, -dist, dist)


def _sdf_torus(p, dims):
    big, small = dims["major_radius"], dims["minor_radius"]
    rho = np.hypot(p[:, 0], p[:, 1]) - big
    return np.hypot(rho, p[:, 2] + small) - small


def _sdf_wave(p, dims):
    sx, sy, sz = dims["size_x"] / 2, dims["size_y"] / 2, dims["size_z"]
    lam, amp = dims["wavelength"], dims["amplitude"]
    k = 2.0 * math.pi / lam
    surface = 0.5 * amp * (np.cos(k * p[:, 0]) - 1.0)
    lipschitz = math.sqrt(1.0 + (0.5 * amp * k) ** 2)
    top = (p[:, 2] - surface) / lipschitz
    sides = np.maximum(np.abs(p[:, 0]) - sx, np.abs(p[:, 1]) - sy)
    bottom = -(p[:, 2] + sz)
    return np.maximum(np.maximum(top, sides), bottom)


_ANALYTIC = {"sphere": _hit_sphere, "box": _hit_box, "cylinder": _hit_cylinder}
_SDF = {"cone": _sdf_cone, "torus": _sdf_torus, "wave": _sdf_wave}


def _sphere_trace(sdf, o, d, dims, t_start, t_end):
    t = t_start.copy()
    hit = np.full(len(o), np.inf)
    active = np.flatnonzero(t <= t_end)
    for _ in range(_TRACE_ITERS):
        if active.size == 0:
            break
        ta = t[active]
        dist = sdf(o[active] + ta[:, None] * d[active], dims)
        done = dist < _TRACE_TOL
        hit[active[done]] = ta[done]
        t[active] = ta + np.maximum(dist, 0.0)
        keep = ~done & (t[active] <= t_end[active])
        active = active[keep]
    return hit


def _hit_primitive(prim, o, d):
    if prim.shape == "composite":
        t = np.full(len(o), np.inf)
        for child in prim.children:
            t = np.minimum(t, _hit_transformed(child, o, d))
        return t
    if prim.shape in _ANALYTIC:
        return _ANALYTIC[prim.shape](o, d, prim.dims)
    # restrict marching to the bounding sphere
    rad = prim.bounding_radius()
    b = np.einsum("ij,ij->i", o, d)
    disc = b * b - (np.einsum("ij,ij->i", o, o) - rad * rad)
    t = np.full(len(o), np.inf)
    ok = disc >= 0
    if not ok.any():
        return t
    sq = np.sqrt(disc[ok])
    t_start = np.maximum(-b[ok] - sq, 0.0)
    t_end = -b[ok] + sq
    t[ok] = _sphere_trace(_SDF[prim.shape], o[ok], d[ok], prim.dims, t_start, t_end)
    return t


def _hit_transformed(prim, o, d):
    rot = prim.pose.rotation()
    # row vectors: local = (p - position) @ R
    lo = (o - prim.pose.position) @ rot
    ld = d @ rot
    return _hit_primitive(prim, lo, ld)


def render_depth(scene: SceneSpec) -> np.ndarray:
    """Per-pixel z-depth (meters along the camera axis) of the nearest surface.

    Pixels whose ray misses every primitive get ``scene.far``.
    """
    cam = scene.camera
    origins, dirs = cam.rays()
    depth = np.full(len(origins), np.inf)
    if scene.primitives:
        # camera frame -> membrane frame: z_m = distance - Z, shifted down by the press
        mo = np.empty_like(origins)
        mo[:, 0] = origins[:, 0]
        mo[:, 1] = origins[:, 1]
        mo[:, 2] = cam.distance - origins[:, 2] - scene.press_depth
        md = dirs.copy()
        md[:, 2] = -dirs[:, 2]
        t = np.full(len(origins), np.inf)
        for prim in scene.primitives:
            t = np.minimum(t, _hit_transformed(prim, mo, md))
        depth = t * dirs[:, 2] + origins[:, 2]
    depth = np.where(np.isfinite(depth) & (depth >= 0), depth, scene.far)
    return np.minimum(depth, scene.far).reshape(cam.height, cam.width)


class GridPoint(NamedTuple):
    index: tuple
    press_depth: float
    pose: Pose

    @property
    def name(self) -> str:
        return "pos_" + "_".join(str(v) for v in self.index)


def grid_poses(nx: int = 3, ny: int = 3, nz: int = 11, dx: float = 1e-3, dz: float = 1e-4):
    """Contact grid centred on the object.

    Returns a list of :class:`GridPoint` where ``index`` is the
    ``(i, j, k)`` grid label with ``i, j`` centred on zero and ``k`` the
    vertical step; ``k = 0`` is first contact and each further step presses
    ``dz`` deeper.  Poses are horizontal object offsets in the sensor frame.
    """
    for n in (nx, ny, nz):
        if int(n) != n or n < 1:
            raise ValueError(f"grid counts must be positive integers, got {(nx, ny, nz)}")
    if not dx > 0 or not dz > 0:
        raise ValueError("grid step sizes must be positive")
    out = []
    for k in range(nz):
        for j in range(ny):
            for i in range(nx):
                ci = i - (nx - 1) / 2.0
                cj = j - (ny - 1) / 2.0
                label = (_label(ci), _label(cj), k)
                out.append(GridPoint(label, k * dz, Pose(x=ci * dx, y=cj * dx, z=0.0)))
    return out


def _label(c):
    return int(c) if float(c).is_integer() else c


# --------------------------------------------------------------------------
# JSON mapping

def _pose_from(d):
    return Pose(**{k: float(v) for k, v in (d or {}).items()})


def _primitive_from(d):
    d = dict(d)
    shape = d.pop("shape")
    pose = _pose_from(d.pop("pose", None))
    children = tuple(_primitive_from(c) for c in d.pop("children", ()))
    dims = d.pop("dims", {})
    if d:
        raise ValueError(f"unknown primitive keys {sorted(d)}")
    return Primitive(shape=shape, dims=dims, pose=pose, children=children)


def scene_from_dict(data) -> SceneSpec:
    data = dict(data)
    cam = Camera(**data.pop("camera", {}))
    prims = tuple(_primitive_from(p) for p in data.pop("primitives", ()))
    press = float(data.pop("press_depth", 0.0))
    far = float(data.pop("far", 1.0))
    data.pop("schema_version", None)
    if data:
        raise ValueError(f"unknown scene keys {sorted(data)}")
    return SceneSpec(camera=cam, primitives=prims, press_depth=press, far=far)


def _primitive_to(p):
    out = {"shape": p.shape, "dims": dict(p.dims), "pose": vars(p.pose).copy()}
    if p.children:
        out["children"] = [_primitive_to(c) for c in p.children]
    return out


def scene_to_dict(scene: SceneSpec) -> dict:
    return {
        "schema_version": 1,
        "camera": vars(scene.camera).copy(),
        "primitives": [_primitive_to(p) for p in scene.primitives],
        "press_depth": scene.press_depth,
        "far": scene.far,
    }
