"""Cameras, rays, analytic test scenes and the on-disk dataset format.

Camera convention: right-handed world, camera-to-world poses, the camera looks
down its local -z axis with +x to the right and +y up. Image rows grow
downward, so pixel row ``py`` maps to camera ``-y``. Pixel ``(px, py)``
back-projects through its center ``(px + 0.5, py + 0.5)``.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .errors import InputDomainError, ManifestParseError, ValidationError

DEFAULT_BOUNDS = np.array([[-1.0, -1.0, -1.0], [1.0, 1.0, 1.0]])
DEFAULT_NEAR = 0.05
MANIFEST_NAME = "dataset.json"
MANIFEST_VERSION = 1


def default_far(bounds=DEFAULT_BOUNDS) -> float:
    """Twice the domain diagonal."""
    b = np.asarray(bounds, dtype=np.float64)
    return float(2.0 * np.linalg.norm(b[1] - b[0]))


def _check_rotation(R, what="rotation"):
    R = np.asarray(R, dtype=np.float64)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        raise ValidationError(f"{what} must be a finite 3x3 matrix")
    if np.max(np.abs(R.T @ R - np.eye(3))) > 1e-6 or abs(np.linalg.det(R) - 1.0) > 1e-6:
        raise ValidationError(f"{what} must be orthonormal with determinant +1 (tolerance 1e-6)")


@dataclass(frozen=True)
class Camera:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)
        _check_rotation(R)
        if not (self.fx > 0 and self.fy > 0):
            raise ValidationError("focal lengths fx, fy must be > 0")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValidationError("principal point must satisfy 0 <= cx < width, 0 <= cy < height")

    @property
    def position(self) -> np.ndarray:
        return self.translation

    @property
    def c2w(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    @classmethod
    def from_c2w(cls, c2w, fx, fy, cx, cy, width, height) -> "Camera":
        c2w = np.asarray(c2w, dtype=np.float64).reshape(4, 4)
        return cls(fx, fy, cx, cy, int(width), int(height), c2w[:3, :3], c2w[:3, 3])

    def intrinsics(self) -> dict:
        return {"fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
                "width": self.width, "height": self.height}


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    direction: np.ndarray
    t_near: float = DEFAULT_NEAR
    t_far: float = default_far()

    def __post_init__(self):
        o = np.asarray(self.origin, dtype=np.float64).reshape(3)
        d = np.asarray(self.direction, dtype=np.float64).reshape(3)
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "direction", d)
        if abs(np.linalg.norm(d) - 1.0) > 1e-6:
            raise ValidationError("ray direction must be unit length")
        if not (0 <= self.t_near < self.t_far):
            raise ValidationError("ray needs 0 <= t_near < t_far")

    def at(self, t):
        return self.origin + np.multiply.outer(np.asarray(t, dtype=np.float64), self.direction)


def look_at(eye, target=(0.0, 0.0, 0.0), up=(0.0, 1.0, 0.0)) -> np.ndarray:
    """Camera-to-world rotation whose -z axis points from ``eye`` to ``target``."""
    eye = np.asarray(eye, dtype=np.float64)
    fwd = np.asarray(target, dtype=np.float64) - eye
    fwd /= np.linalg.norm(fwd)
    right = np.cross(fwd, np.asarray(up, dtype=np.float64))
    if np.linalg.norm(right) < 1e-9:
        right = np.cross(fwd, [0.0, 0.0, 1.0])
    right /= np.linalg.norm(right)
    true_up = np.cross(right, fwd)
    return np.stack([right, true_up, -fwd], axis=1)


def spherical_eye(radius, azimuth_deg, elevation_deg, target=(0.0, 0.0, 0.0)) -> np.ndarray:
    az, el = np.radians(azimuth_deg), np.radians(elevation_deg)
    return np.asarray(target, dtype=np.float64) + radius * np.array(
        [np.cos(el) * np.sin(az), np.sin(el), np.cos(el) * np.cos(az)])


def orbit_cameras(azimuths_deg, elevations_deg, radius=3.0, target=(0.0, 0.0, 0.0),
                  width=48, height=48, focal=96.0) -> list[Camera]:
    """Pinhole cameras on a sphere around ``target``, all looking at it."""
    azs = np.atleast_1d(np.asarray(azimuths_deg, dtype=np.float64))
    els = np.broadcast_to(np.asarray(elevations_deg, dtype=np.float64), azs.shape)
    cams = []
    for az, el in zip(azs, els):
        eye = spherical_eye(radius, az, el, target)
        cams.append(Camera(focal, focal, width / 2.0, height / 2.0, width, height,
                           look_at(eye, target), eye))
    return cams


def _camera_dirs(camera: Camera, px, py):
    px = np.asarray(px, dtype=np.float64)
    py = np.asarray(py, dtype=np.float64)
    d_cam = np.stack([(px + 0.5 - camera.cx) / camera.fx,
                      -(py + 0.5 - camera.cy) / camera.fy,
                      -np.ones_like(px)], axis=-1)
    d = d_cam @ camera.rotation.T
    return d / np.linalg.norm(d, axis=-1, keepdims=True)


def generate_ray(camera: Camera, px, py, jitter: bool = False, rng=None,
                 t_near: float = DEFAULT_NEAR, t_far: float | None = None) -> Ray:
    """Ray through pixel ``(px, py)``; ``jitter`` adds a uniform sub-pixel offset."""
    if not (0 <= px < camera.width and 0 <= py < camera.height):
        raise InputDomainError(
            f"pixel ({px}, {py}) outside image of size {camera.width}x{camera.height}")
    if jitter:
        rng = np.random.default_rng(rng)
        px = px + rng.uniform(-0.5, 0.5)
        py = py + rng.uniform(-0.5, 0.5)
    d = _camera_dirs(camera, px, py)
    return Ray(camera.position.copy(), d, t_near, default_far() if t_far is None else t_far)


def camera_rays(camera: Camera, jitter: bool = False, rng=None):
    """All pixel rays of a camera, row-major: origins (H*W, 3), dirs (H*W, 3)."""
    py, px = np.meshgrid(np.arange(camera.height), np.arange(camera.width), indexing="ij")
    px = px.reshape(-1).astype(np.float64)
    py = py.reshape(-1).astype(np.float64)
    if jitter:
        rng = np.random.default_rng(rng)
        px = px + rng.uniform(-0.5, 0.5, px.shape)
        py = py + rng.uniform(-0.5, 0.5, py.shape)
    d = _camera_dirs(camera, px, py)
    o = np.broadcast_to(camera.position, d.shape).copy()
    return o, d


# --------------------------------------------------------------------------
# analytic primitives


def _as_rgb(v):
    a = np.asarray(v, dtype=np.float64).reshape(3)
    if np.any(a < 0) or np.any(a > 1):
        raise ValidationError("albedo components must lie in [0, 1]")
    return a


@dataclass
class Sphere:
    center: np.ndarray
    radius: float
    albedo: np.ndarray = field(default_factory=lambda: np.full(3, 0.8))
    is_floater: bool = False
    kind = "sphere"

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=np.float64).reshape(3)
        self.albedo = _as_rgb(self.albedo)
        if not self.radius > 0:
            raise ValidationError("sphere radius must be > 0")

    def aabb(self):
        return self.center - self.radius, self.center + self.radius

    def contains(self, pts):
        return np.sum((np.asarray(pts) - self.center) ** 2, axis=-1) <= self.radius ** 2

    def intersect(self, o, d, t_near):
        oc = o - self.center
        b = np.sum(d * oc, axis=-1)
        c = np.sum(oc * oc, axis=-1) - self.radius ** 2
        disc = b * b - c
        ok = disc >= 0
        sq = np.sqrt(np.where(ok, disc, 0.0))
        t0 = -b - sq
        t1 = -b + sq
        t = np.where(t0 >= t_near, t0, np.where(t1 >= t_near, t1, np.inf))
        return np.where(ok, t, np.inf)

    def normal(self, p):
        n = p - self.center
        return n / np.linalg.norm(n, axis=-1, keepdims=True)

    def to_json(self):
        return {"kind": "sphere", "center": self.center.tolist(), "radius": float(self.radius),
                "albedo": self.albedo.tolist(), "is_floater": bool(self.is_floater)}


@dataclass
class Box:
    """Axis-aligned box; ``size`` holds the full edge lengths."""

    center: np.ndarray
    size: np.ndarray
    albedo: np.ndarray = field(default_factory=lambda: np.full(3, 0.8))
    is_floater: bool = False
    kind = "box"

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=np.float64).reshape(3)
        self.size = np.broadcast_to(np.asarray(self.size, dtype=np.float64), (3,)).copy()
        self.albedo = _as_rgb(self.albedo)
        if np.any(self.size <= 0):
            raise ValidationError("box size must be > 0 on every axis")

    def aabb(self):
        return self.center - self.size / 2, self.center + self.size / 2

    def contains(self, pts):
        lo, hi = self.aabb()
        pts = np.asarray(pts)
        return np.all((pts >= lo) & (pts <= hi), axis=-1)

    def intersect(self, o, d, t_near):
        """Slab test. Entry ties count as hits (t_enter <= t_exit)."""
        lo, hi = self.aabb()
        o = np.atleast_2d(o)
        d = np.atleast_2d(d)
        t_enter = np.full(o.shape[0], -np.inf)
        t_exit = np.full(o.shape[0], np.inf)
        miss = np.zeros(o.shape[0], dtype=bool)
        for a in range(3):
            par = d[:, a] == 0
            with np.errstate(divide="ignore", invalid="ignore"):
                ta = (lo[a] - o[:, a]) / d[:, a]
                tb = (hi[a] - o[:, a]) / d[:, a]
            tmin = np.where(par, -np.inf, np.minimum(ta, tb))
            tmax = np.where(par, np.inf, np.maximum(ta, tb))
            miss |= par & ((o[:, a] < lo[a]) | (o[:, a] > hi[a]))
            t_enter = np.maximum(t_enter, tmin)
            t_exit = np.minimum(t_exit, tmax)
        hit = ~miss & (t_enter <= t_exit) & (t_exit >= t_near)
        t = np.where(t_enter >= t_near, t_enter, t_exit)
        return np.where(hit, t, np.inf)

    def normal(self, p):
        lo, hi = self.aabb()
        dist = np.stack([np.abs(p - lo), np.abs(p - hi)], axis=1)  # (n, 2, 3)
        flat = dist.reshape(len(p), 6)
        k = np.argmin(flat, axis=1)
        n = np.zeros_like(p)
        axis = k % 3
        sign = np.where(k < 3, -1.0, 1.0)
        n[np.arange(len(p)), axis] = sign
        return n

    def to_json(self):
        return {"kind": "box", "center": self.center.tolist(), "size": self.size.tolist(),
                "albedo": self.albedo.tolist(), "is_floater": bool(self.is_floater)}


def primitive_from_json(obj: dict, where: str = "primitive"):
    try:
        kind = obj["kind"]
        albedo = obj.get("albedo", [0.8, 0.8, 0.8])
        floater = bool(obj.get("is_floater", False))
        if kind == "sphere":
            return Sphere(obj["center"], float(obj["radius"]), albedo, floater)
        if kind == "box":
            return Box(obj["center"], obj["size"], albedo, floater)
    except KeyError as exc:
        raise ManifestParseError(f"{where}: missing field {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        raise ManifestParseError(f"{where}: {exc}") from None
    raise ManifestParseError(f"{where}.kind: unknown primitive kind {kind!r}")


LIGHT_DIR = np.array([0.3, 1.0, 0.5]) / np.linalg.norm([0.3, 1.0, 0.5])


@dataclass
class SyntheticScene:
    primitives: list = field(default_factory=list)
    bounds: np.ndarray = field(default_factory=lambda: DEFAULT_BOUNDS.copy())
    background: np.ndarray = field(default_factory=lambda: np.zeros(3))
    shading: str = "flat"

    def __post_init__(self):
        self.bounds = np.asarray(self.bounds, dtype=np.float64).reshape(2, 3)
        self.background = _as_rgb(self.background)
        if self.shading not in ("flat", "lambertian"):
            raise ValidationError(f"shading must be 'flat' or 'lambertian', got {self.shading!r}")
        for i, p in enumerate(self.primitives):
            lo, hi = p.aabb()
            if np.any(lo < self.bounds[0] - 1e-12) or np.any(hi > self.bounds[1] + 1e-12):
                raise ValidationError(f"primitives[{i}] ({p.kind}) extends outside the domain bounds")

    @property
    def surfaces(self):
        return [p for p in self.primitives if not p.is_floater]

    @property
    def floaters(self):
        return [p for p in self.primitives if p.is_floater]

    def to_json(self) -> dict:
        return {"bounds": self.bounds.tolist(), "background": self.background.tolist(),
                "shading": self.shading, "primitives": [p.to_json() for p in self.primitives]}

    @classmethod
    def from_json(cls, obj) -> "SyntheticScene":
        if isinstance(obj, list):
            obj = {"primitives": obj}
        prims = [primitive_from_json(p, f"primitives[{i}]") for i, p in enumerate(obj.get("primitives", []))]
        return cls(prims, obj.get("bounds", DEFAULT_BOUNDS.tolist()),
                   obj.get("background", [0.0, 0.0, 0.0]), obj.get("shading", "flat"))


def load_scene(path) -> SyntheticScene:
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ManifestParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return SyntheticScene.from_json(obj)


def save_scene(scene: SyntheticScene, path) -> None:
    Path(path).write_text(json.dumps(scene.to_json(), indent=2))


def trace_rays(scene: SyntheticScene, origins, dirs, t_near=DEFAULT_NEAR, t_far=np.inf,
               include_floaters: bool = False):
    """First-hit oracle for a batch of rays.

    Returns colors (n, 3), depth (n,) with +inf on miss, hit flags and the index
    into ``scene.primitives`` of the first hit (-1 on miss).
    """
    o = np.atleast_2d(np.asarray(origins, dtype=np.float64))
    d = np.atleast_2d(np.asarray(dirs, dtype=np.float64))
    n = len(o)
    best = np.full(n, np.inf)
    which = np.full(n, -1)
    for i, p in enumerate(scene.primitives):
        if p.is_floater and not include_floaters:
            continue
        t = p.intersect(o, d, t_near)
        closer = (t < best) & (t <= t_far)
        best = np.where(closer, t, best)
        which = np.where(closer, i, which)
    hit = which >= 0
    colors = np.broadcast_to(scene.background, (n, 3)).copy()
    for i, p in enumerate(scene.primitives):
        sel = which == i
        if not np.any(sel):
            continue
        c = np.broadcast_to(p.albedo, (sel.sum(), 3))
        if scene.shading == "lambertian":
            pts = o[sel] + best[sel, None] * d[sel]
            lam = np.clip(p.normal(pts) @ LIGHT_DIR, 0.0, 1.0)
            c = c * (0.2 + 0.8 * lam[:, None])
        colors[sel] = c
    depth = np.where(hit, best, np.inf)
    return colors, depth, hit, which


def trace_oracle(scene: SyntheticScene, ray: Ray):
    """Exact first intersection: (rgb, depth, hit). Floaters are never drawn."""
    c, dpt, hit, _ = trace_rays(scene, ray.origin[None], ray.direction[None], ray.t_near, ray.t_far)
    return c[0], float(dpt[0]), bool(hit[0])


def floater_violations(scene: SyntheticScene, cameras, t_near=DEFAULT_NEAR, t_far=None,
                       mode: str = "first_hit") -> list[tuple[int, int, int]]:
    """Training-camera pixels that see a floater.

    ``first_hit`` flags pixels whose first surface (with floaters included) is a
    floater; ``any_hit`` flags any intersection with a floater before t_far.
    Returns (camera index, floater primitive index, pixel count) triples.
    """
    t_far = default_far(scene.bounds) if t_far is None else t_far
    floaters = [i for i, p in enumerate(scene.primitives) if p.is_floater]
    out = []
    for ci, cam in enumerate(cameras):
        o, d = camera_rays(cam)
        if mode == "first_hit":
            _, _, _, which = trace_rays(scene, o, d, t_near, t_far, include_floaters=True)
            for fi in floaters:
                cnt = int(np.sum(which == fi))
                if cnt:
                    out.append((ci, fi, cnt))
        elif mode == "any_hit":
            for fi in floaters:
                t = scene.primitives[fi].intersect(o, d, t_near)
                cnt = int(np.sum(t <= t_far))
                if cnt:
                    out.append((ci, fi, cnt))
        else:
            raise InputDomainError(f"unknown mode {mode!r}")
    return out


# --------------------------------------------------------------------------
# datasets


@dataclass
class Dataset:
    cameras: list
    images: list
    depths: list | None = None
    splits: list | None = None
    near: float = DEFAULT_NEAR
    far: float = default_far()
    background: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        if self.splits is None:
            self.splits = ["train"] * len(self.cameras)
        self.background = np.asarray(self.background, dtype=np.float64).reshape(3)
        if not (len(self.cameras) == len(self.images) == len(self.splits)):
            raise ValidationError("cameras, images and splits must have equal length")
        for i, (cam, img) in enumerate(zip(self.cameras, self.images)):
            if img.shape != (cam.height, cam.width, 3):
                raise ValidationError(
                    f"images[{i}] has shape {img.shape}, camera expects {(cam.height, cam.width, 3)}")
            if np.any(img < 0) or np.any(img > 1):
                raise ValidationError(f"images[{i}] has pixel values outside [0, 1]")
        if self.depths is not None:
            for i, (cam, dep) in enumerate(zip(self.cameras, self.depths)):
                if dep is not None and dep.shape != (cam.height, cam.width):
                    raise ValidationError(f"depths[{i}] does not match camera size")
        if not (0 <= self.near < self.far):
            raise ValidationError("dataset needs 0 <= near < far")

    def indices(self, split: str) -> list[int]:
        return [i for i, s in enumerate(self.splits) if s == split]

    def subset(self, split: str) -> "Dataset":
        idx = self.indices(split)
        return Dataset([self.cameras[i] for i in idx], [self.images[i] for i in idx],
                       None if self.depths is None else [self.depths[i] for i in idx],
                       [split] * len(idx), self.near, self.far, self.background)

    def pixel_rays(self, split: str = "train"):
        """Pixel-center rays and target colors for every pixel of a split."""
        os_, ds, cs = [], [], []
        for i in self.indices(split):
            o, d = camera_rays(self.cameras[i])
            os_.append(o)
            ds.append(d)
            cs.append(self.images[i].reshape(-1, 3))
        if not os_:
            raise InputDomainError(f"dataset has no {split!r} frames")
        return np.concatenate(os_), np.concatenate(ds), np.concatenate(cs)


class CameraOutsideDomainWarning(UserWarning):
    pass


def render_dataset(scene: SyntheticScene, cameras, splits=None, near=None, far=None) -> Dataset:
    """Oracle images (8-bit quantized) and depths (float32) for each camera."""
    cameras = list(cameras)
    if not cameras:
        raise InputDomainError("render_dataset needs at least one camera")
    near = DEFAULT_NEAR if near is None else near
    far = default_far(scene.bounds) if far is None else far
    images, depths = [], []
    for i, cam in enumerate(cameras):
        p = cam.position
        if np.any(p < scene.bounds[0]) or np.any(p > scene.bounds[1]):
            warnings.warn(f"camera {i} at {p.round(3).tolist()} lies outside the domain bounds",
                          CameraOutsideDomainWarning, stacklevel=2)
        o, d = camera_rays(cam)
        c, dep, _, _ = trace_rays(scene, o, d, near, far)
        images.append(io.quantize8(c.reshape(cam.height, cam.width, 3)))
        depths.append(dep.reshape(cam.height, cam.width).astype(np.float32))
    return Dataset(cameras, images, depths, splits, near, far, scene.background.copy())


def save_dataset(dataset: Dataset, path) -> Path:
    """Write ``dataset.json`` plus PNG images and PFM depths under ``path``."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    frames = []
    for i, cam in enumerate(dataset.cameras):
        img_rel = f"images/{i:03d}.png"
        io.write_png(root / img_rel, dataset.images[i])
        dep_rel = None
        if dataset.depths is not None and dataset.depths[i] is not None:
            dep_rel = f"depths/{i:03d}.pfm"
            io.write_pfm(root / dep_rel, dataset.depths[i])
        frames.append({
            "image": img_rel,
            "depth": dep_rel,
            "split": dataset.splits[i],
            "intrinsics": cam.intrinsics(),
            "pose": cam.c2w.reshape(-1).tolist(),
        })
    manifest = {
        "format": "freespace-dataset",
        "version": MANIFEST_VERSION,
        "near": dataset.near,
        "far": dataset.far,
        "background": dataset.background.tolist(),
        "frames": frames,
    }
    out = root / MANIFEST_NAME
    out.write_text(json.dumps(manifest, indent=2))
    return out


def _field(obj, key, where):
    if not isinstance(obj, dict) or key not in obj:
        raise ManifestParseError(f"{where}.{key}: missing field")
    return obj[key]


def load_dataset(path) -> Dataset:
    path = Path(path)
    manifest_path = path / MANIFEST_NAME if path.is_dir() else path
    root = manifest_path.parent
    if not manifest_path.exists():
        raise ValidationError(f"{manifest_path}: manifest not found")
    try:
        m = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise ManifestParseError(f"{manifest_path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    frames = _field(m, "frames", "manifest")
    if not isinstance(frames, list):
        raise ManifestParseError("manifest.frames: expected a list")
    cams, images, depths, splits = [], [], [], []
    for i, fr in enumerate(frames):
        where = f"frames[{i}]"
        intr = _field(fr, "intrinsics", where)
        pose = np.asarray(_field(fr, "pose", where), dtype=np.float64)
        if pose.size != 16:
            raise ManifestParseError(f"{where}.pose: expected 16 numbers (row-major 4x4)")
        vals = {k: _field(intr, k, f"{where}.intrinsics") for k in ("fx", "fy", "cx", "cy", "width", "height")}
        try:
            _check_rotation(pose.reshape(4, 4)[:3, :3], f"{where}.pose rotation")
            cam = Camera.from_c2w(pose, **vals)
        except ValidationError as exc:
            raise ValidationError(f"{where}: {exc}") from None
        img_path = root / _field(fr, "image", where)
        if not img_path.exists():
            raise ValidationError(f"{where}.image: file not found: {img_path}")
        img = io.read_png(img_path)
        if img.shape[:2] != (cam.height, cam.width):
            raise ValidationError(
                f"{where}.image: {img_path} is {img.shape[1]}x{img.shape[0]}, "
                f"intrinsics say {cam.width}x{cam.height}")
        dep = None
        if fr.get("depth"):
            dpath = root / fr["depth"]
            if not dpath.exists():
                raise ValidationError(f"{where}.depth: file not found: {dpath}")
            dep = io.read_pfm(dpath)
        cams.append(cam)
        images.append(img)
        depths.append(dep)
        splits.append(fr.get("split", "train"))
    near = float(m.get("near", DEFAULT_NEAR))
    far = float(m.get("far", default_far()))
    has_depth = any(d is not None for d in depths)
    return Dataset(cams, images, depths if has_depth else None, splits, near, far,
                   m.get("background", [0.0, 0.0, 0.0]))
