"""Image, mask, geometry and density metrics.

Every evaluation report carries the mask paradigm that produced it:

* ``gt-mask``: pixels come from the oracle visibility region alone.
* ``predicted-mask``: pixels must also lie inside the field's own predicted
  mask (accumulation >= 0.98), so methods that blank out content are not
  rewarded for it by PSNR and must pay in coverage.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, field as dc_field
from pathlib import Path

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .errors import EmptySceneError, InputDomainError
from .field import VoxelRadianceField, query_many, soften
from .io import write_csv
from .render import render_image, render_rays, sample_batch
from .scene import Camera, Ray, SyntheticScene, _camera_dirs, camera_rays, default_far, trace_rays

PSNR_CAP = 99.0
MASK_THRESHOLD = 0.98
DEPTH_ACC_THRESHOLD = 0.5
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2
SOFTEN_TRANSFORM = "2 * (sigmoid(sigma) - 0.5), sigmoid-softened and shifted to [0, 1]"
PARADIGMS = ("gt-mask", "predicted-mask")


def _pixel_mask(mask, shape2):
    if mask is None:
        return np.ones(shape2, dtype=bool)
    m = np.asarray(mask, dtype=bool)
    if m.shape != shape2:
        raise InputDomainError(f"mask shape {m.shape} does not match image {shape2}")
    return m


def psnr(a, b, mask=None) -> float:
    """10 log10(1 / MSE) over masked pixels, for images in [0, 1]. Capped at 99 dB."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise InputDomainError(f"image shapes differ: {a.shape} vs {b.shape}")
    m = _pixel_mask(mask, a.shape[:2])
    if not m.any():
        raise InputDomainError("psnr mask is empty")
    mse = float(np.mean((a[m] - b[m]) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * np.log10(1.0 / mse))


def _gauss_filter(x):
    # separable Gaussian over the valid region only
    r = SSIM_WINDOW // 2
    k = np.exp(-0.5 * (np.arange(-r, r + 1) / SSIM_SIGMA) ** 2)
    k /= k.sum()
    y = ndimage.correlate1d(x, k, axis=0, mode="constant")[r:-r]
    return ndimage.correlate1d(y, k, axis=1, mode="constant")[:, r:-r]


def ssim_map(a, b) -> np.ndarray:
    """Local SSIM at every valid window center, averaged over channels."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise InputDomainError(f"image shapes differ: {a.shape} vs {b.shape}")
    if min(a.shape[:2]) < SSIM_WINDOW:
        raise InputDomainError(f"image {a.shape[:2]} is smaller than the {SSIM_WINDOW}px SSIM window")
    if a.ndim == 2:
        a, b = a[..., None], b[..., None]
    maps = []
    for c in range(a.shape[2]):
        x, y = a[..., c], b[..., c]
        mx, my = _gauss_filter(x), _gauss_filter(y)
        vx = _gauss_filter(x * x) - mx * mx
        vy = _gauss_filter(y * y) - my * my
        cxy = _gauss_filter(x * y) - mx * my
        num = (2 * mx * my + SSIM_C1) * (2 * cxy + SSIM_C2)
        den = (mx * mx + my * my + SSIM_C1) * (vx + vy + SSIM_C2)
        maps.append(num / den)
    return np.mean(maps, axis=0)


def ssim(a, b, mask=None) -> float:
    """Mean local SSIM (11px Gaussian window, sigma 1.5, K1 0.01, K2 0.03, range 1).

    Only windows fully inside the image count; ``mask`` selects window centers.
    """
    smap = ssim_map(a, b)
    m = _pixel_mask(mask, np.asarray(a).shape[:2])
    r = SSIM_WINDOW // 2
    m = m[r:-r, r:-r]
    if not m.any():
        raise InputDomainError("ssim mask has no valid window centers")
    return float(smap[m].mean())


@dataclass
class PredictedMask:
    mask: np.ndarray
    threshold: float
    source: str = "accumulation"


def predicted_mask(accumulation, threshold: float = MASK_THRESHOLD) -> PredictedMask:
    """Pixels whose accumulation reaches ``threshold`` (ties included)."""
    acc = np.asarray(accumulation, dtype=np.float64)
    return PredictedMask(acc >= threshold, float(threshold))


def coverage(predicted, visible_region) -> float:
    """Percent of the visible region that the predicted mask marks occupied."""
    p = predicted.mask if isinstance(predicted, PredictedMask) else np.asarray(predicted, dtype=bool)
    v = np.asarray(visible_region, dtype=bool)
    if p.shape != v.shape:
        raise InputDomainError(f"mask shapes differ: {p.shape} vs {v.shape}")
    n = int(v.sum())
    if n == 0:
        raise InputDomainError("visible region is empty")
    return 100.0 * int(np.sum(p & v)) / n


def dice(a, b) -> float:
    """2|A & B| / (|A| + |B|); two empty masks agree perfectly (1.0)."""
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise InputDomainError(f"mask shapes differ: {a.shape} vs {b.shape}")
    total = int(a.sum()) + int(b.sum())
    if total == 0:
        return 1.0
    return 2.0 * int(np.sum(a & b)) / total


def _check_cloud(c, name):
    c = np.asarray(c, dtype=np.float64).reshape(-1, 3)
    if len(c) == 0:
        raise InputDomainError(f"point cloud {name} is empty")
    return c


def _nn_dist(src, dst, idx):
    return np.linalg.norm(src - dst[idx], axis=1)


def chamfer(a, b) -> float:
    """Symmetric mean nearest-neighbor distance, via k-d trees.

    Distances are recomputed from the tree's neighbor indices with the same
    expression as the brute-force version, so both agree exactly whenever
    they pick the same neighbor.
    """
    a = _check_cloud(a, "a")
    b = _check_cloud(b, "b")
    ia = cKDTree(b).query(a)[1]
    ib = cKDTree(a).query(b)[1]
    return 0.5 * (_nn_dist(a, b, ia).mean() + _nn_dist(b, a, ib).mean())


def chamfer_brute(a, b) -> float:
    """O(nm) reference for ``chamfer``."""
    a = _check_cloud(a, "a")
    b = _check_cloud(b, "b")
    d2 = ((a[:, None, :] - b[None, :, :]) ** 2).sum(-1)
    ia = d2.argmin(axis=1)
    ib = d2.argmin(axis=0)
    return 0.5 * (_nn_dist(a, b, ia).mean() + _nn_dist(b, a, ib).mean())


class PointCloudShortfall(UserWarning):
    pass


def extract_point_cloud(field: VoxelRadianceField, cameras, points_target: int = 35000,
                        rng=None, K: int = 128, near: float = 0.05, far: float | None = None,
                        max_rays: int | None = None, batch: int = 8192,
                        background=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Back-project the expected depth of random camera rays with accumulation >= 0.5.

    Rays go through uniformly random (continuous) pixel positions of uniformly
    chosen cameras. Stops at ``points_target`` points or after ``max_rays``
    rays (default 20x the target), warning about any shortfall.
    """
    cameras = list(cameras)
    far = default_far(field.bounds) if far is None else far
    max_rays = 20 * points_target if max_rays is None else max_rays
    rng = np.random.default_rng(rng)
    pts = []
    have = 0
    used = 0
    while have < points_target and used < max_rays:
        n = min(batch, max_rays - used)
        cam_idx = rng.integers(0, len(cameras), n)
        u = rng.random((n, 2))
        o = np.empty((n, 3))
        d = np.empty((n, 3))
        for ci in np.unique(cam_idx):
            sel = cam_idx == ci
            cam = cameras[ci]
            d[sel] = _camera_dirs(cam, u[sel, 0] * cam.width - 0.5, u[sel, 1] * cam.height - 0.5)
            o[sel] = cam.position
        t, delta = sample_batch(near, far, n, K)
        _, depth, acc, _ = render_rays(field, o, d, t, delta, background)
        keep = acc >= DEPTH_ACC_THRESHOLD
        pts.append(o[keep] + depth[keep, None] * d[keep])
        have += int(keep.sum())
        used += n
    if have == 0:
        raise EmptySceneError(f"no ray out of {used} reached accumulation {DEPTH_ACC_THRESHOLD}; "
                              "the field looks empty")
    cloud = np.concatenate(pts)[:points_target]
    if len(cloud) < points_target:
        warnings.warn(f"gathered {len(cloud)} of {points_target} points from {used} rays",
                      PointCloudShortfall, stacklevel=2)
    return cloud


def masked_depth(depth, accumulation, threshold: float = DEPTH_ACC_THRESHOLD) -> np.ndarray:
    """Expected depth with +inf where accumulation is below ``threshold``."""
    return np.where(np.asarray(accumulation) >= threshold, depth, np.inf)


def depth_errors(rendered, reference, mask=None) -> tuple[float, float]:
    """(RMSE, MAE) over masked pixels where both depths are finite."""
    r = np.asarray(rendered, dtype=np.float64)
    g = np.asarray(reference, dtype=np.float64)
    if r.shape != g.shape:
        raise InputDomainError(f"depth shapes differ: {r.shape} vs {g.shape}")
    m = _pixel_mask(mask, r.shape) & np.isfinite(r) & np.isfinite(g)
    if not m.any():
        raise InputDomainError("no pixel left to compare depths on")
    e = r[m] - g[m]
    return float(np.sqrt(np.mean(e * e))), float(np.mean(np.abs(e)))


@dataclass
class DensityHistogram:
    edges: np.ndarray
    counts: np.ndarray
    n_samples: int
    transform: str = SOFTEN_TRANSFORM

    def fraction(self, lo: float, hi: float) -> float:
        """Share of samples in bins lying entirely inside [lo, hi]."""
        sel = (self.edges[:-1] >= lo - 1e-12) & (self.edges[1:] <= hi + 1e-12)
        return float(self.counts[sel].sum()) / self.n_samples

    def middle_mass(self) -> float:
        return self.fraction(0.1, 0.9)

    def write_csv(self, path) -> None:
        write_csv(path, ["bin_lo", "bin_hi", "count", "fraction"],
                  [[float(a), float(b), int(c), float(c) / self.n_samples]
                   for a, b, c in zip(self.edges[:-1], self.edges[1:], self.counts)])


def density_histogram(field: VoxelRadianceField, n_samples: int = 2 ** 17, bins: int = 10,
                      rng=None) -> DensityHistogram:
    """Histogram of softened density at uniform random points in the domain."""
    if n_samples < bins:
        raise InputDomainError(f"n_samples ({n_samples}) must be >= bins ({bins})")
    rng = np.random.default_rng(rng)
    pts = field.lo + rng.random((n_samples, 3)) * (field.hi - field.lo)
    s = soften(query_many(field, pts)[0])
    edges = np.linspace(0.0, 1.0, bins + 1)
    counts, _ = np.histogram(np.clip(s, 0.0, 1.0), bins=edges)
    return DensityHistogram(edges, counts, n_samples)


@dataclass
class RayProfile:
    t: np.ndarray
    softened: np.ndarray
    transform: str = SOFTEN_TRANSFORM

    def peaks(self, threshold: float = 0.5) -> int:
        return count_peaks(self.softened, threshold)

    def write_csv(self, path) -> None:
        write_csv(path, ["t", "softened_density"],
                  [[float(a), float(b)] for a, b in zip(self.t, self.softened)])


def density_along_ray(field: VoxelRadianceField, ray: Ray, K: int = 512) -> RayProfile:
    """Softened density at K evenly spaced points from t_near to t_far inclusive."""
    if K < 2:
        raise InputDomainError(f"K must be >= 2, got {K}")
    t = np.linspace(ray.t_near, ray.t_far, K)
    return RayProfile(t, soften(query_many(field, ray.at(t))[0]))


def count_peaks(values, threshold: float = 0.5) -> int:
    """Number of maximal runs of consecutive values above ``threshold``."""
    above = np.asarray(values) > threshold
    return int(np.sum(above[1:] & ~above[:-1]) + (1 if above.size and above[0] else 0))


def visible_region(scene: SyntheticScene, camera: Camera, train_cameras, near: float = 0.05,
                   far: float = np.inf, depth_threshold: float | None = None,
                   tol: float = 1e-6) -> np.ndarray:
    """Eval pixels whose oracle surface point some training camera observes.

    A point counts as observed when it projects inside a training image and
    the training camera's own oracle ray reaches it unoccluded. Points
    farther than ``depth_threshold`` (default twice the domain diagonal) are
    excluded.
    """
    if depth_threshold is None:
        depth_threshold = 2.0 * float(np.linalg.norm(scene.bounds[1] - scene.bounds[0]))
    o, d = camera_rays(camera)
    _, depth, hit, _ = trace_rays(scene, o, d, near, far)
    ok = hit & (depth <= depth_threshold)
    pts = o + np.where(ok, depth, 0.0)[:, None] * d
    seen = np.zeros(len(o), dtype=bool)
    for cam in train_cameras:
        rel = pts - cam.position
        loc = rel @ cam.rotation  # camera-frame coordinates
        z = -loc[:, 2]
        front = z > 1e-9
        zs = np.where(front, z, 1.0)
        px = cam.fx * loc[:, 0] / zs + cam.cx
        py = -cam.fy * loc[:, 1] / zs + cam.cy
        inside = front & (px >= 0) & (px < cam.width) & (py >= 0) & (py < cam.height)
        cand = ok & inside & ~seen
        if not cand.any():
            continue
        dist = np.linalg.norm(rel[cand], axis=1)
        dirs = rel[cand] / dist[:, None]
        _, dd, h, _ = trace_rays(scene, np.broadcast_to(cam.position, dirs.shape), dirs, 0.0)
        reach = h & (dd >= dist - tol * max(1.0, dist.max()) - 1e-9)
        idx = np.flatnonzero(cand)
        seen[idx[reach]] = True
    return seen.reshape(camera.height, camera.width)


@dataclass
class EvalReport:
    paradigm: str
    psnr: float
    ssim: float
    coverage: float
    dice: float
    chamfer: float | None
    depth_rmse: float
    depth_mae: float
    mask_threshold: float = MASK_THRESHOLD
    n_views: int = 1
    notes: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        if self.paradigm not in PARADIGMS:
            raise InputDomainError(f"unknown mask paradigm {self.paradigm!r}")

    def to_json(self) -> dict:
        return asdict(self)

    CSV_COLUMNS = ("paradigm", "psnr", "ssim", "coverage", "dice", "chamfer", "depth_rmse",
                   "depth_mae", "mask_threshold", "n_views")

    def csv_row(self) -> list:
        return [getattr(self, k) for k in self.CSV_COLUMNS]


def aggregate(reports) -> EvalReport:
    """Average per-view reports of one paradigm. Mixing paradigms is refused."""
    reports = list(reports)
    if not reports:
        raise InputDomainError("nothing to aggregate")
    kinds = {r.paradigm for r in reports}
    if len(kinds) != 1:
        raise InputDomainError(f"refusing to average reports across mask paradigms {sorted(kinds)}")

    def mean(key):
        vals = [getattr(r, key) for r in reports if getattr(r, key) is not None]
        vals = [v for v in vals if np.isfinite(v)]
        return float(np.mean(vals)) if vals else float("nan")

    ch = [r.chamfer for r in reports if r.chamfer is not None]
    return EvalReport(reports[0].paradigm, mean("psnr"), mean("ssim"), mean("coverage"),
                      mean("dice"), float(np.mean(ch)) if ch else None, mean("depth_rmse"),
                      mean("depth_mae"), reports[0].mask_threshold,
                      sum(r.n_views for r in reports), dict(reports[0].notes))


def evaluate_view(rgb, depth, acc, gt_rgb, gt_depth, visible, paradigm: str,
                  threshold: float = MASK_THRESHOLD) -> EvalReport:
    """Metrics for one rendered view against oracle data under one paradigm."""
    pred = predicted_mask(acc, threshold)
    gt_hit = np.isfinite(gt_depth)
    if paradigm == "gt-mask":
        region = visible
    elif paradigm == "predicted-mask":
        region = visible & pred.mask
    else:
        raise InputDomainError(f"unknown mask paradigm {paradigm!r}")
    nan = float("nan")
    p = psnr(rgb, gt_rgb, region) if region.any() else nan
    try:
        s = ssim(rgb, gt_rgb, region)
    except InputDomainError:
        s = nan
    try:
        rmse, mae = depth_errors(masked_depth(depth, acc), gt_depth, region)
    except InputDomainError:
        rmse = mae = nan
    cov = coverage(pred, visible) if visible.any() else nan
    return EvalReport(paradigm, p, s, cov, dice(pred.mask, gt_hit), None, rmse, mae, threshold,
                      notes={"visibility": "oracle projection into training cameras"})


def evaluate(field: VoxelRadianceField, scene: SyntheticScene, dataset, split: str = "eval",
             K: int = 128, threshold: float = MASK_THRESHOLD, renders=None,
             reference_cloud=None, cloud_points: int = 35000, seed: int = 0) -> dict:
    """Reports for every paradigm, each averaged over the views of ``split``.

    ``renders`` may hold precomputed (rgb, depth, acc) per view of the split.
    If ``reference_cloud`` is given, the field's point cloud from training
    cameras is compared against it with ``chamfer``.
    """
    idx = dataset.indices(split)
    if not idx:
        raise InputDomainError(f"dataset has no {split!r} views")
    train_cams = [dataset.cameras[i] for i in dataset.indices("train")]
    per = {p: [] for p in PARADIGMS}
    for j, i in enumerate(idx):
        cam = dataset.cameras[i]
        if renders is None:
            rgb, depth, acc = render_image(field, cam, K, None, dataset.background,
                                           dataset.near, dataset.far)
        else:
            rgb, depth, acc = renders[j]
        gt_depth = dataset.depths[i] if dataset.depths is not None else None
        if gt_depth is None:
            _, gd, _, _ = trace_rays(scene, *camera_rays(cam), dataset.near, dataset.far)
            gt_depth = gd.reshape(cam.height, cam.width)
        vis = visible_region(scene, cam, train_cams, dataset.near, dataset.far)
        for p in PARADIGMS:
            per[p].append(evaluate_view(rgb, depth, acc, dataset.images[i],
                                        np.asarray(gt_depth, dtype=np.float64), vis, p, threshold))
    out = {p: aggregate(r) for p, r in per.items()}
    if reference_cloud is not None:
        cloud = extract_point_cloud(field, train_cams, cloud_points, seed, K, dataset.near,
                                    dataset.far, background=dataset.background)
        ch = chamfer(cloud, reference_cloud)
        for r in out.values():
            r.chamfer = ch
    return out


def write_reports(reports: dict, out_dir) -> None:
    """EvalReport set as ``eval_report.json`` and ``eval_report.csv`` (one row per paradigm)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "eval_report.json").write_text(
        json.dumps({k: v.to_json() for k, v in reports.items()}, indent=2, sort_keys=True))
    write_csv(out / "eval_report.csv", list(EvalReport.CSV_COLUMNS),
              [r.csv_row() for r in reports.values()])
