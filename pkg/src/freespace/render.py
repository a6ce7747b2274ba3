"""Volume rendering along rays: sampling, alpha compositing and its adjoint.

Single-ray functions (``composite``, ``composite_backward``, ``render_ray``)
are straightforward numpy and double as the reference for the batched
compiled path used by training (``render_rays`` and ``render_rays_backward``).
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import InputDomainError
from .field import VoxelRadianceField, query_many
from .scene import Camera, Ray, camera_rays, default_far

DEPTH_EPS = 1e-8
THREADS_ENV = "FREESPACE_THREADS"


@dataclass
class RaySamples:
    t: np.ndarray
    deltas: np.ndarray
    positions: np.ndarray


@dataclass
class RayRenderResult:
    color: np.ndarray
    depth: float
    accumulation: float
    weights: np.ndarray
    transmittance: float  # T_K, what is left for the background


def sample_ray(ray: Ray, K: int, stratified: bool = False, rng=None) -> RaySamples:
    """K samples in [t_near, t_far], one per equal-width bin.

    Non-stratified samples sit at bin midpoints; stratified ones are jittered
    uniformly inside their bin. The last spacing is capped at one bin width.
    """
    t, delta = sample_batch(ray.t_near, ray.t_far, 1, K, stratified, rng)
    return RaySamples(t[0], delta[0], ray.at(t[0]))


def sample_batch(t_near, t_far, n_rays: int, K: int, stratified: bool = False, rng=None):
    """Sample positions (n_rays, K) and spacings for a batch sharing one interval."""
    if K < 1:
        raise InputDomainError(f"need at least one sample per ray, got K={K}")
    width = (t_far - t_near) / K
    if stratified:
        rng = np.random.default_rng(rng)
        u = rng.random((n_rays, K))
    else:
        u = np.full((n_rays, K), 0.5)
    t = t_near + (np.arange(K) + u) * width
    delta = np.empty_like(t)
    delta[:, :-1] = np.diff(t, axis=1)
    delta[:, -1] = width
    return t, delta


def composite(sigmas, colors, t, deltas, background=(0.0, 0.0, 0.0)) -> RayRenderResult:
    sigmas = np.asarray(sigmas, dtype=np.float64)
    colors = np.asarray(colors, dtype=np.float64).reshape(-1, 3)
    t = np.asarray(t, dtype=np.float64)
    deltas = np.asarray(deltas, dtype=np.float64)
    if np.any(deltas <= 0):
        raise InputDomainError("sample spacings must be positive")
    tau = sigmas * deltas
    T = np.exp(-np.concatenate([[0.0], np.cumsum(tau)]))
    alpha = -np.expm1(-tau)
    w = T[:-1] * alpha
    acc = w.sum()
    color = w @ colors + T[-1] * np.asarray(background, dtype=np.float64)
    depth = (w @ t) / max(acc, DEPTH_EPS)
    return RayRenderResult(color, float(depth), float(acc), w, float(T[-1]))


def composite_backward(sigmas, colors, t, deltas, background=(0.0, 0.0, 0.0),
                       d_color=(0.0, 0.0, 0.0), d_depth=0.0, d_accum=0.0):
    """Gradients of <d_color, C> + d_depth * D + d_accum * A w.r.t. sigma_i and c_i."""
    sigmas = np.asarray(sigmas, dtype=np.float64)
    colors = np.asarray(colors, dtype=np.float64).reshape(-1, 3)
    t = np.asarray(t, dtype=np.float64)
    deltas = np.asarray(deltas, dtype=np.float64)
    bg = np.asarray(background, dtype=np.float64)
    gC = np.asarray(d_color, dtype=np.float64)
    res = composite(sigmas, colors, t, deltas, bg)
    w = res.weights
    tau = sigmas * deltas
    T = np.exp(-np.concatenate([[0.0], np.cumsum(tau)]))
    TK = T[-1]
    # tails over k > i
    tail_c = np.cumsum((w[:, None] * colors)[::-1], axis=0)[::-1]
    tail_c = np.vstack([tail_c[1:], np.zeros((1, 3))]) + TK * bg
    tail_t = np.cumsum((w * t)[::-1])[::-1]
    tail_t = np.concatenate([tail_t[1:], [0.0]])
    dC_dtau = T[1:, None] * colors - tail_c
    dS_dtau = T[1:] * t - tail_t
    acc = res.accumulation
    if acc > DEPTH_EPS:
        dD_dtau = (dS_dtau - res.depth * TK) / acc
    else:
        dD_dtau = dS_dtau / DEPTH_EPS
    dtau = dC_dtau @ gC + d_accum * TK + d_depth * dD_dtau
    d_sigma = dtau * deltas
    d_colors = w[:, None] * gC[None, :]
    return d_sigma, d_colors


def render_ray(field: VoxelRadianceField, ray: Ray, K: int, stratified: bool = False,
               rng=None, background=(0.0, 0.0, 0.0)) -> RayRenderResult:
    s = sample_ray(ray, K, stratified, rng)
    sigma, rgb = query_many(field, s.positions)
    return composite(sigma, rgb, s.t, s.deltas, background)


def _n_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def render_rays(field: VoxelRadianceField, origins, dirs, t, delta, background=(0.0, 0.0, 0.0)):
    """Batched forward render. Returns (rgb, depth, accumulation, final transmittance).

    Ray chunks are spread over ``FREESPACE_THREADS`` threads; results do not
    depend on the thread count since rays are independent.
    """
    o = np.ascontiguousarray(origins, dtype=np.float64)
    d = np.ascontiguousarray(dirs, dtype=np.float64)
    t = np.ascontiguousarray(t, dtype=np.float64)
    delta = np.ascontiguousarray(delta, dtype=np.float64)
    bg = np.asarray(background, dtype=np.float64)
    args = field.kernel_args()
    n = len(o)
    threads = _n_threads()
    if threads == 1 or n < 4096:
        return _kernels.render_rays(*args, o, d, t, delta, bg)
    bounds = np.linspace(0, n, threads + 1).astype(int)
    with ThreadPoolExecutor(threads) as ex:
        parts = list(ex.map(lambda ab: _kernels.render_rays(
            *args, o[ab[0]:ab[1]], d[ab[0]:ab[1]], t[ab[0]:ab[1]], delta[ab[0]:ab[1]], bg),
            zip(bounds[:-1], bounds[1:])))
    return tuple(np.concatenate([p[i] for p in parts]) for i in range(4))


def render_rays_backward(field: VoxelRadianceField, origins, dirs, t, delta, background,
                         d_color, d_depth, d_accum, grads: np.ndarray) -> None:
    """Accumulate gradients of sum_r <d_color_r, C_r> + ... into ``grads``."""
    n = len(origins)
    gC = np.ascontiguousarray(np.broadcast_to(np.asarray(d_color, dtype=np.float64), (n, 3)))
    gD = np.ascontiguousarray(np.broadcast_to(np.asarray(d_depth, dtype=np.float64), (n,)))
    gA = np.ascontiguousarray(np.broadcast_to(np.asarray(d_accum, dtype=np.float64), (n,)))
    _kernels.render_rays_backward(
        *field.kernel_args(), np.ascontiguousarray(origins, dtype=np.float64),
        np.ascontiguousarray(dirs, dtype=np.float64), np.ascontiguousarray(t, dtype=np.float64),
        np.ascontiguousarray(delta, dtype=np.float64), np.asarray(background, dtype=np.float64),
        gC, gD, gA, np.zeros((1, 3)), False, 1.0, grads)


def render_image(field: VoxelRadianceField, camera: Camera, K: int, rng=None,
                 background=(0.0, 0.0, 0.0), near: float = 0.05, far: float | None = None):
    """Render every pixel center. Stratified sampling is used iff ``rng`` is given.

    Returns (rgb (H, W, 3), depth (H, W), accumulation (H, W)).
    """
    far = default_far(field.bounds) if far is None else far
    o, d = camera_rays(camera)
    t, delta = sample_batch(near, far, len(o), K, stratified=rng is not None, rng=rng)
    rgb, depth, acc, _ = render_rays(field, o, d, t, delta, background)
    h, w = camera.height, camera.width
    return rgb.reshape(h, w, 3), depth.reshape(h, w), acc.reshape(h, w)
