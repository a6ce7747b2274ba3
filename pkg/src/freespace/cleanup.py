"""Free-space prior fine-tuning.

The prior penalizes the squared sigmoid of activated density at points drawn
uniformly in the field's bounding box, so any density the photometric term
does not defend is pushed toward zero. With softplus density the per-point
floor is sigmoid(0)^2 = 0.25.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import _kernels
from .errors import InputDomainError
from .field import VoxelRadianceField, query_many
from .optim import TrainConfig, optimize
from .scene import Dataset

SAMPLING_MODES = ("uniform3d", "rays_only", "rays_only_oversampled")
GROUP_SLABS = 64


@dataclass
class CleanupConfig:
    lam: float = 0.1
    n_points: int = 2 ** 17
    iterations: int = 1000
    rays_per_step: int = 4096
    samples_per_ray: int = 352
    sampling_mode: str = "uniform3d"
    oversample_factor: int = 4
    seed: int = 0
    lr: float = 1e-2
    lr_schedule: str = "constant"
    beta1: float = 0.9
    beta2: float = 0.999
    # tiny eps so the small mean-reduced prior gradients are not swamped
    eps: float = 1e-15

    def __post_init__(self):
        if self.lam < 0:
            raise InputDomainError(f"lambda must be >= 0, got {self.lam}")
        if self.n_points < 1:
            raise InputDomainError(f"n_points must be >= 1, got {self.n_points}")
        if self.iterations < 1:
            raise InputDomainError(f"iterations must be >= 1, got {self.iterations}")
        if self.sampling_mode not in SAMPLING_MODES:
            raise InputDomainError(
                f"sampling_mode must be one of {SAMPLING_MODES}, got {self.sampling_mode!r}")
        if self.oversample_factor < 1:
            raise InputDomainError("oversample_factor must be >= 1")

    def train_config(self) -> TrainConfig:
        """The equivalent plain fine-tuning configuration."""
        return TrainConfig(rays_per_step=self.rays_per_step, samples_per_ray=self.samples_per_ray,
                           steps=self.iterations, lr=self.lr, lr_schedule=self.lr_schedule,
                           beta1=self.beta1, beta2=self.beta2, eps=self.eps, seed=self.seed)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class FspBatch:
    points: np.ndarray
    sigmas: np.ndarray


def sample_free_space_points(bounds, N: int, rng=None, grouped: bool = False) -> np.ndarray:
    """N points i.i.d. uniform in the box ``bounds`` (2, 3).

    With ``grouped`` the points come out ordered by x-slab (slab counts are
    multinomial, positions uniform inside each slab). The resulting point set
    has exactly the i.i.d. uniform distribution; only the order differs, which
    makes the grid walk in the prior's kernel far more cache friendly.
    """
    if N < 1:
        raise InputDomainError(f"N must be >= 1, got {N}")
    b = np.asarray(bounds, dtype=np.float64).reshape(2, 3)
    if np.any(b[1] - b[0] <= 0):
        raise InputDomainError(f"bounds have zero volume: {b.tolist()}")
    rng = np.random.default_rng(rng)
    u = rng.random((N, 3))
    if grouped:
        counts = rng.multinomial(N, np.full(GROUP_SLABS, 1.0 / GROUP_SLABS))
        u[:, 0] = (np.repeat(np.arange(GROUP_SLABS), counts) + u[:, 0]) / GROUP_SLABS
    return b[0] + u * (b[1] - b[0])


def fsp_batch(field: VoxelRadianceField, N: int, rng=None) -> FspBatch:
    pts = sample_free_space_points(field.bounds, N, rng)
    return FspBatch(pts, query_many(field, pts)[0])


def fsp_loss(field: VoxelRadianceField, points, grads: np.ndarray | None = None,
             weight: float = 1.0):
    """Mean of sigmoid(sigma)^2 over points. Returns (loss, grads).

    ``weight`` scales the accumulated gradient (not the returned loss); with
    ``weight == 0`` no gradient is accumulated.
    """
    pts = np.ascontiguousarray(np.asarray(points, dtype=np.float64).reshape(-1, 3))
    if len(pts) == 0:
        raise InputDomainError("fsp_loss needs at least one point")
    if grads is None:
        grads = field.zero_grad()
    total = _kernels.fsp_points(*field.kernel_args(), pts, weight / len(pts), grads, weight != 0)
    return total / len(pts), grads


def _points_along_rays(ctx, per_ray: int, rng) -> np.ndarray:
    n = len(ctx.batch)
    width = (ctx.far - ctx.near) / per_ray
    t = ctx.near + (np.arange(per_ray) + rng.random((n, per_ray))) * width
    return (ctx.batch.origins[:, None, :] + t[..., None] * ctx.batch.dirs[:, None, :]).reshape(-1, 3)


class FspTerm:
    """The prior as an extra term for the shared optimization loop."""

    def __init__(self, lam: float, n_points: int, sampling_mode: str = "uniform3d",
                 oversample_factor: int = 4):
        self.lam = lam
        self.n_points = n_points
        self.mode = sampling_mode
        self.oversample_factor = oversample_factor

    def points(self, field, ctx, rng) -> np.ndarray:
        if self.mode == "uniform3d":
            return sample_free_space_points(field.bounds, self.n_points, rng, grouped=True)
        # same point budget as uniform3d, spread over this step's training rays
        per_ray = max(1, self.n_points // len(ctx.batch))
        if self.mode == "rays_only_oversampled":
            per_ray *= self.oversample_factor
        return _points_along_rays(ctx, per_ray, rng)

    def __call__(self, field, grads, ctx, rng):
        pts = self.points(field, ctx, rng)
        loss, _ = fsp_loss(field, pts, grads, self.lam)
        return loss, len(pts)


def _run(field, dataset, config: CleanupConfig):
    if not dataset.indices("train"):
        raise InputDomainError("dataset has no train split")
    out = field.copy()
    term = FspTerm(config.lam, config.n_points, config.sampling_mode, config.oversample_factor)
    log = optimize(out, dataset, config.train_config(), term, config.lam, with_points=True)
    return out, log


def cleanup(field: VoxelRadianceField, dataset: Dataset, config: CleanupConfig | None = None):
    """Fine-tune a trained field under L_rec + lam * L_FSP. Returns (cleaned copy, log).

    The optimizer starts from fresh moments; the input field is not modified.
    """
    return _run(field, dataset, config or CleanupConfig())


def cleanup_rays_only(field: VoxelRadianceField, dataset: Dataset, config: CleanupConfig):
    """Ablation: apply the prior only at points along each step's training rays."""
    if config.sampling_mode not in ("rays_only", "rays_only_oversampled"):
        raise InputDomainError("cleanup_rays_only needs sampling_mode rays_only or rays_only_oversampled")
    return _run(field, dataset, config)


def train_with_fsp(field: VoxelRadianceField, dataset: Dataset, config: TrainConfig,
                   lam: float, n_points: int = 2 ** 17):
    """Train from scratch with the prior active from the first step. Updates ``field`` in place."""
    if lam < 0:
        raise InputDomainError(f"lambda must be >= 0, got {lam}")
    if not dataset.indices("train"):
        raise InputDomainError("dataset has no train split")
    log = optimize(field, dataset, config, FspTerm(lam, n_points), lam, with_points=True)
    return field, log


def fine_tune(field: VoxelRadianceField, dataset: Dataset, config: CleanupConfig):
    """Plain photometric fine-tuning with the cleanup schedule, for comparisons."""
    out = field.copy()
    return out, optimize(out, dataset, config.train_config())
