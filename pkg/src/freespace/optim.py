"""Photometric training with Adam, plus the L2 weight-decay baseline.

Losses use mean reductions: the photometric term averages the per-ray
squared color error (summed over channels) over the batch, and the L2 term
averages squared raw parameters. Learning rates and loss weights therefore do
not depend on batch or grid size.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field as dc_field

import numpy as np

from . import _kernels
from .errors import InputDomainError, TrainingDiverged
from .field import VoxelRadianceField, save_checkpoint
from .io import write_csv
from .render import sample_batch
from .scene import Dataset

LOG_COLUMNS = ["step", "l_rec", "l_fsp", "l2_term", "total", "wall_ms"]


@dataclass
class TrainConfig:
    rays_per_step: int = 4096
    samples_per_ray: int = 192
    steps: int = 2000
    lr: float = 1e-2
    lr_schedule: str = "cosine"
    lr_final_ratio: float = 0.05
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    l2_weight: float = 0.0
    seed: int = 0
    stratified: bool = True
    divergence_factor: float = 10.0
    divergence_patience: int = 100

    def __post_init__(self):
        if self.rays_per_step < 1:
            raise InputDomainError(f"rays_per_step must be >= 1, got {self.rays_per_step}")
        if self.samples_per_ray < 1:
            raise InputDomainError(f"samples_per_ray must be >= 1, got {self.samples_per_ray}")
        if self.steps < 1:
            raise InputDomainError(f"steps must be >= 1, got {self.steps}")
        if not self.lr > 0:
            raise InputDomainError(f"learning rate must be > 0, got {self.lr}")
        if self.l2_weight < 0:
            raise InputDomainError(f"l2_weight must be >= 0, got {self.l2_weight}")
        if self.lr_schedule not in ("cosine", "constant"):
            raise InputDomainError(f"unknown lr_schedule {self.lr_schedule!r}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class LossReport:
    step: int
    l_rec: float
    l_fsp: float = 0.0
    l2_term: float = 0.0
    lam: float = 0.0
    l2_weight: float = 0.0
    total: float = float("nan")
    wall_ms: float = 0.0
    n_points: int = 0

    def __post_init__(self):
        if math.isnan(self.total):
            self.total = self.l_rec + self.lam * self.l_fsp + self.l2_weight * self.l2_term

    def row(self, with_points: bool = False) -> list:
        out = [self.step, self.l_rec, self.l_fsp, self.l2_term, self.total, self.wall_ms]
        return out + [self.n_points] if with_points else out


@dataclass
class RayBatch:
    origins: np.ndarray
    dirs: np.ndarray
    targets: np.ndarray

    def __len__(self):
        return len(self.origins)


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    skipped: int = 0

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n))


def adam_step(params, grads, state: AdamState | None = None, lr=1e-2, beta1=0.9,
              beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update. Returns (new params, new state).

    Entries with a non-finite gradient keep their value and moments; they are
    counted in ``state.skipped``. Inputs are not modified.
    """
    p = np.array(params, copy=True)
    g = np.ascontiguousarray(np.asarray(grads, dtype=np.float64).reshape(-1))
    if g.size != p.size:
        raise InputDomainError(f"params ({p.size}) and grads ({g.size}) differ in size")
    if state is None:
        state = AdamState.zeros(p.size)
    st = AdamState(state.m.copy(), state.v.copy(), state.step + 1, state.skipped)
    flat = p.reshape(-1)
    st.skipped += int(_kernels.adam_update(flat, g, st.m, st.v, st.step, lr, beta1, beta2, eps))
    return p, st


class Adam:
    """In-place Adam over one contiguous parameter array."""

    def __init__(self, n_params: int, beta1=0.9, beta2=0.999, eps=1e-8):
        self.state = AdamState.zeros(n_params)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps

    def step(self, params: np.ndarray, grads: np.ndarray, lr: float) -> int:
        st = self.state
        st.step += 1
        n = _kernels.adam_update(params.reshape(-1), grads.reshape(-1), st.m, st.v, st.step,
                                 lr, self.beta1, self.beta2, self.eps)
        st.skipped += int(n)
        return int(n)


def learning_rate(config: TrainConfig, step: int) -> float:
    """Learning rate for 1-based ``step``; cosine decays to lr * lr_final_ratio."""
    if config.lr_schedule == "constant" or config.steps == 1:
        return config.lr
    r = config.lr_final_ratio
    frac = (step - 1) / (config.steps - 1)
    return config.lr * (r + (1.0 - r) * 0.5 * (1.0 + math.cos(math.pi * frac)))


def photometric_loss(field: VoxelRadianceField, dataset: Dataset, ray_batch: RayBatch,
                     rng=None, samples_per_ray: int = 192, stratified: bool | None = None,
                     grads: np.ndarray | None = None):
    """Mean squared color error over a ray batch. Returns (LossReport, grads).

    Samples are stratified iff ``rng`` is given unless ``stratified`` says
    otherwise. Gradients are added into ``grads`` when provided.
    """
    n = len(ray_batch)
    if n == 0:
        raise InputDomainError("empty ray batch")
    stratified = rng is not None if stratified is None else stratified
    t, delta = sample_batch(dataset.near, dataset.far, n, samples_per_ray, stratified, rng)
    if grads is None:
        grads = field.zero_grad()
    sq = _photometric_pass(field, ray_batch, t, delta, dataset.background, grads)
    return LossReport(step=0, l_rec=float(sq.mean())), grads


def _photometric_pass(field, batch, t, delta, background, grads):
    n = len(batch)
    sq, _ = _kernels.render_rays_backward(
        *field.kernel_args(), np.ascontiguousarray(batch.origins, dtype=np.float64),
        np.ascontiguousarray(batch.dirs, dtype=np.float64), t, delta,
        np.asarray(background, dtype=np.float64), np.zeros((1, 3)), np.zeros(n), np.zeros(n),
        np.ascontiguousarray(batch.targets, dtype=np.float64), True, 1.0 / n, grads)
    return sq


def l2_term(field: VoxelRadianceField) -> float:
    p = field.params.astype(np.float64)
    return float(np.mean(p * p))


def rng_streams(seed: int):
    """Independent generators for ray batches and prior points."""
    rays, points = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(rays), np.random.default_rng(points)


@dataclass
class _StepContext:
    """What an extra loss term gets to see at each step."""
    step: int
    batch: RayBatch
    t: np.ndarray
    delta: np.ndarray
    near: float
    far: float


@dataclass
class TrainLog:
    reports: list = dc_field(default_factory=list)
    skipped_updates: int = 0
    with_points: bool = False

    def __len__(self):
        return len(self.reports)

    def __getitem__(self, i):
        return self.reports[i]

    def __iter__(self):
        return iter(self.reports)

    @property
    def l_rec(self) -> np.ndarray:
        return np.array([r.l_rec for r in self.reports])

    def write_csv(self, path) -> None:
        header = LOG_COLUMNS + (["n_points"] if self.with_points else [])
        write_csv(path, header, [r.row(self.with_points) for r in self.reports])


def optimize(field: VoxelRadianceField, dataset: Dataset, config: TrainConfig,
             extra=None, lam: float = 0.0, with_points: bool = False) -> TrainLog:
    """Shared loop: photometric loss + optional extra term + optional L2.

    ``extra(field, grads, ctx, rng)`` returns (unweighted loss, point count)
    and adds lam-scaled gradients into ``grads`` itself. Ray batches and extra
    points use separate random streams, so the ray sequence does not depend
    on whether an extra term is active.
    """
    ray_rng, point_rng = rng_streams(config.seed)
    origins, dirs, targets = dataset.pixel_rays("train")
    n_pix = len(origins)
    R = config.rays_per_step
    grads = field.zero_grad()
    opt = Adam(field.n_params, config.beta1, config.beta2, config.eps)
    log = TrainLog(with_points=with_points)
    initial = None
    bad = 0
    for step in range(1, config.steps + 1):
        t0 = time.perf_counter()
        grads.fill(0.0)
        idx = ray_rng.integers(0, n_pix, R)
        batch = RayBatch(origins[idx], dirs[idx], targets[idx])
        t, delta = sample_batch(dataset.near, dataset.far, R, config.samples_per_ray,
                                config.stratified, ray_rng)
        l_rec = float(_photometric_pass(field, batch, t, delta, dataset.background, grads).mean())
        l_fsp, n_points = 0.0, 0
        if extra is not None:
            ctx = _StepContext(step, batch, t, delta, dataset.near, dataset.far)
            l_fsp, n_points = extra(field, grads, ctx, point_rng)
        l2 = 0.0
        if config.l2_weight > 0:
            p = field.params.astype(np.float64)
            l2 = float(np.mean(p * p))
            grads += (2.0 * config.l2_weight / p.size) * p
        opt.step(field.params, grads, learning_rate(config, step))
        wall = (time.perf_counter() - t0) * 1e3
        log.reports.append(LossReport(step, l_rec, l_fsp, l2, lam, config.l2_weight,
                                      wall_ms=wall, n_points=n_points))
        if not np.isfinite(l_rec):
            raise TrainingDiverged(f"step {step}: photometric loss is {l_rec}")
        if initial is None:
            initial = l_rec
        bad = bad + 1 if l_rec > config.divergence_factor * initial else 0
        if bad >= config.divergence_patience:
            raise TrainingDiverged(
                f"step {step}: l_rec {l_rec:.4g} stayed above {config.divergence_factor}x the "
                f"initial {initial:.4g} for {bad} steps; try a lower learning rate")
    log.skipped_updates = opt.state.skipped
    return log


def train(field: VoxelRadianceField, dataset: Dataset, config: TrainConfig,
          checkpoint_path=None) -> TrainLog:
    """Fit ``field`` in place to the train split. Writes a checkpoint if a path is given."""
    if not dataset.indices("train"):
        raise InputDomainError("dataset has no train split")
    log = optimize(field, dataset, config)
    if checkpoint_path is not None:
        save_checkpoint(field, checkpoint_path)
    return log


def l2_regularized_train(field: VoxelRadianceField, dataset: Dataset, config: TrainConfig,
                         checkpoint_path=None) -> TrainLog:
    """The weight-decay baseline: ``train`` with a mean squared raw-parameter penalty."""
    if not config.l2_weight > 0:
        raise InputDomainError("l2_regularized_train needs l2_weight > 0")
    return train(field, dataset, config, checkpoint_path)
