"""Dense voxel radiance field: trilinear raw parameters + activations.

The grid stores one raw density and three raw color values per vertex.
A query trilinearly interpolates the raw values of the enclosing cell and then
applies softplus (density) and sigmoid (color). Color is view independent.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import CheckpointError, InputDomainError

CHECKPOINT_MAGIC = b"FSPVOX\x00\x01"
CHECKPOINT_VERSION = 1

DEFAULT_RESOLUTION = 128
FOG_SIGMA = 0.1
EMPTY_RAW = -20.0


def softplus(x):
    x = np.asarray(x, dtype=np.float64)
    return np.logaddexp(0.0, x)


def softplus_inv(y):
    """Inverse of softplus for y > 0."""
    y = np.asarray(y, dtype=np.float64)
    if np.any(y <= 0):
        raise InputDomainError("softplus inverse needs strictly positive values")
    return y + np.log(-np.expm1(-y))


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def soften(sigma):
    """Map densities to [0, 1] via 2 * (sigmoid(sigma) - 0.5)."""
    return 2.0 * (sigmoid(sigma) - 0.5)


@dataclass
class FieldSample:
    position: np.ndarray
    sigma: float
    color: np.ndarray


@dataclass
class VoxelRadianceField:
    """Trainable grid. ``params`` has shape (nx, ny, nz, 4), float32.

    Channel 0 holds raw density, channels 1-3 raw color. ``resolution`` counts
    grid vertices per axis; vertex i sits at ``lo + i * (hi - lo) / (n - 1)``.
    """

    params: np.ndarray
    bounds: np.ndarray = dc_field(default_factory=lambda: np.array([[-1.0] * 3, [1.0] * 3]))
    density_activation: str = "softplus"
    color_activation: str = "sigmoid"

    def __post_init__(self):
        self.params = np.ascontiguousarray(self.params, dtype=np.float32)
        self.bounds = np.asarray(self.bounds, dtype=np.float64).reshape(2, 3)
        if self.params.ndim != 4 or self.params.shape[3] != 4:
            raise InputDomainError(f"params must have shape (nx, ny, nz, 4), got {self.params.shape}")
        if min(self.params.shape[:3]) < 2:
            raise InputDomainError("resolution must be at least 2 per axis")
        if np.any(self.bounds[1] <= self.bounds[0]):
            raise InputDomainError("bounds must have positive extent on every axis")
        if self.density_activation != "softplus" or self.color_activation != "sigmoid":
            raise InputDomainError("only softplus density and sigmoid color are supported")

    @property
    def resolution(self) -> tuple[int, int, int]:
        return tuple(int(n) for n in self.params.shape[:3])

    @property
    def lo(self) -> np.ndarray:
        return self.bounds[0]

    @property
    def hi(self) -> np.ndarray:
        return self.bounds[1]

    @property
    def cell_size(self) -> np.ndarray:
        return (self.hi - self.lo) / (np.array(self.resolution) - 1)

    @property
    def n_params(self) -> int:
        return self.params.size

    def copy(self) -> "VoxelRadianceField":
        return VoxelRadianceField(self.params.copy(), self.bounds.copy(),
                                  self.density_activation, self.color_activation)

    def zero_grad(self) -> np.ndarray:
        """A fresh GradientBuffer (float64, same shape as ``params``)."""
        return np.zeros(self.params.shape, dtype=np.float64)

    def vertex_positions(self) -> np.ndarray:
        axes = [np.linspace(self.lo[a], self.hi[a], n) for a, n in enumerate(self.resolution)]
        grid = np.meshgrid(*axes, indexing="ij")
        return np.stack(grid, axis=-1)

    def kernel_args(self):
        return self.params, self.lo, self.hi, np.array(self.resolution, dtype=np.int64)


def init_field(resolution=DEFAULT_RESOLUTION, bounds=((-1, -1, -1), (1, 1, 1)),
               init_mode: str = "fog") -> VoxelRadianceField:
    """Build a field. ``fog`` gives sigma = 0.1 and mid-gray color everywhere.

    ``empty`` sets raw density to -20 (sigma ~ 2e-9), mainly for tests.
    """
    res = np.broadcast_to(np.asarray(resolution, dtype=np.int64), (3,))
    if np.any(res < 2):
        raise InputDomainError(f"resolution must be >= 2 per axis, got {tuple(res)}")
    params = np.zeros((*res, 4), dtype=np.float32)
    if init_mode == "fog":
        params[..., 0] = softplus_inv(FOG_SIGMA)
    elif init_mode == "empty":
        params[..., 0] = EMPTY_RAW
    else:
        raise InputDomainError(f"unknown init_mode {init_mode!r}")
    return VoxelRadianceField(params, np.asarray(bounds, dtype=np.float64))


def query_many(field: VoxelRadianceField, points):
    """Vectorized query: returns (sigma (n,), rgb (n, 3))."""
    pts = np.ascontiguousarray(np.asarray(points, dtype=np.float64).reshape(-1, 3))
    sigma, rgb, _, _ = _kernels.query_points(*field.kernel_args(), pts)
    return sigma, rgb


def query(field: VoxelRadianceField, x) -> FieldSample:
    x = np.asarray(x, dtype=np.float64).reshape(3)
    sigma, rgb = query_many(field, x[None])
    return FieldSample(x, float(sigma[0]), rgb[0])


def query_backward(field: VoxelRadianceField, x, d_sigma, d_color, grads: np.ndarray) -> None:
    """Accumulate d(loss)/d(raw) for upstream gradients at one or many points."""
    pts = np.ascontiguousarray(np.asarray(x, dtype=np.float64).reshape(-1, 3))
    ds = np.ascontiguousarray(np.broadcast_to(np.asarray(d_sigma, dtype=np.float64), (len(pts),)))
    dc = np.ascontiguousarray(np.broadcast_to(np.asarray(d_color, dtype=np.float64), (len(pts), 3)))
    _kernels.query_points_backward(*field.kernel_args(), pts, ds, dc, grads)


def merge_gradients(buffers) -> np.ndarray:
    """Sum per-worker gradient buffers in list order."""
    buffers = list(buffers)
    out = np.zeros_like(buffers[0])
    for b in buffers:
        out += b
    return out


def _inside_mask(primitive, pts: np.ndarray) -> np.ndarray:
    return primitive.contains(pts)


def inject_floater(field: VoxelRadianceField, primitive, sigma_value: float) -> int:
    """Set raw density at every vertex inside ``primitive`` to give ``sigma_value``.

    Returns the number of vertices written. Colors are left alone.
    """
    if not sigma_value > 0:
        raise InputDomainError(f"sigma_value must be > 0, got {sigma_value}")
    lo, hi = primitive.aabb()
    if np.any(lo < field.lo - 1e-9) or np.any(hi > field.hi + 1e-9):
        raise InputDomainError("floater primitive must lie inside the field bounds")
    verts = field.vertex_positions()
    mask = _inside_mask(primitive, verts.reshape(-1, 3)).reshape(field.resolution)
    field.params[..., 0][mask] = np.float32(softplus_inv(sigma_value))
    return int(mask.sum())


def save_checkpoint(field: VoxelRadianceField, path) -> None:
    """Header (magic, JSON length, JSON) followed by little-endian float32 params."""
    header = {
        "format_version": CHECKPOINT_VERSION,
        "resolution": list(field.resolution),
        "bounds": field.bounds.tolist(),
        "density_activation": field.density_activation,
        "color_activation": field.color_activation,
        "layout": "xyz-vertex-major, channels [raw_density, raw_r, raw_g, raw_b]",
    }
    blob = json.dumps(header, sort_keys=True).encode()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(field.params.astype("<f4").tobytes(order="C"))


def read_checkpoint_header(path) -> dict:
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise CheckpointError(f"{path}: not a field checkpoint (bad magic)")
        try:
            (n,) = struct.unpack("<I", fh.read(4))
            return json.loads(fh.read(n))
        except (struct.error, ValueError) as exc:
            raise CheckpointError(f"{path}: corrupt checkpoint header ({exc})") from None


def load_checkpoint(path) -> VoxelRadianceField:
    path = Path(path)
    header = read_checkpoint_header(path)
    version = header.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{path}: checkpoint format version {version}, this build reads version {CHECKPOINT_VERSION}")
    with open(path, "rb") as fh:
        fh.seek(len(CHECKPOINT_MAGIC))
        (n,) = struct.unpack("<I", fh.read(4))
        fh.seek(len(CHECKPOINT_MAGIC) + 4 + n)
        payload = fh.read()
    res = tuple(header["resolution"])
    expected = int(np.prod(res)) * 4 * 4
    if len(payload) != expected:
        raise CheckpointError(f"{path}: payload has {len(payload)} bytes, expected {expected}")
    params = np.frombuffer(payload, dtype="<f4").reshape(*res, 4).astype(np.float32)
    return VoxelRadianceField(params, np.array(header["bounds"]),
                              header["density_activation"], header["color_activation"])
