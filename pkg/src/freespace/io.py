"""Small file codecs: PNG (8-bit RGB), PFM (float rasters), ASCII PLY, CSV."""

from __future__ import annotations

import csv
import re
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ValidationError


def quantize8(img) -> np.ndarray:
    """Snap [0, 1] values to the 8-bit grid so a PNG round trip is exact."""
    return np.round(np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0) * 255.0) / 255.0


def write_png(path, img) -> None:
    arr = np.round(np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0) * 255.0).astype(np.uint8)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(arr).save(path, format="PNG", optimize=False)


def read_png(path) -> np.ndarray:
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
    return arr.astype(np.float64) / 255.0


def write_pfm(path, data) -> None:
    """Write a float raster (H, W) or (H, W, 3) as little-endian PFM."""
    data = np.asarray(data, dtype="<f4")
    if data.ndim == 2:
        tag = b"Pf"
    elif data.ndim == 3 and data.shape[2] == 3:
        tag = b"PF"
    else:
        raise ValueError(f"PFM needs (H, W) or (H, W, 3), got {data.shape}")
    h, w = data.shape[:2]
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(tag + b"\n")
        fh.write(f"{w} {h}\n".encode())
        fh.write(b"-1.0\n")
        # PFM stores rows bottom to top
        fh.write(np.ascontiguousarray(data[::-1]).tobytes())


def read_pfm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        tag = fh.readline().strip()
        if tag not in (b"PF", b"Pf"):
            raise ValidationError(f"{path}: not a PFM file")
        dims = fh.readline().decode().split()
        w, h = int(dims[0]), int(dims[1])
        scale = float(fh.readline().decode().strip())
        dtype = "<f4" if scale < 0 else ">f4"
        ch = 3 if tag == b"PF" else 1
        arr = np.frombuffer(fh.read(), dtype=dtype)
    if arr.size != w * h * ch:
        raise ValidationError(f"{path}: expected {w * h * ch} floats, found {arr.size}")
    arr = arr.reshape(h, w, ch) if ch == 3 else arr.reshape(h, w)
    return arr[::-1].astype(np.float32)


def write_ply(path, points) -> None:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write("ply\nformat ascii 1.0\n")
        fh.write(f"element vertex {len(pts)}\n")
        fh.write("property double x\nproperty double y\nproperty double z\nend_header\n")
        # %.17g round-trips doubles exactly
        np.savetxt(fh, pts, fmt="%.17g")


def read_ply(path) -> np.ndarray:
    with open(path) as fh:
        lines = fh.read().splitlines()
    n = None
    for i, line in enumerate(lines):
        m = re.match(r"element vertex (\d+)", line)
        if m:
            n = int(m.group(1))
        if line.strip() == "end_header":
            body = lines[i + 1:i + 1 + (n or 0)]
            return np.array([[float(v) for v in row.split()[:3]] for row in body]).reshape(-1, 3)
    raise ValidationError(f"{path}: malformed PLY header")


def write_csv(path, header, rows) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for row in rows:
            wr.writerow([repr(v) if isinstance(v, float) else v for v in row])


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
