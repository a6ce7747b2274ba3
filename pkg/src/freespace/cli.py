"""Command-line entry point: ``freespace <command> [options]``.

Settings come from three layers, later ones winning: built-in defaults
(``DEFAULTS``), an optional ``--config`` JSON file with the same flat keys,
then command-line flags. The effective settings are printed and written to
``run_config.json`` in the output directory.

Exit codes: 0 success, 2 validation error, 3 training divergence (or a field
that came out empty), 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import io
from .cleanup import CleanupConfig, cleanup, train_with_fsp
from .errors import (CheckpointError, EmptySceneError, InputDomainError, TrainingDiverged,
                     ValidationError)
from .field import init_field, inject_floater, load_checkpoint, save_checkpoint
from .fixtures import FAR, NEAR, check_floaters_unseen, fixture_cameras, fixture_scene
from .metrics import (density_along_ray, density_histogram, evaluate, extract_point_cloud,
                      write_reports)
from .optim import TrainConfig, train
from .render import render_image
from .scene import (DEFAULT_NEAR, CameraOutsideDomainWarning, Ray, SyntheticScene, generate_ray, load_dataset,
                    load_scene, orbit_cameras, primitive_from_json, render_dataset, save_dataset,
                    save_scene, default_far)

EXIT_OK, EXIT_VALIDATION, EXIT_DIVERGED, EXIT_IO = 0, 2, 3, 4

# Flat, documented key set. ``None`` paths must be supplied by file or flag
# when a command needs them.
DEFAULTS = {
    "seed": 0,
    # paths
    "out": None,
    "dataset": None,
    "checkpoint": None,
    "scene": None,
    "cameras": None,
    "floaters": None,
    "renders": None,
    "reference_cloud": None,
    # field
    "resolution": 64,
    "init_mode": "fog",
    "floater_sigma": 5.0,
    # training
    "steps": 2000,
    "lr": 1e-2,
    "lr_schedule": "cosine",
    "rays_per_step": 4096,
    "samples_per_ray": 192,
    "l2_weight": 0.0,
    "train_lambda": 0.0,
    # cleanup
    "lambda": 0.1,
    "n_points": 2 ** 17,
    "iterations": 1000,
    "cleanup_rays_per_step": 4096,
    "cleanup_samples_per_ray": 352,
    "sampling_mode": "uniform3d",
    "oversample_factor": 4,
    "cleanup_lr": 1e-2,
    "cleanup_eps": 1e-15,
    # rendering and metrics
    "render_samples": 192,
    "split": "eval",
    "mask_threshold": 0.98,
    "hist_bins": 10,
    "hist_samples": 2 ** 17,
    "profile_samples": 512,
    "profile_camera": 0,
    "profile_pixel": None,
    "cloud_points": 35000,
}

# flag name -> config key, type
FLAGS = {
    "seed": int, "out": str, "dataset": str, "checkpoint": str, "scene": str, "cameras": str,
    "floaters": str, "renders": str, "reference_cloud": str,
    "resolution": int, "init_mode": str, "floater_sigma": float,
    "steps": int, "lr": float, "lr_schedule": str, "rays_per_step": int,
    "samples_per_ray": int, "l2_weight": float, "train_lambda": float,
    "lambda": float, "n_points": int, "iterations": int, "cleanup_rays_per_step": int,
    "cleanup_samples_per_ray": int, "sampling_mode": str, "oversample_factor": int,
    "cleanup_lr": float, "cleanup_eps": float,
    "render_samples": int, "split": str, "mask_threshold": float, "hist_bins": int,
    "hist_samples": int, "profile_samples": int, "profile_camera": int, "profile_pixel": str,
    "cloud_points": int,
}

COMMANDS = ("make-scene", "train", "inject", "cleanup", "render", "eval", "analyze",
            "export-cloud")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="freespace", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON file with settings (flat keys, see DEFAULTS)")
        for key, typ in FLAGS.items():
            p.add_argument("--" + key.replace("_", "-"), dest=key, type=typ, default=None)
    return ap


def effective_config(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    if args.config:
        path = Path(args.config)
        try:
            loaded = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
        unknown = sorted(set(loaded) - set(DEFAULTS))
        if unknown:
            raise ValidationError(f"{path}: unknown config keys {unknown}")
        cfg.update(loaded)
    for key in FLAGS:
        val = getattr(args, key)
        if val is not None:
            cfg[key] = val
    return cfg


def _need(cfg, key):
    if cfg.get(key) is None:
        raise ValidationError(f"missing setting {key!r}; pass --{key.replace('_', '-')} or put it in --config")
    return cfg[key]


def _need_path(cfg, key) -> Path:
    p = Path(_need(cfg, key))
    if not p.exists():
        raise FileNotFoundError(f"{key} path does not exist: {p}")
    return p


def _out_dir(cfg) -> Path:
    out = Path(_need(cfg, "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _echo(cfg, command, out: Path) -> None:
    record = {"command": command, **cfg}
    text = json.dumps(record, indent=2, sort_keys=True)
    print(text)
    (out / "run_config.json").write_text(text + "\n")


def _train_config(cfg) -> TrainConfig:
    return TrainConfig(rays_per_step=cfg["rays_per_step"], samples_per_ray=cfg["samples_per_ray"],
                       steps=cfg["steps"], lr=cfg["lr"], lr_schedule=cfg["lr_schedule"],
                       l2_weight=cfg["l2_weight"], seed=cfg["seed"])


def _cleanup_config(cfg) -> CleanupConfig:
    return CleanupConfig(lam=cfg["lambda"], n_points=cfg["n_points"], iterations=cfg["iterations"],
                         rays_per_step=cfg["cleanup_rays_per_step"],
                         samples_per_ray=cfg["cleanup_samples_per_ray"],
                         sampling_mode=cfg["sampling_mode"],
                         oversample_factor=cfg["oversample_factor"], seed=cfg["seed"],
                         lr=cfg["cleanup_lr"], eps=cfg["cleanup_eps"])


def _cameras_from_spec(spec: dict):
    """Camera rig JSON: {"train": {...}, "eval": {...}} with orbit parameters."""
    cams, splits = [], []
    for split in ("train", "eval"):
        rig = spec.get(split)
        if rig is None:
            continue
        where = f"cameras.{split}"
        try:
            az = rig["azimuths"]
            el = rig.get("elevations", rig.get("elevation", 0.0))
        except (KeyError, TypeError):
            raise ValidationError(f"{where}: needs 'azimuths' and 'elevation(s)'") from None
        size = int(rig.get("size", 48))
        c = orbit_cameras(az, el, radius=float(rig.get("radius", 3.0)),
                          target=tuple(rig.get("target", (0.0, 0.0, 0.0))),
                          width=size, height=size, focal=float(rig.get("focal", 96.0)))
        cams += c
        splits += [split] * len(c)
    if not cams:
        raise ValidationError("camera spec has no 'train' or 'eval' rig")
    return cams, splits


def cmd_make_scene(cfg) -> None:
    out = _out_dir(cfg)
    scene = load_scene(_need_path(cfg, "scene")) if cfg["scene"] else fixture_scene()
    if cfg["cameras"]:
        spec = json.loads(_need_path(cfg, "cameras").read_text())
        cams, splits = _cameras_from_spec(spec)
        near, far = spec.get("near"), spec.get("far")
    else:
        train_c, eval_c = fixture_cameras()
        cams, splits = train_c + eval_c, ["train"] * len(train_c) + ["eval"] * len(eval_c)
        near, far = NEAR, FAR
    _echo(cfg, "make-scene", out)
    train_cams = [c for c, s in zip(cams, splits) if s == "train"]
    near = DEFAULT_NEAR if near is None else near
    far = default_far(scene.bounds) if far is None else far
    check_floaters_unseen(scene, train_cams, near, far)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CameraOutsideDomainWarning)
        ds = render_dataset(scene, cams, splits, near, far)
    save_dataset(ds, out)
    surfaces = SyntheticScene(scene.surfaces, scene.bounds, scene.background, scene.shading)
    save_scene(surfaces, out / "scene.json")
    (out / "floaters.json").write_text(
        json.dumps([p.to_json() for p in scene.floaters], indent=2) + "\n")
    print(f"wrote {len(cams)} views, {len(scene.floaters)} floater(s) to {out}")


def cmd_train(cfg) -> None:
    out = _out_dir(cfg)
    ds = load_dataset(_need_path(cfg, "dataset"))
    tc = _train_config(cfg)
    _echo(cfg, "train", out)
    field = init_field(cfg["resolution"], init_mode=cfg["init_mode"])
    if cfg["train_lambda"] > 0:
        _, log = train_with_fsp(field, ds, tc, cfg["train_lambda"], cfg["n_points"])
        save_checkpoint(field, out / "field.fsp")
    else:
        log = train(field, ds, tc, out / "field.fsp")
    log.write_csv(out / "train_log.csv")
    print(f"final l_rec {log[-1].l_rec:.6g}; checkpoint {out / 'field.fsp'}")


def cmd_inject(cfg) -> None:
    out = _out_dir(cfg)
    field = load_checkpoint(_need_path(cfg, "checkpoint"))
    items = json.loads(_need_path(cfg, "floaters").read_text())
    _echo(cfg, "inject", out)
    n = 0
    for i, obj in enumerate(items):
        n += inject_floater(field, primitive_from_json(obj, f"floaters[{i}]"), cfg["floater_sigma"])
    save_checkpoint(field, out / "field.fsp")
    print(f"injected {len(items)} floater(s) over {n} vertices; checkpoint {out / 'field.fsp'}")


def cmd_cleanup(cfg) -> None:
    out = _out_dir(cfg)
    field = load_checkpoint(_need_path(cfg, "checkpoint"))
    ds = load_dataset(_need_path(cfg, "dataset"))
    cc = _cleanup_config(cfg)
    _echo(cfg, "cleanup", out)
    cleaned, log = cleanup(field, ds, cc)
    save_checkpoint(cleaned, out / "field.fsp")
    log.write_csv(out / "cleanup_log.csv")
    print(f"cleanup done: final l_rec {log[-1].l_rec:.6g}, l_fsp {log[-1].l_fsp:.6g}")


def _splits(split):
    return ["train", "eval"] if split == "all" else [split]


def cmd_render(cfg) -> None:
    out = _out_dir(cfg)
    field = load_checkpoint(_need_path(cfg, "checkpoint"))
    ds = load_dataset(_need_path(cfg, "dataset"))
    _echo(cfg, "render", out)
    for split in _splits(cfg["split"]):
        idx = ds.indices(split)
        if not idx:
            raise ValidationError(f"dataset has no {split!r} views to render")
        base = out / "renders" / split
        for j, i in enumerate(idx):
            rgb, depth, acc = render_image(field, ds.cameras[i], cfg["render_samples"], None,
                                           ds.background, ds.near, ds.far)
            io.write_png(base / f"{j:03d}.png", rgb)
            io.write_pfm(base / f"{j:03d}_depth.pfm", depth)
            io.write_pfm(base / f"{j:03d}_acc.pfm", acc)
        (base / "index.json").write_text(json.dumps({"frames": idx}) + "\n")
        print(f"rendered {len(idx)} {split} view(s) to {base}")


def _load_renders(root: Path, ds, split):
    base = root / "renders" / split
    if not (base / "index.json").exists():
        raise ValidationError(
            f"no rendered {split!r} split under {root}; run `freespace render --split {split}` first")
    frames = json.loads((base / "index.json").read_text())["frames"]
    if frames != ds.indices(split):
        raise ValidationError(f"renders in {base} do not match the dataset's {split!r} split")
    renders = []
    for j in range(len(frames)):
        rgb = io.read_png(base / f"{j:03d}.png")
        renders.append((rgb, io.read_pfm(base / f"{j:03d}_depth.pfm").astype(np.float64),
                        io.read_pfm(base / f"{j:03d}_acc.pfm").astype(np.float64)))
    return renders


def cmd_eval(cfg) -> None:
    out = _out_dir(cfg)
    ds = load_dataset(_need_path(cfg, "dataset"))
    scene = load_scene(_need_path(cfg, "scene"))
    renders_root = Path(cfg["renders"]) if cfg["renders"] else out
    split = cfg["split"]
    renders = _load_renders(renders_root, ds, split)
    ref = io.read_ply(_need_path(cfg, "reference_cloud")) if cfg["reference_cloud"] else None
    field = load_checkpoint(_need_path(cfg, "checkpoint")) if ref is not None else None
    _echo(cfg, "eval", out)
    reports = evaluate(field, scene, ds, split, threshold=cfg["mask_threshold"], renders=renders,
                       reference_cloud=ref, cloud_points=cfg["cloud_points"], seed=cfg["seed"])
    write_reports(reports, out)
    for name, rep in reports.items():
        print(f"[{name}] psnr {rep.psnr:.3f} ssim {rep.ssim:.4f} coverage {rep.coverage:.2f}% "
              f"dice {rep.dice:.4f} depth_mae {rep.depth_mae:.4g}")


def _plot_csvs(out: Path, hist, profile) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 3))
    centers = 0.5 * (hist.edges[:-1] + hist.edges[1:])
    ax.bar(centers, hist.counts / hist.n_samples, width=hist.edges[1] - hist.edges[0])
    ax.set_xlabel("softened density")
    ax.set_ylabel("fraction of samples")
    fig.tight_layout()
    fig.savefig(out / "histogram.png", dpi=100)
    plt.close(fig)
    fig, ax = plt.subplots(figsize=(5, 3))
    ax.plot(profile.t, profile.softened)
    ax.set_xlabel("t")
    ax.set_ylabel("softened density")
    ax.set_ylim(-0.02, 1.02)
    fig.tight_layout()
    fig.savefig(out / "ray_profile.png", dpi=100)
    plt.close(fig)


def _profile_ray(cfg) -> Ray:
    ds = load_dataset(_need_path(cfg, "dataset"))
    cam = ds.cameras[cfg["profile_camera"]]
    if cfg["profile_pixel"]:
        try:
            px, py = (float(v) for v in cfg["profile_pixel"].split(","))
        except ValueError:
            raise ValidationError("profile_pixel must look like 'px,py'") from None
    else:
        px, py = cam.cx, cam.cy
    return generate_ray(cam, px, py, t_near=ds.near, t_far=ds.far)


def cmd_analyze(cfg) -> None:
    out = _out_dir(cfg)
    field = load_checkpoint(_need_path(cfg, "checkpoint"))
    ray = _profile_ray(cfg)
    _echo(cfg, "analyze", out)
    hist = density_histogram(field, cfg["hist_samples"], cfg["hist_bins"], cfg["seed"])
    hist.write_csv(out / "histogram.csv")
    prof = density_along_ray(field, ray, cfg["profile_samples"])
    prof.write_csv(out / "ray_profile.csv")
    _plot_csvs(out, hist, prof)
    print(f"middle-bin mass {hist.middle_mass():.4f}; ray peaks {prof.peaks()}")


def cmd_export_cloud(cfg) -> None:
    out = _out_dir(cfg)
    field = load_checkpoint(_need_path(cfg, "checkpoint"))
    ds = load_dataset(_need_path(cfg, "dataset"))
    _echo(cfg, "export-cloud", out)
    cams = [ds.cameras[i] for i in ds.indices("train")]
    cloud = extract_point_cloud(field, cams, cfg["cloud_points"], cfg["seed"],
                                cfg["render_samples"], ds.near, ds.far,
                                background=ds.background)
    io.write_ply(out / "cloud.ply", cloud)
    print(f"wrote {len(cloud)} points to {out / 'cloud.ply'}")


HANDLERS = {
    "make-scene": cmd_make_scene, "train": cmd_train, "inject": cmd_inject,
    "cleanup": cmd_cleanup, "render": cmd_render, "eval": cmd_eval, "analyze": cmd_analyze,
    "export-cloud": cmd_export_cloud,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = effective_config(args)
        HANDLERS[args.command](cfg)
    except TrainingDiverged as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except EmptySceneError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except CheckpointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ValidationError, InputDomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
