"""The floater story, told with the Python API.

A field trained on a ring of low cameras never sees the space above the
objects, so density parked there costs the photometric loss nothing. We plant
such a floater, look at it from the held-out cameras, then run the cleanup and
look again.

    python3 demos/floater_story.py            # desk scale, a few minutes
    python3 demos/floater_story.py --quick    # smaller grid, under a minute
"""

import argparse
import time

import numpy as np

from freespace.cleanup import CleanupConfig, cleanup
from freespace.field import init_field, inject_floater, query_many, soften
from freespace.fixtures import (FIXTURE_CLEANUP, FIXTURE_RESOLUTION, FIXTURE_TRAIN, FLOATER_SIGMA,
                                floater_fixture)
from freespace.metrics import density_along_ray, density_histogram, psnr
from freespace.optim import TrainConfig, train
from freespace.render import render_image
from freespace.scene import Ray


def held_out_psnr(field, ds, K=128):
    vals = []
    for i in ds.indices("eval"):
        rgb, _, _ = render_image(field, ds.cameras[i], K, None, ds.background, ds.near, ds.far)
        vals.append(psnr(rgb, ds.images[i]))
    return float(np.mean(vals))


def floater_density(field, floater, n=20000):
    rng = np.random.default_rng(1)
    u = rng.normal(size=(n, 3))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    pts = floater.center + u * floater.radius * rng.random((n, 1)) ** (1 / 3)
    return float(soften(query_many(field, pts)[0]).mean())


def describe(name, field, fx, ray):
    ds = fx.dataset
    print(f"  {name:<5} held-out PSNR {held_out_psnr(field, ds):6.2f} dB | "
          f"floater density {floater_density(field, fx.floater):.3f} | "
          f"peaks on the floater ray {density_along_ray(field, ray).peaks()} | "
          f"mid-density mass {density_histogram(field, 2 ** 16, rng=0).middle_mass():.4f}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--quick", action="store_true")
    args = ap.parse_args()

    train_kw, clean_kw, res = dict(FIXTURE_TRAIN), dict(FIXTURE_CLEANUP), FIXTURE_RESOLUTION
    if args.quick:
        res = 32
        train_kw.update(steps=300, rays_per_step=1024, samples_per_ray=64)
        clean_kw.update(iterations=300, rays_per_step=1024, samples_per_ray=64, n_points=2 ** 15)

    fx = floater_fixture()
    ds = fx.dataset
    print(f"{len(ds.indices('train'))} training views on a low ring, "
          f"{len(ds.indices('eval'))} held-out views from above")

    field = init_field(res)
    t0 = time.perf_counter()
    train(field, ds, TrainConfig(**train_kw))
    print(f"trained a {res}^3 grid in {time.perf_counter() - t0:.0f}s")

    inject_floater(field, fx.floater, FLOATER_SIGMA)
    cam = ds.cameras[ds.indices("eval")[1]]
    d = fx.floater.center - cam.position
    ray = Ray(cam.position, d / np.linalg.norm(d), ds.near, ds.far)

    t0 = time.perf_counter()
    post, _ = cleanup(field, ds, CleanupConfig(**clean_kw))
    print(f"cleanup with lambda={clean_kw['lam']} took {time.perf_counter() - t0:.0f}s\n")

    describe("pre", field, fx, ray)
    describe("post", post, fx, ray)
    print("\nThe floater sat in space no training ray crosses, so only the prior could see it.")


if __name__ == "__main__":
    main()
