"""The standard floater fixture: a sphere and a box seen by a low camera arc.

Nine training cameras sit on a 120 degree arc at 15 degrees elevation. Three
held-out cameras look down from 60 degrees. A small sphere above the scene
lies outside every training frustum (with a safety margin), so photometric
training never constrains it, while the held-out views look straight through
it onto the red sphere.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .scene import (Box, CameraOutsideDomainWarning, Dataset, Sphere, SyntheticScene,
                    floater_violations, orbit_cameras, render_dataset)

TARGET = (0.0, -0.35, 0.0)
NEAR, FAR = 1.2, 4.8
FLOATER_MARGIN = 0.07  # about two cells of a 64^3 grid


@dataclass
class Fixture:
    scene: SyntheticScene
    dataset: Dataset
    floater: Sphere

    @property
    def train_cameras(self):
        return [self.dataset.cameras[i] for i in self.dataset.indices("train")]

    @property
    def eval_cameras(self):
        return [self.dataset.cameras[i] for i in self.dataset.indices("eval")]


def fixture_scene(with_floater: bool = True) -> SyntheticScene:
    prims = [
        Sphere((0.0, -0.3, 0.0), 0.45, (0.9, 0.3, 0.2)),
        Box((0.45, -0.6, 0.45), (0.35, 0.35, 0.35), (0.2, 0.4, 0.9)),
    ]
    if with_floater:
        prims.append(Sphere((0.0, 0.7, 0.3), 0.18, (0.5, 0.5, 0.5), is_floater=True))
    return SyntheticScene(prims)


def fixture_cameras(size: int = 48, focal: float = 96.0):
    train = orbit_cameras(np.linspace(-60.0, 60.0, 9), 15.0, radius=3.0, target=TARGET,
                          width=size, height=size, focal=focal)
    held = orbit_cameras([-25.0, 0.0, 25.0], 60.0, radius=3.0, target=TARGET,
                         width=size, height=size, focal=focal)
    return train, held


def check_floaters_unseen(scene: SyntheticScene, cameras, near=NEAR, far=FAR,
                          margin: float = 0.0) -> None:
    """Raise if any camera ray before ``far`` touches a floater grown by ``margin``."""
    grown = [Sphere(p.center, p.radius + margin, p.albedo, True) if isinstance(p, Sphere) and p.is_floater
             else p for p in scene.primitives]
    bad = floater_violations(SyntheticScene(grown, scene.bounds, scene.background), cameras,
                             near, far, mode="any_hit")
    if bad:
        cam, prim, n = bad[0]
        raise ValidationError(
            f"floater primitives[{prim}] is intersected by {n} rays of training camera {cam}; "
            "floaters must stay unseen by every training camera")


def floater_fixture(size: int = 48, focal: float = 96.0) -> Fixture:
    scene = fixture_scene()
    train, held = fixture_cameras(size, focal)
    check_floaters_unseen(scene, train, margin=FLOATER_MARGIN)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CameraOutsideDomainWarning)
        ds = render_dataset(scene, train + held, ["train"] * len(train) + ["eval"] * len(held),
                            NEAR, FAR)
    return Fixture(scene, ds, scene.floaters[0])


FLOATER_SIGMA = 5.0

# Desk-scale settings used by the acceptance suite and the demos.
FIXTURE_RESOLUTION = 64
FIXTURE_TRAIN = dict(rays_per_step=2048, samples_per_ray=128, steps=1000, lr=0.1)
FIXTURE_CLEANUP = dict(rays_per_step=2048, samples_per_ray=128, iterations=1000, n_points=2 ** 17, lr=0.05,
                       lam=0.1)
