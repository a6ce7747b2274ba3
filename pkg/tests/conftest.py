import os
import warnings

import numpy as np
import pytest
from hypothesis import settings

from freespace.scene import (CameraOutsideDomainWarning, Sphere, SyntheticScene, orbit_cameras,
                             render_dataset)

settings.register_profile("ci", deadline=None, derandomize=True)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))


@pytest.fixture(scope="session")
def tiny_dataset():
    """One sphere, four 12x12 training views and one held-out view."""
    scene = SyntheticScene([Sphere((0.0, 0.0, 0.0), 0.5, (0.8, 0.4, 0.2))])
    cams = orbit_cameras([0.0, 90.0, 180.0, 270.0, 45.0], [10.0, 10.0, 10.0, 10.0, 40.0],
                         radius=3.0, width=12, height=12, focal=20.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CameraOutsideDomainWarning)
        return render_dataset(scene, cams, ["train"] * 4 + ["eval"], 1.5, 4.5)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, detail = results[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
