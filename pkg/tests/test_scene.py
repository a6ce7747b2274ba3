import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from freespace.errors import InputDomainError, ManifestParseError, ValidationError
from freespace.scene import (Box, Camera, CameraOutsideDomainWarning, Dataset, Ray, Sphere,
                             SyntheticScene, camera_rays, floater_violations, generate_ray,
                             load_dataset, load_scene, look_at, orbit_cameras, render_dataset,
                             save_dataset, save_scene, trace_oracle, trace_rays)


def ident_cam(w=32, h=24, f=10.0):
    return Camera(f, f, w / 2, h / 2, w, h, np.eye(3), np.zeros(3))


def rotation_from(q):
    q = np.asarray(q, dtype=np.float64)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


# -- generate_ray ------------------------------------------------------------

def test_principal_point_ray_looks_down_negative_z():
    cam = ident_cam()
    r = generate_ray(cam, cam.cx - 0.5, cam.cy - 0.5)
    np.testing.assert_allclose(r.direction, [0, 0, -1], atol=1e-15)


def test_one_focal_offset_is_45_degrees():
    cam = ident_cam()
    r = generate_ray(cam, cam.cx + cam.fx - 0.5, cam.cy - 0.5)
    np.testing.assert_allclose(r.direction, np.array([1, 0, -1]) / np.sqrt(2), atol=1e-15)


def test_image_rows_grow_downward():
    cam = ident_cam()
    r = generate_ray(cam, cam.cx - 0.5, cam.cy + 5.5)
    assert r.direction[1] < 0


def test_origin_is_pose_translation():
    R = rotation_from([0.3, -0.2, 0.9, 0.1])
    t = np.array([0.4, -1.5, 2.0])
    cam = Camera(30, 30, 16, 12, 32, 24, R, t)
    for px, py in [(0, 0), (31, 23), (7, 19)]:
        np.testing.assert_array_equal(generate_ray(cam, px, py).origin, t)


@pytest.mark.parametrize("px,py", [(-1, 0), (32, 0), (0, 24), (0, -0.5)])
def test_out_of_bounds_pixel_rejected(px, py):
    with pytest.raises(InputDomainError):
        generate_ray(ident_cam(), px, py)


@settings(max_examples=60, deadline=None)
@given(q=st.lists(st.floats(-1, 1), min_size=4, max_size=4).filter(lambda v: np.linalg.norm(v) > 0.1),
       f=st.floats(5, 500), w=st.integers(1, 64), h=st.integers(1, 64),
       jitter=st.booleans(), seed=st.integers(0, 2 ** 16))
def test_ray_directions_unit_norm(q, f, w, h, jitter, seed):
    cam = Camera(f, f * 1.3, w / 2, h / 2, w, h, rotation_from(q), np.zeros(3))
    _, d = camera_rays(cam, jitter, seed)
    np.testing.assert_allclose(np.linalg.norm(d, axis=1), 1.0, atol=1e-12)


def test_camera_rejects_non_orthonormal_rotation():
    with pytest.raises(ValidationError, match="orthonormal"):
        Camera(10, 10, 5, 5, 10, 10, np.diag([1.0, 1.0, 1.1]), np.zeros(3))


def test_camera_rejects_reflection():
    with pytest.raises(ValidationError):
        Camera(10, 10, 5, 5, 10, 10, np.diag([1.0, 1.0, -1.0]), np.zeros(3))


def test_ray_invariants():
    with pytest.raises(ValidationError):
        Ray(np.zeros(3), np.array([0, 0, 2.0]), 0.0, 1.0)
    with pytest.raises(ValidationError):
        Ray(np.zeros(3), np.array([0, 0, 1.0]), 1.0, 1.0)


def test_look_at_points_minus_z_at_target():
    eye = np.array([1.0, 2.0, 3.0])
    R = look_at(eye, (0, 0, 0))
    fwd = -R[:, 2]
    np.testing.assert_allclose(fwd, -eye / np.linalg.norm(eye), atol=1e-12)


# -- oracle ------------------------------------------------------------------

def test_oracle_empty_scene_misses():
    sc = SyntheticScene([], background=(0.2, 0.3, 0.4))
    c, d, hit = trace_oracle(sc, Ray(np.zeros(3), np.array([0, 0, -1.0]), 0.05, 10.0))
    np.testing.assert_array_equal(c, [0.2, 0.3, 0.4])
    assert d == np.inf and not hit


def test_oracle_unit_sphere_depth():
    sc = SyntheticScene([Sphere((0, 0, 0), 1.0, (1, 0, 0))], bounds=[[-2] * 3, [2] * 3])
    c, d, hit = trace_oracle(sc, Ray(np.array([0, 0, 3.0]), np.array([0, 0, -1.0]), 0.05, 10.0))
    assert hit and d == 2.0
    np.testing.assert_array_equal(c, [1, 0, 0])


def test_box_edge_tie_counts_as_hit():
    box = Box((0, 0, 0), (1, 1, 1))
    r2 = np.sqrt(2)
    # enters through the edge x = -0.5, y = 0.5: the x and y slabs both
    # start at s = 1 (s = t / sqrt 2), so the entry t ties on two slabs
    d = np.array([[1.0, -1.0, 0.0]]) / r2
    np.testing.assert_allclose(box.intersect(np.array([[-1.5, 1.5, 0.0]]), d, 0.0), [r2])
    # grazes the same edge from outside: x slab is [1, 2], y slab is [0, 1],
    # so t_enter == t_exit and the tie counts as a hit
    d2 = np.array([[1.0, 1.0, 0.0]]) / r2
    o2 = np.array([[-1.5, -0.5, 0.0]])
    np.testing.assert_allclose(box.intersect(o2, d2, 0.0), [r2])
    # shifted a hair outward the slabs no longer overlap
    assert np.isinf(box.intersect(o2 + [[-1e-9, 0.0, 0.0]], d2, 0.0)[0])


def test_oracle_depth_independent_of_t_far():
    sc = SyntheticScene([Sphere((0.1, 0, 0), 0.5)])
    o = np.array([0.0, 0.2, 3.0])
    d = np.array([0.0, -0.05, -1.0])
    d /= np.linalg.norm(d)
    depths = [trace_oracle(sc, Ray(o, d, 0.05, tf))[1] for tf in (4.0, 10.0, 1e6)]
    assert depths[0] == depths[1] == depths[2]


def test_scene_rejects_primitive_outside_bounds():
    with pytest.raises(ValidationError, match="outside"):
        SyntheticScene([Sphere((0.9, 0, 0), 0.2)])


def test_scene_json_round_trip(tmp_path):
    sc = SyntheticScene([Sphere((0, 0, 0), 0.3, (1, 0, 0)),
                         Box((0.5, 0.5, 0.5), (0.2, 0.3, 0.4), (0, 1, 0), is_floater=True)])
    save_scene(sc, tmp_path / "s.json")
    back = load_scene(tmp_path / "s.json")
    assert back.to_json() == sc.to_json()
    assert len(back.floaters) == 1


def test_scene_file_errors_have_field_paths(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps([{"kind": "sphere", "center": [0, 0, 0]}]))
    with pytest.raises(ManifestParseError, match=r"primitives\[0\].*radius"):
        load_scene(p)


# -- render_dataset ------------------------------------------------------------

def test_empty_scene_gives_uniform_background():
    sc = SyntheticScene([], background=(0.25, 0.5, 0.75))
    cam = orbit_cameras([0.0], 0.0, radius=0.8, width=8, height=6)
    ds = render_dataset(sc, cam)
    assert np.all(ds.images[0] == ds.images[0][0, 0])
    np.testing.assert_allclose(ds.images[0][0, 0], [64 / 255, 128 / 255, 191 / 255])


def test_identical_cameras_identical_images():
    sc = SyntheticScene([Sphere((0, 0, 0), 0.4, (0.2, 0.7, 0.1))])
    cams = orbit_cameras([10.0, 10.0], 20.0, radius=0.9, width=16, height=16, focal=16)
    ds = render_dataset(sc, cams)
    np.testing.assert_array_equal(ds.images[0], ds.images[1])


def test_orbit_around_sphere_every_image_hits():
    sc = SyntheticScene([Sphere((0, 0, 0), 0.5)])
    cams = orbit_cameras(np.arange(8) * 45.0, 10.0, radius=3.0, width=24, height=24, focal=48)
    with pytest.warns(CameraOutsideDomainWarning):
        ds = render_dataset(sc, cams)
    for dep in ds.depths:
        assert np.isfinite(dep).sum() >= 1


def test_render_dataset_needs_cameras():
    with pytest.raises(InputDomainError):
        render_dataset(SyntheticScene([]), [])


def small_dataset():
    sc = SyntheticScene([Sphere((0, 0, 0), 0.5, (0.9, 0.2, 0.1)), Box((0.5, -0.5, 0.3), 0.3, (0, 0, 1))])
    cams = orbit_cameras([0.0, 70.0, 140.0], [5.0, 20.0, -10.0], radius=2.5, width=20, height=16, focal=30)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CameraOutsideDomainWarning)
        return render_dataset(sc, cams, ["train", "train", "eval"], 1.0, 4.0)


def test_dataset_round_trip(tmp_path):
    ds = small_dataset()
    save_dataset(ds, tmp_path)
    back = load_dataset(tmp_path)
    assert back.splits == ds.splits
    assert (back.near, back.far) == (ds.near, ds.far)
    for a, b in zip(ds.cameras, back.cameras):
        np.testing.assert_allclose(a.rotation, b.rotation, atol=1e-12, rtol=0)
        np.testing.assert_allclose(a.translation, b.translation, atol=1e-12, rtol=0)
    for a, b in zip(ds.images, back.images):
        np.testing.assert_array_equal(a, b)
    for a, b in zip(ds.depths, back.depths):
        np.testing.assert_array_equal(a, b)


def test_manifest_missing_image_names_file(tmp_path):
    save_dataset(small_dataset(), tmp_path)
    (tmp_path / "images" / "001.png").unlink()
    with pytest.raises(ValidationError, match="001.png"):
        load_dataset(tmp_path)


def test_manifest_non_orthonormal_rotation(tmp_path):
    save_dataset(small_dataset(), tmp_path)
    m = json.loads((tmp_path / "dataset.json").read_text())
    m["frames"][2]["pose"][0] *= 1.5
    (tmp_path / "dataset.json").write_text(json.dumps(m))
    with pytest.raises(ValidationError, match=r"frames\[2\].*orthonormal"):
        load_dataset(tmp_path)


def test_manifest_syntax_error_has_line(tmp_path):
    save_dataset(small_dataset(), tmp_path)
    text = (tmp_path / "dataset.json").read_text().replace('"near"', '"near" oops', 1)
    (tmp_path / "dataset.json").write_text(text)
    with pytest.raises(ManifestParseError, match=r"dataset.json:\d+:\d+"):
        load_dataset(tmp_path)


def test_manifest_missing_field(tmp_path):
    save_dataset(small_dataset(), tmp_path)
    m = json.loads((tmp_path / "dataset.json").read_text())
    del m["frames"][1]["intrinsics"]["fy"]
    (tmp_path / "dataset.json").write_text(json.dumps(m))
    with pytest.raises(ManifestParseError, match=r"frames\[1\].intrinsics.fy"):
        load_dataset(tmp_path)


def test_image_size_mismatch(tmp_path):
    save_dataset(small_dataset(), tmp_path)
    m = json.loads((tmp_path / "dataset.json").read_text())
    m["frames"][0]["intrinsics"]["width"] = 21
    (tmp_path / "dataset.json").write_text(json.dumps(m))
    with pytest.raises(ValidationError, match="21x16"):
        load_dataset(tmp_path)


def test_dataset_rejects_mismatched_image():
    cam = ident_cam(8, 8)
    with pytest.raises(ValidationError):
        Dataset([cam], [np.zeros((8, 9, 3))])
    with pytest.raises(ValidationError):
        Dataset([cam], [np.full((8, 8, 3), 1.5)])


# -- floaters ------------------------------------------------------------------

def test_floater_exclusion_on_fixture():
    from freespace.fixtures import fixture_cameras, fixture_scene

    sc = fixture_scene()
    train, held = fixture_cameras()
    assert floater_violations(sc, train, mode="first_hit") == []
    assert floater_violations(sc, train, 1.2, 4.8, mode="any_hit") == []
    # the held-out views do see it
    assert floater_violations(sc, held, mode="first_hit")


def test_floaters_never_drawn_by_oracle():
    sc = SyntheticScene([Sphere((0, 0, 0), 0.3, (0, 1, 0), is_floater=True)])
    o = np.array([[0, 0, 3.0]])
    d = np.array([[0, 0, -1.0]])
    c, dep, hit, _ = trace_rays(sc, o, d)
    assert not hit[0]
    _, dep2, hit2, _ = trace_rays(sc, o, d, include_floaters=True)
    assert hit2[0] and dep2[0] == pytest.approx(2.7)
