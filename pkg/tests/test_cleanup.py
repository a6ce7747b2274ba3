import numpy as np
import pytest
from scipy import stats

from freespace.cleanup import (CleanupConfig, cleanup, cleanup_rays_only, fine_tune, fsp_batch,
                               fsp_loss, sample_free_space_points, train_with_fsp)
from freespace.errors import InputDomainError
from freespace.field import init_field, inject_floater, query_many, sigmoid, soften
from freespace.optim import TrainConfig, train
from freespace.scene import Sphere

from test_field import fd_grad
from test_render import rand_field

QUICK = dict(rays_per_step=64, samples_per_ray=32, iterations=40, n_points=4096, lr=0.05)


# ---- point sampling ----

@pytest.mark.parametrize("grouped", [False, True])
def test_uniform_point_statistics(grouped):
    pts = sample_free_space_points([[-1, -1, -1], [1, 1, 1]], 100_000, 0, grouped)
    assert pts.shape == (100_000, 3)
    assert np.all((pts >= -1) & (pts <= 1))
    assert np.all(np.abs(pts.mean(axis=0)) < 0.02)
    for axis in range(3):
        assert stats.kstest((pts[:, axis] + 1) / 2, "uniform").pvalue > 1e-3


def test_grouped_points_are_ordered_by_slab():
    pts = sample_free_space_points([[0, 0, 0], [1, 2, 3]], 5000, 3, grouped=True)
    slab = np.floor(pts[:, 0] * 64)
    assert np.all(np.diff(slab) >= 0)


def test_single_point_and_determinism():
    b = [[-0.5, 0, 2], [0.5, 1, 3]]
    p = sample_free_space_points(b, 1, 9)
    assert p.shape == (1, 3) and np.all(p >= b[0]) and np.all(p <= b[1])
    np.testing.assert_array_equal(sample_free_space_points(b, 50, 9), sample_free_space_points(b, 50, 9))


@pytest.mark.parametrize("bounds", [[[0, 0, 0], [1, 0, 1]], [[0, 0, 0], [-1, 1, 1]]])
def test_degenerate_bounds(bounds):
    with pytest.raises(InputDomainError):
        sample_free_space_points(bounds, 10)


def test_fsp_batch_points_in_bounds():
    f = init_field(5, bounds=((0, 0, 0), (2, 1, 1)))
    b = fsp_batch(f, 1000, 0)
    assert np.all((b.points >= f.lo) & (b.points <= f.hi))
    np.testing.assert_allclose(b.sigmas, 0.1, rtol=1e-5)


# ---- prior values ----

def constant_field(raw):
    f = init_field(4, init_mode="empty")
    f.params[..., 0] = raw
    return f


def test_fsp_zero_density():
    loss, _ = fsp_loss(constant_field(-1e4), np.zeros((10, 3)))
    assert loss == 0.25


def test_fsp_saturated_density():
    loss, _ = fsp_loss(constant_field(30.0), np.zeros((10, 3)))
    assert loss == pytest.approx(1.0, abs=1e-12)


def test_fsp_mixed_batch():
    f = constant_field(-1e4)
    f.params[2:, ..., 0] = 30.0
    pts = np.array([[-0.9, 0, 0], [0.9, 0, 0]])
    loss, _ = fsp_loss(f, pts)
    assert loss == pytest.approx(0.625, abs=1e-12)


def test_fsp_matches_direct_mean():
    f = rand_field(seed=0)
    pts = np.random.default_rng(0).uniform(-1, 1, (300, 3))
    sig, _ = query_many(f, pts)
    loss, _ = fsp_loss(f, pts)
    assert loss == pytest.approx(float(np.mean(sigmoid(sig) ** 2)), rel=1e-12)


def test_fsp_out_of_domain_points_floor_without_gradient():
    f = rand_field(seed=1)
    loss, g = fsp_loss(f, np.array([[3.0, 0, 0], [0, -5.0, 0]]))
    assert loss == 0.25
    assert not g.any()


def test_fsp_empty_points():
    with pytest.raises(InputDomainError):
        fsp_loss(init_field(4), np.zeros((0, 3)))


@pytest.mark.parametrize("seed", range(3))
def test_fsp_gradient_matches_finite_differences(seed):
    f = rand_field(seed=seed)
    pts = np.random.default_rng(seed).uniform(-1, 1, (64, 3))
    _, g = fsp_loss(f, pts)

    def loss(fl):
        return fsp_loss(fl, pts)[0]

    assert np.all(g[..., 1:] == 0)  # the prior only touches density
    for flat in np.argsort(-np.abs(g).ravel())[:30]:
        index = np.unravel_index(flat, g.shape)
        assert abs(fd_grad(f, loss, index) - g[index]) <= 1e-4 * abs(g[index])


def test_fsp_weight_scales_gradient_only():
    f = rand_field(seed=2)
    pts = np.random.default_rng(2).uniform(-1, 1, (50, 3))
    l1, g1 = fsp_loss(f, pts)
    l2, g2 = fsp_loss(f, pts, weight=0.3)
    assert l1 == l2
    np.testing.assert_allclose(g2, 0.3 * g1, rtol=1e-12)
    _, g0 = fsp_loss(f, pts, weight=0.0)
    assert not g0.any()


# ---- cleanup loop ----

@pytest.fixture(scope="module")
def trained_tiny(tiny_dataset):
    f = init_field(16)
    train(f, tiny_dataset, TrainConfig(rays_per_step=128, samples_per_ray=32, steps=150, lr=0.1))
    return f


def test_lambda_zero_equals_fine_tuning(trained_tiny, tiny_dataset):
    cfg = CleanupConfig(**{**QUICK, "lam": 0.0, "iterations": 10})
    a, log = cleanup(trained_tiny, tiny_dataset, cfg)
    b, _ = fine_tune(trained_tiny, tiny_dataset, cfg)
    assert a.params.tobytes() == b.params.tobytes()
    assert all(r.l_fsp > 0 and r.total == r.l_rec for r in log)  # computed but weightless


def test_cleanup_does_not_modify_input_and_is_deterministic(trained_tiny, tiny_dataset):
    before = trained_tiny.params.copy()
    cfg = CleanupConfig(**{**QUICK, "iterations": 5})
    a, la = cleanup(trained_tiny, tiny_dataset, cfg)
    b, lb = cleanup(trained_tiny, tiny_dataset, cfg)
    np.testing.assert_array_equal(trained_tiny.params, before)
    assert a.params.tobytes() == b.params.tobytes()
    assert [r.l_fsp for r in la] == [r.l_fsp for r in lb]
    assert all(r.n_points == 4096 for r in la)


def test_cleanup_log_has_point_column(trained_tiny, tiny_dataset, tmp_path):
    _, log = cleanup(trained_tiny, tiny_dataset, CleanupConfig(**{**QUICK, "iterations": 2}))
    log.write_csv(tmp_path / "c.csv")
    assert (tmp_path / "c.csv").read_text().splitlines()[0].endswith(",n_points")


def test_negative_lambda_rejected():
    with pytest.raises(InputDomainError):
        CleanupConfig(lam=-0.1)


@pytest.mark.parametrize("bad", [dict(n_points=0), dict(iterations=0), dict(sampling_mode="grid")])
def test_config_rejects(bad):
    with pytest.raises(InputDomainError):
        CleanupConfig(**bad)


def test_rays_only_requires_rays_mode(trained_tiny, tiny_dataset):
    with pytest.raises(InputDomainError):
        cleanup_rays_only(trained_tiny, tiny_dataset, CleanupConfig(**QUICK))


def test_rays_only_point_budget(trained_tiny, tiny_dataset):
    cfg = CleanupConfig(**{**QUICK, "iterations": 2, "sampling_mode": "rays_only"})
    _, log = cleanup_rays_only(trained_tiny, tiny_dataset, cfg)
    assert log[0].n_points == 4096  # 64 points on each of 64 rays
    cfg = CleanupConfig(**{**QUICK, "iterations": 2, "sampling_mode": "rays_only_oversampled"})
    _, log = cleanup_rays_only(trained_tiny, tiny_dataset, cfg)
    assert log[0].n_points == 4 * 4096


def test_visible_floater_removed_by_both_modes(trained_tiny, tiny_dataset):
    cam = tiny_dataset.cameras[0]
    floater = Sphere(0.27 * cam.position, 0.15)
    f = trained_tiny.copy()
    inject_floater(f, floater, 5.0)
    rng = np.random.default_rng(0)
    u = rng.normal(size=(2000, 3))
    inside = floater.center + floater.radius * 0.8 * u / np.linalg.norm(u, axis=1, keepdims=True) \
        * rng.random((2000, 1)) ** (1 / 3)

    def density(fl):
        return float(soften(query_many(fl, inside)[0]).mean())

    assert density(f) > 0.9
    kw = {**QUICK, "iterations": 200, "n_points": 16384, "lr": 0.1}
    plain, _ = fine_tune(f, tiny_dataset, CleanupConfig(**kw))
    for mode in ("uniform3d", "rays_only"):
        g, _ = cleanup(f, tiny_dataset, CleanupConfig(**kw, sampling_mode=mode))
        assert density(g) < 0.55, mode
        assert density(g) < density(plain), mode


def test_train_with_fsp_lambda_zero_equals_train(tiny_dataset):
    cfg = TrainConfig(rays_per_step=64, samples_per_ray=24, steps=10, lr=0.05)
    a, b = init_field(8), init_field(8)
    train(a, tiny_dataset, cfg)
    train_with_fsp(b, tiny_dataset, cfg, 0.0, 1024)
    assert a.params.tobytes() == b.params.tobytes()
    with pytest.raises(InputDomainError):
        train_with_fsp(init_field(8), tiny_dataset, cfg, -1.0)
