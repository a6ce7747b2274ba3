from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from freespace.errors import InputDomainError, TrainingDiverged
from freespace.field import init_field, load_checkpoint
from freespace.optim import (LOG_COLUMNS, Adam, AdamState, LossReport, RayBatch, TrainConfig,
                             adam_step, l2_regularized_train, l2_term, learning_rate,
                             photometric_loss, train)
from freespace.render import render_rays, sample_batch

from test_field import fd_grad
from test_render import rand_field, random_rays

SMALL = dict(rays_per_step=64, samples_per_ray=24, steps=30, lr=0.05)


# ---- Adam ----

def test_adam_zero_gradient_leaves_params():
    p = np.array([1.0, -2.0, 3.0])
    q, st_ = adam_step(p, np.zeros(3))
    np.testing.assert_array_equal(q, p)
    assert st_.step == 1


def test_adam_first_step_on_square():
    theta = np.array([1.0])
    q, _ = adam_step(theta, 2 * theta, lr=0.1)
    assert q[0] == pytest.approx(0.9, abs=1e-7)


def test_adam_matches_textbook_update_over_steps():
    rng = np.random.default_rng(0)
    p = rng.normal(size=20)
    m = v = np.zeros(20)
    ref = p.copy()
    st_ = None
    for k in range(1, 6):
        g = rng.normal(size=20)
        p, st_ = adam_step(p, g, st_, lr=0.01, eps=1e-8)
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        ref = ref - 0.01 * (m / (1 - 0.9 ** k)) / (np.sqrt(v / (1 - 0.999 ** k)) + 1e-8)
    np.testing.assert_allclose(p, ref, rtol=1e-12)


def test_adam_skips_non_finite_entries():
    p = np.array([1.0, 1.0, 1.0])
    q, st_ = adam_step(p, np.array([np.nan, 1.0, np.inf]), lr=0.1)
    assert q[0] == 1.0 and q[2] == 1.0 and q[1] == pytest.approx(0.9)
    assert st_.skipped == 2
    assert np.all(np.isfinite(st_.m)) and np.all(np.isfinite(st_.v))


def test_adam_class_agrees_with_functional():
    rng = np.random.default_rng(1)
    p = rng.normal(size=(4, 4)).astype(np.float64)
    q = p.copy()
    opt = Adam(p.size)
    state = AdamState.zeros(p.size)
    for _ in range(4):
        g = rng.normal(size=(4, 4))
        opt.step(p, g, 0.02)
        q, state = adam_step(q, g, state, lr=0.02)
    np.testing.assert_array_equal(p, q)


def test_adam_shape_mismatch():
    with pytest.raises(InputDomainError):
        adam_step(np.zeros(3), np.zeros(4))


# ---- schedule and config ----

def test_cosine_schedule_endpoints():
    cfg = TrainConfig(steps=101, lr=0.1, lr_final_ratio=0.05)
    assert learning_rate(cfg, 1) == pytest.approx(0.1)
    assert learning_rate(cfg, 101) == pytest.approx(0.005)
    assert learning_rate(cfg, 51) == pytest.approx(0.0525)
    lrs = [learning_rate(cfg, s) for s in range(1, 102)]
    assert np.all(np.diff(lrs) <= 0)


@pytest.mark.parametrize("bad", [dict(steps=0), dict(rays_per_step=0), dict(lr=0.0),
                                 dict(l2_weight=-1.0), dict(lr_schedule="step")])
def test_config_rejects(bad):
    with pytest.raises(InputDomainError):
        TrainConfig(**bad)


# ---- loss report ----

@given(st.floats(0, 10), st.floats(0, 10), st.floats(0, 10), st.floats(0, 5), st.floats(0, 5))
def test_loss_report_identity(l_rec, l_fsp, l2, lam, w):
    r = LossReport(1, l_rec, l_fsp, l2, lam, w)
    assert abs(r.total - (l_rec + lam * l_fsp + w * l2)) <= 1e-9
    assert len(r.row()) == len(LOG_COLUMNS)


# ---- photometric loss ----

def flat_dataset(bg=(0.0, 0.0, 0.0)):
    return SimpleNamespace(near=1.0, far=4.0, background=np.asarray(bg, dtype=float))


def test_photometric_empty_field_white_target():
    f = init_field(4, init_mode="empty")
    f.params[..., 0] = -1e4  # sigma underflows to exactly 0
    batch = RayBatch(np.array([[0.0, 0, -3]]), np.array([[0.0, 0, 1]]), np.ones((1, 3)))
    rep, g = photometric_loss(f, flat_dataset(), batch, samples_per_ray=16)
    assert rep.l_rec == 3.0
    assert rep.total == 3.0 and rep.l_fsp == 0.0


def test_photometric_matching_targets_is_zero():
    rng = np.random.default_rng(0)
    f = rand_field(seed=0)
    o, d = random_rays(10, rng)
    t, dl = sample_batch(1.0, 4.0, 10, 20)
    rgb, *_ = render_rays(f, o, d, t, dl)
    rep, g = photometric_loss(f, flat_dataset(), RayBatch(o, d, rgb), samples_per_ray=20)
    assert rep.l_rec == 0.0
    assert not g.any()


def test_photometric_is_mean_over_rays():
    rng = np.random.default_rng(1)
    f = rand_field(seed=1)
    o, d = random_rays(8, rng)
    tgt = rng.random((8, 3))
    t, dl = sample_batch(1.0, 4.0, 8, 20)
    rgb, *_ = render_rays(f, o, d, t, dl)
    rep, _ = photometric_loss(f, flat_dataset(), RayBatch(o, d, tgt), samples_per_ray=20)
    assert rep.l_rec == pytest.approx(np.mean(np.sum((rgb - tgt) ** 2, axis=1)), rel=1e-12)


def test_photometric_gradient_matches_finite_differences():
    rng = np.random.default_rng(2)
    f = rand_field(seed=2)
    o, d = random_rays(12, rng)
    batch = RayBatch(o, d, rng.random((12, 3)))
    ds = flat_dataset((0.3, 0.2, 0.1))
    _, g = photometric_loss(f, ds, batch, samples_per_ray=20)

    def loss(fl):
        return photometric_loss(fl, ds, batch, samples_per_ray=20)[0].l_rec

    for flat in np.argsort(-np.abs(g).ravel())[:30]:
        index = np.unravel_index(flat, g.shape)
        assert abs(fd_grad(f, loss, index) - g[index]) <= 1e-3 * abs(g[index])


def test_photometric_empty_batch():
    f = init_field(4)
    with pytest.raises(InputDomainError):
        photometric_loss(f, flat_dataset(), RayBatch(np.zeros((0, 3)), np.zeros((0, 3)), np.zeros((0, 3))))


def test_l2_term_definition():
    f = rand_field(seed=3)
    assert l2_term(f) == pytest.approx(float(np.mean(f.params.astype(np.float64) ** 2)), rel=1e-12)


# ---- training loop ----

def test_train_reduces_loss_and_is_deterministic(tiny_dataset, tmp_path):
    a, b = init_field(16), init_field(16)
    la = train(a, tiny_dataset, TrainConfig(**SMALL), tmp_path / "a.fsp")
    lb = train(b, tiny_dataset, TrainConfig(**SMALL))
    assert a.params.tobytes() == b.params.tobytes()
    np.testing.assert_array_equal(la.l_rec, lb.l_rec)
    assert la.l_rec[-10:].mean() < la.l_rec[:10].mean()
    assert load_checkpoint(tmp_path / "a.fsp").params.tobytes() == a.params.tobytes()
    assert [r.step for r in la] == list(range(1, 31))


def test_train_log_csv(tiny_dataset, tmp_path):
    f = init_field(8)
    log = train(f, tiny_dataset, TrainConfig(**{**SMALL, "steps": 3}))
    log.write_csv(tmp_path / "log.csv")
    lines = (tmp_path / "log.csv").read_text().splitlines()
    assert lines[0].split(",") == LOG_COLUMNS
    assert len(lines) == 4


def test_l2_zero_weight_equals_plain_training(tiny_dataset):
    a, b = init_field(8), init_field(8)
    train(a, tiny_dataset, TrainConfig(**SMALL))
    train(b, tiny_dataset, TrainConfig(**SMALL, l2_weight=0.0))
    assert a.params.tobytes() == b.params.tobytes()
    with pytest.raises(InputDomainError):
        l2_regularized_train(init_field(8), tiny_dataset, TrainConfig(**SMALL))


def test_l2_reports_term_and_shrinks_params(tiny_dataset):
    f = init_field(8)
    f.params[...] = np.random.default_rng(0).normal(0, 3, f.params.shape)
    before = l2_term(f)
    log = l2_regularized_train(f, tiny_dataset, TrainConfig(**{**SMALL, "steps": 1, "l2_weight": 1e6}))
    assert log[0].l2_term == pytest.approx(before, rel=1e-12)
    assert log[0].total == pytest.approx(log[0].l_rec + 1e6 * before, rel=1e-12)
    assert l2_term(f) < before


def test_divergence_guard(tiny_dataset):
    f = init_field(8)
    cfg = TrainConfig(**{**SMALL, "steps": 50, "divergence_factor": 0.0, "divergence_patience": 5})
    with pytest.raises(TrainingDiverged, match="5 steps"):
        train(f, tiny_dataset, cfg)
