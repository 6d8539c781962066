import numpy as np
import pytest

from bifrom import fom
from bifrom.ann import TrainConfig
from bifrom.fom import SnapshotSet, x_norm
from bifrom.pod import project, projection_error, reconstruct
from bifrom.podnn import build_podnn, podnn_eval

TRAIN = TrainConfig(loss="mse", max_epochs_per_round=500, max_rounds=6)


@pytest.fixture(scope="module")
def model(cfg, snaps72):
    return build_podnn(cfg, snaps72, 1e-6, (64, 32), TRAIN)


def test_shapes_and_standardization(model, snaps72):
    assert model.net.layer_dims == [2, 64, 32, model.basis.size]
    coeffs = project(model.basis, snaps72.snapshots).T
    assert np.allclose(model.coeff_mean, coeffs.mean(axis=0))
    assert np.all(model.coeff_std > 0)


def test_training_error_at_least_projection_error(model, cfg, snaps72):
    proj = projection_error(model.basis, snaps72.snapshots)
    for j, mu in enumerate(snaps72.params):
        err = x_norm(podnn_eval(model, mu) - snaps72.snapshots[:, j], cfg.h)
        assert err >= proj[j] - 1e-12


def test_error_matches_coefficient_rmse(model, cfg, snaps72):
    a_true = project(model.basis, snaps72.snapshots).T
    a_pred = model.coefficients(snaps72.params)
    rmse = np.sqrt(np.mean(np.sum((a_pred - a_true) ** 2, axis=1)))
    errs = np.array([x_norm(podnn_eval(model, mu) - reconstruct(model.basis, a), cfg.h) for mu, a in zip(snaps72.params, a_true)])
    # orthonormal basis: state error in the span equals the coefficient error
    assert np.allclose(errs, np.linalg.norm(a_pred - a_true, axis=1), atol=1e-12)
    assert errs.mean() <= 5 * rmse


def test_single_snapshot_constant(cfg, snaps72):
    one = SnapshotSet(1, 1, snaps72.params[71:72], snaps72.snapshots[:, 71:72], snaps72.steps[71:72], snaps72.final_increments[71:72], 0)
    m = build_podnn(cfg, one, 1e-6, (8,), TrainConfig(loss="mse", learning_rate=1e-2, max_epochs_per_round=2000, max_rounds=1))
    assert m.basis.size == 1 and m.coeff_std[0] == 1.0
    err = x_norm(podnn_eval(m, snaps72.params[71]) - snaps72.snapshots[:, 71], cfg.h)
    assert err <= projection_error(m.basis, snaps72.snapshots[:, 71]) + 1e-6


def test_deterministic(cfg, snaps72, model):
    again = build_podnn(cfg, snaps72, 1e-6, (64, 32), TRAIN)
    mu = (1.23, 0.0777)
    assert np.array_equal(podnn_eval(model, mu), podnn_eval(again, mu))
    assert np.array_equal(podnn_eval(model, mu), podnn_eval(model, mu))


def test_no_residual_evaluations_and_in_span(model, cfg):
    before = fom.RESIDUAL_CALLS
    w = podnn_eval(model, (1.7, 0.12))
    assert fom.RESIDUAL_CALLS == before
    assert projection_error(model.basis, w) <= 1e-10 * max(1.0, x_norm(w, cfg.h))


def test_error_bounded_below_by_projection(model, cfg, coarse_reference):
    for mu, s in zip(coarse_reference.params[::5], coarse_reference.snapshots[:, ::5].T):
        err = x_norm(podnn_eval(model, mu) - s, cfg.h)
        assert err >= projection_error(model.basis, s) - 1e-12


def test_validation_split_option(cfg, snaps72):
    m = build_podnn(cfg, snaps72, 1e-6, (16,), TrainConfig(loss="mse", max_epochs_per_round=50, max_rounds=1), validation_fraction=0.2)
    assert len(m.loss_history) == 50
    assert np.all(np.isfinite(podnn_eval(m, (1.0, 0.1))))
