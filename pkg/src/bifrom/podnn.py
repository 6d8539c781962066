"""Non-intrusive POD-NN surrogate: parameters -> global POD coefficients."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ann import TrainConfig, forward, mlp_init, Mlp, train_regressor
from .fom import FomConfig, SnapshotSet
from .pod import Basis, compute_pod, project, reconstruct
from .selection import standardize


@dataclass
class PodNnModel:
    cfg: FomConfig
    basis: Basis
    coeff_mean: np.ndarray
    coeff_std: np.ndarray
    net: Mlp
    loss_history: list[float] = field(default_factory=list, repr=False)
    tag: str = "podnn"

    def coefficients(self, mus) -> np.ndarray:
        x = self.cfg.normalize(np.atleast_2d(np.asarray(mus, dtype=float)))
        return forward(self.net, x) * self.coeff_std + self.coeff_mean

    def evaluate(self, mu) -> np.ndarray:
        return podnn_eval(self, mu)


def build_podnn(
    cfg: FomConfig,
    snaps: SnapshotSet,
    energy_tol: float = 1e-6,
    hidden=(64, 32),
    train_cfg: TrainConfig | None = None,
    validation_fraction: float = 0.0,
) -> PodNnModel:
    """Global POD plus a regression network on standardized coefficients.

    ``validation_fraction`` > 0 holds out that share of snapshots (chosen
    by the training seed) and keeps the epoch with the lowest validation
    loss; it is off by default.
    """
    train_cfg = train_cfg or TrainConfig(loss="mse")
    basis = compute_pod(snaps.snapshots, energy_tol, cfg.h)
    coeffs = project(basis, snaps.snapshots).T  # (Ns, L)
    mean, std = standardize(coeffs)
    x = cfg.normalize(snaps.params)
    y = (coeffs - mean) / std
    dims = [2, *hidden, basis.size]
    if validation_fraction > 0.0:
        net, history = _train_with_validation(x, y, dims, train_cfg, validation_fraction)
    else:
        res = train_regressor(x, y, dims, train_cfg)
        net, history = res.net, res.loss_history
    return PodNnModel(cfg, basis, mean, std, net, history)


def _train_with_validation(x, y, dims, cfg: TrainConfig, fraction: float):
    from .ann import _Adam, loss_grad  # noqa: PLC0415

    rng = np.random.default_rng([cfg.seed, 1])
    n = x.shape[0]
    held = np.zeros(n, dtype=bool)
    held[rng.choice(n, size=max(1, int(round(fraction * n))), replace=False)] = True
    net = mlp_init(dims, "linear", cfg.seed)
    params = net.parameters()
    opt = _Adam(params, cfg)
    best, best_val = net.copy(), np.inf
    history = []
    for _ in range(cfg.max_epochs_per_round * cfg.max_rounds):
        value, grads = loss_grad(net, x[~held], y[~held], "mse")
        history.append(value)
        val = float(np.mean((forward(net, x[held]) - y[held]) ** 2))
        if val < best_val:
            best, best_val = net.copy(), val
        opt.step(params, grads)
    return best, history


def podnn_eval(model: PodNnModel, mu) -> np.ndarray:
    """Feed-forward reconstruction; no residual evaluations."""
    return reconstruct(model.basis, model.coefficients(mu)[0])
