"""Local-ROM error tables and cluster-selection criteria."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .ann import Mlp, TrainConfig, forward, train_classifier, train_regressor
from .errors import MissingArtifactError
from .fom import FomConfig, SnapshotSet
from .metrics import relative_errors
from .projection import LocalRoms, nearest_order

log = logging.getLogger(__name__)

SENTINEL = 1e30
INVERSE_FLOOR = 1e-12


class Criterion(str, Enum):
    PARAMETER_CENTROID = "centroid"
    CLOSEST_SNAPSHOT = "snapshot"
    CLASSIFIER_ANN = "classifier"
    REGRESSION_ANN = "regression"
    REGRESSION_ANN_INDEPENDENT = "regression-independent"
    NEXT_BEST_SNAPSHOT = "next-best"
    ORACLE = "oracle"


@dataclass
class ErrorTable:
    """Relative u-field errors of every local ROM (columns) at a set of parameters (rows)."""

    l2: np.ndarray
    linf: np.ndarray
    converged: np.ndarray
    absolute: np.ndarray  # rows whose reference is the trivial state

    @property
    def shape(self) -> tuple[int, int]:
        return self.l2.shape


def error_table(local: LocalRoms, params: np.ndarray, references: np.ndarray) -> ErrorTable:
    """Solve every local ROM at every parameter and compare with ``references`` (2N x m)."""
    m, k = len(params), local.k
    l2 = np.empty((m, k))
    linf = np.empty((m, k))
    conv = np.zeros((m, k), dtype=bool)
    absolute = np.zeros(m, dtype=bool)
    for i, mu in enumerate(params):
        for c in range(k):
            res = local.evaluate_cluster(c, mu)
            if res.solution.converged:
                err = relative_errors(res.state, references[:, i])
                l2[i, c], linf[i, c], conv[i, c] = err.l2, err.linf, True
                absolute[i] = err.absolute
            else:
                l2[i, c] = linf[i, c] = SENTINEL
    return ErrorTable(l2, linf, conv, absolute)


def build_error_table(local: LocalRoms) -> ErrorTable:
    """Errors of all local ROMs at all snapshot locations (offline; exact solutions known)."""
    return error_table(local, local.snaps.params, local.snaps.snapshots)


def regression_targets(table: ErrorTable | np.ndarray) -> np.ndarray:
    """Row-normalized inverse relative errors; larger means a better local ROM."""
    eps = table.l2 if isinstance(table, ErrorTable) else np.asarray(table, dtype=float)
    inv = 1.0 / np.maximum(eps, INVERSE_FLOOR)
    return inv / np.linalg.norm(inv, axis=1, keepdims=True)


@dataclass
class Standardized:
    """Regression network with per-output standardization of its targets."""

    net: Mlp
    mean: np.ndarray
    std: np.ndarray

    def predict(self, x: np.ndarray) -> np.ndarray:
        return forward(self.net, x) * self.std + self.mean


def standardize(targets: np.ndarray):
    mean = targets.mean(axis=0)
    std = targets.std(axis=0)
    degenerate = std <= 1e-14 * np.maximum(1.0, np.abs(mean))
    std = np.where(degenerate, 1.0, std)
    return mean, std


def fit_standardized(inputs: np.ndarray, targets: np.ndarray, hidden, cfg: TrainConfig) -> tuple[Standardized, bool, float]:
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    if targets.shape[0] != inputs.shape[0]:
        targets = targets.T
    mean, std = standardize(targets)
    dims = [inputs.shape[1], *hidden, targets.shape[1]]
    res = train_regressor(inputs, (targets - mean) / std, dims, cfg)
    return Standardized(res.net, mean, std), res.converged, res.final_loss


@dataclass
class SelectionCriterion:
    kind: Criterion
    cfg: FomConfig
    k: int
    parameter_centroids: np.ndarray | None = None
    snapshot_params: np.ndarray | None = None
    snapshot_labels: np.ndarray | None = None
    table: ErrorTable | None = None
    classifier: Mlp | None = None
    regressors: list[Standardized] = field(default_factory=list)
    reference_params: np.ndarray | None = None
    oracle_labels: np.ndarray | None = None
    info: dict = field(default_factory=dict)

    def _need(self, *names):
        for name in names:
            value = getattr(self, name)
            if value is None or (isinstance(value, list) and not value):
                raise MissingArtifactError(f"criterion {self.kind.value!r} needs {name}")

    def scores(self, mus: np.ndarray) -> np.ndarray:
        """Per-cluster scores (larger is better) for a batch of parameters."""
        mus = np.atleast_2d(np.asarray(mus, dtype=float))
        x = self.cfg.normalize(mus)
        kind = self.kind
        if kind is Criterion.PARAMETER_CENTROID:
            self._need("parameter_centroids")
            c = self.cfg.normalize(self.parameter_centroids)
            return -np.sum((x[:, None, :] - c[None, :, :]) ** 2, axis=2)
        if kind is Criterion.CLASSIFIER_ANN:
            self._need("classifier")
            return forward(self.classifier, x)
        if kind is Criterion.REGRESSION_ANN:
            self._need("regressors")
            return self.regressors[0].predict(x)
        if kind is Criterion.REGRESSION_ANN_INDEPENDENT:
            self._need("regressors")
            return np.column_stack([r.predict(x)[:, 0] for r in self.regressors])
        raise ValueError(f"{kind.value!r} has no score function")

    def select_many(self, mus) -> np.ndarray:
        mus = np.atleast_2d(np.asarray(mus, dtype=float))
        kind = self.kind
        if kind in (Criterion.CLOSEST_SNAPSHOT, Criterion.NEXT_BEST_SNAPSHOT):
            self._need("snapshot_params")
            nearest = np.array([nearest_order(self.cfg, self.snapshot_params, mu)[0] for mu in mus])
            if kind is Criterion.CLOSEST_SNAPSHOT:
                self._need("snapshot_labels")
                return self.snapshot_labels[nearest].astype(int)
            self._need("table")
            return np.argmin(self.table.l2[nearest], axis=1)
        if kind is Criterion.ORACLE:
            self._need("reference_params", "oracle_labels")
            nearest = np.array([nearest_order(self.cfg, self.reference_params, mu)[0] for mu in mus])
            return self.oracle_labels[nearest].astype(int)
        # argmax returns the lowest index on ties
        return np.argmax(self.scores(mus), axis=1)


def select_cluster(criterion: SelectionCriterion, mu) -> int:
    return int(criterion.select_many(np.asarray(mu, dtype=float)[None, :])[0])


def make_criterion(
    kind: Criterion | str,
    local: LocalRoms,
    *,
    table: ErrorTable | None = None,
    hidden=(64, 32),
    train_cfg: TrainConfig | None = None,
    reference: SnapshotSet | None = None,
    oracle_labels: np.ndarray | None = None,
) -> SelectionCriterion:
    """Build (and train, where needed) a selection criterion for ``local``."""
    kind = Criterion(kind)
    cfg = local.cfg
    snaps = local.snaps
    crit = SelectionCriterion(
        kind,
        cfg,
        local.k,
        parameter_centroids=local.clustering.parameter_centroids,
        snapshot_params=snaps.params,
        snapshot_labels=local.clustering.labels,
        table=table,
    )
    x = cfg.normalize(snaps.params)
    train_cfg = train_cfg or TrainConfig()
    if kind is Criterion.CLASSIFIER_ANN:
        cls_cfg = replace(train_cfg, loss="cross_entropy")
        res = train_classifier(x, local.clustering.labels, [2, *hidden, local.k], cls_cfg)
        crit.classifier = res.net
        crit.info.update(perfect_match=res.converged, accuracy=res.accuracy, epochs=res.epochs)
    elif kind in (Criterion.REGRESSION_ANN, Criterion.REGRESSION_ANN_INDEPENDENT):
        if table is None:
            raise MissingArtifactError("regression criteria need the snapshot error table")
        targets = regression_targets(table)
        reg_cfg = replace(train_cfg, loss="mse")
        if kind is Criterion.REGRESSION_ANN:
            model, plateau, loss = fit_standardized(x, targets, hidden, reg_cfg)
            crit.regressors = [model]
            crit.info.update(plateau=plateau, final_loss=loss)
        else:
            losses = []
            for c in range(local.k):
                model, _, loss = fit_standardized(x, targets[:, c : c + 1], hidden, reg_cfg)
                crit.regressors.append(model)
                losses.append(loss)
            crit.info.update(final_loss=float(np.mean(losses)))
    elif kind is Criterion.NEXT_BEST_SNAPSHOT:
        if table is None:
            raise MissingArtifactError("next-best criterion needs the snapshot error table")
    elif kind is Criterion.ORACLE:
        if reference is None or oracle_labels is None:
            raise MissingArtifactError("oracle criterion needs the reference set and its optimal labels")
        crit.reference_params = reference.params
        crit.oracle_labels = np.asarray(oracle_labels, dtype=int)
    return crit


def oracle_selection(local: LocalRoms, reference: SnapshotSet, errors: ErrorTable | None = None) -> np.ndarray:
    """Per reference point, the local ROM with the smallest relative L2 error (lowest index on ties)."""
    if errors is None:
        errors = error_table(local, reference.params, reference.snapshots)
    return np.argmin(errors.l2, axis=1)
