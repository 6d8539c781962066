"""Workspace directory: manifest, stage flags and artifact (de)serialization."""

from __future__ import annotations

import contextlib
import fcntl
import logging
from pathlib import Path

import numpy as np

from .ann import Mlp
from .cluster import Clustering, LocalBasisSet
from .config import PipelineConfig
from .errors import ConfigError, MissingArtifactError
from .fom import FomConfig, SnapshotSet
from .matrixio import load_matrix, save_matrix
from .pod import Basis
from .podnn import PodNnModel
from .projection import GlobalRom, LocalRoms
from .rom import ReducedOperators
from .selection import Criterion, ErrorTable, SelectionCriterion, Standardized

log = logging.getLogger(__name__)

FORMAT_VERSION = "1"
MANIFEST = "manifest.txt"


def _read_kv(path: Path) -> dict[str, str]:
    out = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out


def _write_kv(path: Path, items: dict[str, str]) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text("".join(f"{k}={v}\n" for k, v in items.items()), encoding="utf-8")
    tmp.replace(path)


class Workspace:
    """A directory of artifacts produced by the offline and online stages.

    The manifest records the format version, the config hash, the seed and one
    ``stage.<name>=1`` flag per completed stage. Opening a workspace built with
    a different configuration raises ConfigError.
    """

    def __init__(self, root, cfg: PipelineConfig):
        self.root = Path(root)
        self.cfg = cfg
        self.fom: FomConfig = cfg.fom()
        self.root.mkdir(parents=True, exist_ok=True)
        path = self.root / MANIFEST
        if path.exists():
            self.manifest = _read_kv(path)
            if self.manifest.get("format_version") != FORMAT_VERSION:
                raise ConfigError(f"{path}: unsupported format_version {self.manifest.get('format_version')!r}")
            if self.manifest.get("config_hash") != cfg.digest():
                raise ConfigError(f"{self.root}: config hash mismatch; use a fresh workspace for a changed config")
        else:
            self.manifest = {"format_version": FORMAT_VERSION, "config_hash": cfg.digest(), "seed": str(cfg.seed)}
            self._flush()
            (self.root / "config.txt").write_text(cfg.to_text(), encoding="utf-8")

    # ---- manifest / staging -------------------------------------------------

    def _flush(self):
        head = {k: self.manifest[k] for k in ("format_version", "config_hash", "seed")}
        stages = {k: v for k, v in sorted(self.manifest.items()) if k.startswith("stage.")}
        _write_kv(self.root / MANIFEST, {**head, **stages})

    def has(self, stage: str) -> bool:
        """Flag set and stage directory present (deleting the directory forces a rebuild)."""
        return self.manifest.get(f"stage.{stage}") == "1" and (self.root / stage).is_dir()

    def require(self, stage: str) -> None:
        if not self.has(stage):
            raise MissingArtifactError(f"stage {stage!r} has not been built in {self.root}")

    def mark(self, stage: str) -> None:
        (self.root / stage).mkdir(exist_ok=True)
        self.manifest[f"stage.{stage}"] = "1"
        self._flush()

    @contextlib.contextmanager
    def lock(self):
        """Exclusive writer lock (released automatically if the process dies)."""
        with open(self.root / ".lock", "w") as fh:
            try:
                fcntl.flock(fh, fcntl.LOCK_EX | fcntl.LOCK_NB)
            except BlockingIOError as exc:
                raise ConfigError(f"workspace {self.root} is locked by another writer") from exc
            try:
                yield self
            finally:
                fcntl.flock(fh, fcntl.LOCK_UN)

    def path(self, *parts) -> Path:
        p = self.root.joinpath(*parts)
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def save(self, rel: str, matrix) -> None:
        save_matrix(self.path(rel), matrix)

    def load(self, rel: str) -> np.ndarray:
        p = self.root / rel
        if not p.exists():
            raise MissingArtifactError(f"artifact {rel} missing from {self.root}")
        return load_matrix(p)

    # ---- snapshot sets -------------------------------------------------------

    def save_snapshots(self, name: str, snaps: SnapshotSet) -> None:
        self.save(f"{name}/states.mat", snaps.snapshots)
        self.save(f"{name}/params.mat", snaps.params)
        self.save(f"{name}/grid.mat", [[snaps.n1, snaps.n2, snaps.seed]])
        self.save(f"{name}/convergence.mat", np.column_stack([snaps.steps, snaps.final_increments]))
        self.mark(name)

    def load_snapshots(self, name: str) -> SnapshotSet:
        self.require(name)
        n1, n2, seed = (int(v) for v in self.load(f"{name}/grid.mat")[0])
        conv = self.load(f"{name}/convergence.mat")
        return SnapshotSet(
            n1, n2, self.load(f"{name}/params.mat"), self.load(f"{name}/states.mat"), conv[:, 0].astype(int), conv[:, 1], seed
        )

    # ---- bases and reduced operators ----------------------------------------

    def _save_reduced(self, prefix: str, red: ReducedOperators) -> None:
        b = red.basis
        self.save(f"{prefix}/modes.mat", b.modes)
        self.save(f"{prefix}/singular_values.mat", b.singular_values)
        self.save(f"{prefix}/energy_tol.mat", [[b.energy_tol]])
        self.save(f"{prefix}/a_diff.mat", red.a_diff)
        self.save(f"{prefix}/a_react.mat", red.a_react)
        self.save(f"{prefix}/a_decay.mat", red.a_decay)
        size = red.size
        self.save(f"{prefix}/tensor.mat", red.tensor.reshape(size, size * size))

    def _load_reduced(self, prefix: str) -> ReducedOperators:
        modes = self.load(f"{prefix}/modes.mat")
        basis = Basis(modes, self.load(f"{prefix}/singular_values.mat")[:, 0], float(self.load(f"{prefix}/energy_tol.mat")[0, 0]), self.fom.h)
        size = modes.shape[1]
        return ReducedOperators(
            self.load(f"{prefix}/a_diff.mat"),
            self.load(f"{prefix}/a_react.mat"),
            self.load(f"{prefix}/a_decay.mat"),
            self.load(f"{prefix}/tensor.mat").reshape(size, size, size),
            basis,
        )

    def save_global(self, rom: GlobalRom) -> None:
        self._save_reduced("global", rom.reduced)
        self.mark("global")

    def load_global(self) -> GlobalRom:
        self.require("global")
        return GlobalRom(self.fom, self.load_snapshots("snapshots"), self._load_reduced("global"))

    @staticmethod
    def local_stage(overlap: bool) -> str:
        return "local" if overlap else "local-nooverlap"

    def save_local(self, local: LocalRoms, table: ErrorTable) -> None:
        stage = self.local_stage(local.bases.overlap)
        c = local.clustering
        self.save(f"{stage}/labels.mat", c.labels)
        self.save(f"{stage}/state_centroids.mat", c.state_centroids)
        self.save(f"{stage}/parameter_centroids.mat", c.parameter_centroids)
        self.save(f"{stage}/clustering.mat", [[c.k, c.energy, c.seed, c.restarts, local.bases.tol1, local.bases.tol2]])
        for k, red in enumerate(local.reduced):
            self._save_reduced(f"{stage}/cluster_{k}", red)
            self.save(f"{stage}/cluster_{k}/members.mat", local.bases.members[k])
            self.save(f"{stage}/cluster_{k}/neighbors.mat", local.bases.neighbors[k])
        self._save_table(f"{stage}/error_table", table)
        self.mark(stage)

    def load_local(self, overlap: bool) -> tuple[LocalRoms, ErrorTable]:
        stage = self.local_stage(overlap)
        self.require(stage)
        snaps = self.load_snapshots("snapshots")
        k, energy, seed, restarts, tol1, tol2 = self.load(f"{stage}/clustering.mat")[0]
        k = int(k)
        clustering = Clustering(
            k,
            self.load(f"{stage}/labels.mat")[:, 0].astype(int),
            self.load(f"{stage}/state_centroids.mat"),
            self.load(f"{stage}/parameter_centroids.mat"),
            float(energy),
            int(seed),
            int(restarts),
        )
        reduced = [self._load_reduced(f"{stage}/cluster_{c}") for c in range(k)]
        members = [self.load(f"{stage}/cluster_{c}/members.mat")[:, 0].astype(int) for c in range(k)]
        neighbors = [self.load(f"{stage}/cluster_{c}/neighbors.mat").reshape(-1).astype(int) for c in range(k)]
        bases = LocalBasisSet([r.basis for r in reduced], members, neighbors, float(tol1), float(tol2), overlap)
        local = LocalRoms(self.fom, snaps, clustering, bases, reduced)
        return local, self._load_table(f"{stage}/error_table")

    def _save_table(self, prefix: str, table: ErrorTable) -> None:
        self.save(f"{prefix}_l2.mat", table.l2)
        self.save(f"{prefix}_linf.mat", table.linf)
        self.save(f"{prefix}_converged.mat", table.converged)
        self.save(f"{prefix}_absolute.mat", table.absolute)

    def _load_table(self, prefix: str) -> ErrorTable:
        return ErrorTable(
            self.load(f"{prefix}_l2.mat"),
            self.load(f"{prefix}_linf.mat"),
            self.load(f"{prefix}_converged.mat").astype(bool),
            self.load(f"{prefix}_absolute.mat")[:, 0].astype(bool),
        )

    # ---- networks -----------------------------------------------------------

    def save_net(self, prefix: str, net: Mlp, mean=None, std=None) -> None:
        for i, (w, b) in enumerate(zip(net.weights, net.biases)):
            self.save(f"{prefix}/W{i}.mat", w)
            self.save(f"{prefix}/b{i}.mat", b)
        items = {"dims": ",".join(str(d) for d in net.layer_dims), "mode": net.output_mode}
        if mean is not None:
            self.save(f"{prefix}/target_mean.mat", mean)
            self.save(f"{prefix}/target_std.mat", std)
            items["standardized"] = "1"
        _write_kv(self.path(f"{prefix}/manifest.txt"), items)

    def load_net(self, prefix: str):
        man = self.root / prefix / "manifest.txt"
        if not man.exists():
            raise MissingArtifactError(f"network {prefix} missing from {self.root}")
        items = _read_kv(man)
        dims = [int(d) for d in items["dims"].split(",")]
        n = len(dims) - 1
        net = Mlp(
            dims,
            [self.load(f"{prefix}/W{i}.mat") for i in range(n)],
            [self.load(f"{prefix}/b{i}.mat")[:, 0] for i in range(n)],
            items["mode"],
        )
        if items.get("standardized") == "1":
            return Standardized(net, self.load(f"{prefix}/target_mean.mat")[:, 0], self.load(f"{prefix}/target_std.mat")[:, 0])
        return net

    # ---- criteria -----------------------------------------------------------

    @staticmethod
    def criterion_stage(kind: Criterion, overlap: bool) -> str:
        return f"criterion-{kind.value}" + ("" if overlap else "-nooverlap")

    def save_criterion(self, crit: SelectionCriterion, overlap: bool) -> None:
        stage = self.criterion_stage(crit.kind, overlap)
        if crit.classifier is not None:
            self.save_net(f"{stage}/classifier", crit.classifier)
        for i, reg in enumerate(crit.regressors):
            self.save_net(f"{stage}/regressor_{i}", reg.net, reg.mean, reg.std)
        if crit.oracle_labels is not None:
            self.save(f"{stage}/oracle_labels.mat", crit.oracle_labels)
        self.mark(stage)

    def load_criterion(self, kind: Criterion, local: LocalRoms, table: ErrorTable) -> SelectionCriterion:
        overlap = local.bases.overlap
        stage = self.criterion_stage(kind, overlap)
        self.require(stage)
        snaps = local.snaps
        crit = SelectionCriterion(
            kind,
            self.fom,
            local.k,
            parameter_centroids=local.clustering.parameter_centroids,
            snapshot_params=snaps.params,
            snapshot_labels=local.clustering.labels,
            table=table,
        )
        if kind is Criterion.CLASSIFIER_ANN:
            crit.classifier = self.load_net(f"{stage}/classifier")
        elif kind is Criterion.REGRESSION_ANN:
            crit.regressors = [self.load_net(f"{stage}/regressor_0")]
        elif kind is Criterion.REGRESSION_ANN_INDEPENDENT:
            crit.regressors = [self.load_net(f"{stage}/regressor_{i}") for i in range(local.k)]
        elif kind is Criterion.ORACLE:
            crit.reference_params = self.load_snapshots("reference").params
            crit.oracle_labels = self.load(f"{stage}/oracle_labels.mat")[:, 0].astype(int)
        return crit

    # ---- POD-NN -------------------------------------------------------------

    def save_podnn(self, model: PodNnModel) -> None:
        self.save("podnn/modes.mat", model.basis.modes)
        self.save("podnn/singular_values.mat", model.basis.singular_values)
        self.save("podnn/energy_tol.mat", [[model.basis.energy_tol]])
        self.save("podnn/coeff_mean.mat", model.coeff_mean)
        self.save("podnn/coeff_std.mat", model.coeff_std)
        self.save_net("podnn/net", model.net)
        self.mark("podnn")

    def load_podnn(self) -> PodNnModel:
        self.require("podnn")
        basis = Basis(
            self.load("podnn/modes.mat"),
            self.load("podnn/singular_values.mat")[:, 0],
            float(self.load("podnn/energy_tol.mat")[0, 0]),
            self.fom.h,
        )
        return PodNnModel(
            self.fom,
            basis,
            self.load("podnn/coeff_mean.mat")[:, 0],
            self.load("podnn/coeff_std.mat")[:, 0],
            self.load_net("podnn/net"),
        )
