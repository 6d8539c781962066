"""Global and local projection ROMs with branch-tracked reduced solves.

Every reduced solve starts from the projection of the snapshot nearest in
normalized parameter space. The trivial state is an exact root of every
ROM, so a zero-branch starting snapshot would pin Newton there even above
the critical curve. A root is therefore accepted only if it is linearly
stable, matching the branch the pseudo-time march selects; otherwise the
solve restarts from the nearest nonzero-branch snapshots.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cluster import Clustering, LocalBasisSet, enrich_overlap, kmeans
from .fom import DiscreteOperators, FomConfig, SnapshotSet, assemble_operators, x_norm
from .pod import Basis, compute_pod, project
from .rom import ReducedOperators, RomSolution, assemble_reduced, lift, reduced_jacobian, rom_solve

NONZERO_FLOOR = 1e-8
N_ALTERNATES = 3


@dataclass
class Solved:
    state: np.ndarray
    solution: RomSolution
    stable: bool


def nearest_order(cfg: FomConfig, params: np.ndarray, mu) -> np.ndarray:
    """Snapshot indices sorted by Euclidean distance in normalized coordinates (stable ties)."""
    d = np.sum((cfg.normalize(params) - cfg.normalize(mu)) ** 2, axis=1)
    return np.argsort(d, kind="stable")


def tracking_candidates(cfg: FomConfig, snaps: SnapshotSet, mu, n_alt: int = N_ALTERNATES) -> list[int]:
    order = nearest_order(cfg, snaps.params, mu)
    nonzero = x_norm(snaps.snapshots.T, cfg.h) > NONZERO_FLOOR
    alts = [int(j) for j in order[1:] if nonzero[j]][:n_alt]
    if nonzero[order[0]]:
        alts = [int(j) for j in order if nonzero[j]][1 : n_alt + 1]
    return [int(order[0])] + alts


def is_stable(ops: ReducedOperators, params, coeffs: np.ndarray) -> bool:
    return bool(np.max(np.linalg.eigvals(reduced_jacobian(ops, params, coeffs)).real) < 0.0)


def solve_tracked(ops: ReducedOperators, params, starts: list[np.ndarray], method: str = "newton") -> Solved:
    """First stable converged root over the starting states, else the first converged one."""
    fallback = None
    for w in starts:
        sol = rom_solve(ops, params, project(ops.basis, w), method=method)
        if not sol.converged:
            fallback = fallback or Solved(lift(ops, sol), sol, False)
            continue
        if is_stable(ops, params, sol.coeffs):
            return Solved(lift(ops, sol), sol, True)
        if fallback is None or not fallback.solution.converged:
            fallback = Solved(lift(ops, sol), sol, False)
    return fallback


@dataclass
class GlobalRom:
    cfg: FomConfig
    snaps: SnapshotSet
    reduced: ReducedOperators
    tag: str = "global"

    @classmethod
    def build(cls, cfg: FomConfig, snaps: SnapshotSet, energy_tol: float, ops: DiscreteOperators | None = None):
        ops = ops or assemble_operators(cfg)
        basis = compute_pod(snaps.snapshots, energy_tol, cfg.h)
        return cls(cfg, snaps, assemble_reduced(basis, ops))

    @property
    def basis(self) -> Basis:
        return self.reduced.basis

    def evaluate(self, mu) -> Solved:
        starts = [self.snaps.snapshots[:, j] for j in tracking_candidates(self.cfg, self.snaps, mu)]
        return solve_tracked(self.reduced, mu, starts)


@dataclass
class LocalRoms:
    """K local ROMs built on a k-means clustering of the snapshots."""

    cfg: FomConfig
    snaps: SnapshotSet
    clustering: Clustering
    bases: LocalBasisSet
    reduced: list[ReducedOperators]
    # memo of (cluster, mu1, mu2) -> Solved; solves are pure so reuse is exact
    _memo: dict = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def build(
        cls,
        cfg: FomConfig,
        snaps: SnapshotSet,
        k: int = 8,
        tol1: float = 1e-4,
        tol2: float = 1e-6,
        overlap: bool = True,
        seed: int = 0,
        restarts: int = 10,
        ops: DiscreteOperators | None = None,
        clustering: Clustering | None = None,
    ):
        ops = ops or assemble_operators(cfg)
        if clustering is None:
            clustering = kmeans(snaps.snapshots, k, snaps.params, cfg.h, seed, restarts)
        bases = enrich_overlap(snaps.snapshots, clustering, snaps.grid_shape, tol1, tol2, cfg.h, overlap)
        return cls(cfg, snaps, clustering, bases, [assemble_reduced(b, ops) for b in bases.bases])

    @property
    def k(self) -> int:
        return len(self.reduced)

    def evaluate_cluster(self, k: int, mu) -> Solved:
        key = (int(k), float(mu[0]), float(mu[1]))
        hit = self._memo.get(key)
        if hit is None:
            starts = [self.snaps.snapshots[:, j] for j in tracking_candidates(self.cfg, self.snaps, mu)]
            hit = self._memo[key] = solve_tracked(self.reduced[k], mu, starts)
        return hit
