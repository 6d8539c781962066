"""k-means clustering of snapshots and overlapping local bases."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidKError
from .pod import Basis, compute_pod, project, reconstruct

MAX_LLOYD_ITER = 300
RESIDUAL_FLOOR = 1e-10


@dataclass
class Clustering:
    k: int
    labels: np.ndarray
    state_centroids: np.ndarray  # (2N, K)
    parameter_centroids: np.ndarray  # (K, 2)
    energy: float
    seed: int
    restarts: int
    energy_history: list[float] = field(default_factory=list)

    def members(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.labels == k)


def _sq_dist(points: np.ndarray, centers: np.ndarray, h: float) -> np.ndarray:
    """Squared X-distances, points (m, n) vs centers (K, n) -> (m, K)."""
    d = (
        np.sum(points * points, axis=1)[:, None]
        - 2.0 * points @ centers.T
        + np.sum(centers * centers, axis=1)[None, :]
    )
    return h * np.maximum(d, 0.0)


def _energy(points, labels, centers, h) -> float:
    diff = points - centers[labels]
    return float(h * np.sum(diff * diff))


def _plus_plus(points: np.ndarray, k: int, rng: np.random.Generator, h: float) -> np.ndarray:
    m = points.shape[0]
    idx = [int(rng.integers(m))]
    d2 = _sq_dist(points, points[idx], h)[:, 0]
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            # every point coincides with a chosen center; fall back to unused indices
            rest = np.setdiff1d(np.arange(m), idx)
            idx.append(int(rng.choice(rest)))
        else:
            idx.append(int(rng.choice(m, p=d2 / total)))
        d2 = np.minimum(d2, _sq_dist(points, points[idx[-1:]], h)[:, 0])
    return points[idx].copy()


def _lloyd(points: np.ndarray, centers: np.ndarray, h: float):
    k = centers.shape[0]
    labels = None
    history = []
    for _ in range(MAX_LLOYD_ITER):
        new = np.argmin(_sq_dist(points, centers, h), axis=1)
        counts = np.bincount(new, minlength=k)
        for empty in np.flatnonzero(counts == 0):
            # give the empty cluster the point farthest from its own centroid
            far = np.sum((points - centers[new]) ** 2, axis=1)
            far[counts[new] <= 1] = -1.0
            j = int(np.argmax(far))
            counts[new[j]] -= 1
            new[j] = empty
            counts[empty] = 1
            centers[empty] = points[j]
        stable = labels is not None and np.array_equal(new, labels)
        labels = new
        centers = np.stack([points[labels == c].mean(axis=0) for c in range(k)])
        energy = _energy(points, labels, centers, h)
        if history and energy > history[-1] * (1.0 + 1e-12) + 1e-300:
            raise AssertionError(f"Lloyd energy increased: {history[-1]!r} -> {energy!r}")
        history.append(energy)
        if stable:
            break
    return labels, centers, history


def kmeans(snapshots: np.ndarray, k: int, params: np.ndarray, h: float, seed: int = 0, restarts: int = 10) -> Clustering:
    """k-means++ seeded Lloyd iterations under the X-norm; best of ``restarts``.

    ``snapshots`` is (2N x Ns) column-wise; ``params`` (Ns x 2) gives the
    parameter locations used for the parameter centroids.
    """
    points = np.ascontiguousarray(np.asarray(snapshots, dtype=float).T)
    ns = points.shape[0]
    if k < 1 or k > ns:
        raise InvalidKError(f"K={k} must satisfy 1 <= K <= Ns={ns}")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    best = None
    for r in range(restarts):
        rng = np.random.default_rng([seed, r])
        labels, centers, history = _lloyd(points, _plus_plus(points, k, rng, h), h)
        if best is None or history[-1] < best[2][-1]:
            best = (labels, centers, history)
    labels, centers, history = best
    params = np.asarray(params, dtype=float)
    pcent = np.stack([params[labels == c].mean(axis=0) for c in range(k)])
    return Clustering(k, labels, centers.T.copy(), pcent, history[-1], seed, restarts, history)


def elbow_report(snapshots, params, h, ks, seed=0, restarts=10) -> list[tuple[int, float]]:
    """k-means energy against K. Informational only; K is never picked from it."""
    return [(k, kmeans(snapshots, k, params, h, seed, restarts).energy) for k in ks]


def grid_neighbors(grid_shape: tuple[int, int], members) -> np.ndarray:
    """Indices 4-adjacent on the sampling grid to any member, members excluded."""
    n1, n2 = grid_shape
    member_set = set(int(m) for m in members)
    out = set()
    for j in member_set:
        i1, i2 = j % n1, j // n1
        for d1, d2 in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            a, b = i1 + d1, i2 + d2
            if 0 <= a < n1 and 0 <= b < n2:
                nb = b * n1 + a
                if nb not in member_set:
                    out.add(nb)
    return np.array(sorted(out), dtype=int)


@dataclass
class LocalBasisSet:
    bases: list[Basis]
    members: list[np.ndarray]
    neighbors: list[np.ndarray]
    tol1: float
    tol2: float
    overlap: bool

    @property
    def k(self) -> int:
        return len(self.bases)


def enrich_cluster(snapshots: np.ndarray, members, neighbors, tol1: float, tol2: float, h: float) -> Basis:
    """First POD of the members, enriched by the X-orthogonal complement of the neighbors, then a second POD.

    Both blocks enter the second POD with unit weight: the first-POD modes
    unscaled and each neighbor residual normalized. The blocks are
    X-orthogonal, so this keeps the whole first-POD span (whose singular
    values may be tiny next to the neighbors, e.g. for a cluster of
    trivial states) and truncates only the residual directions.
    """
    own = snapshots[:, members]
    if len(neighbors) == 0:
        return compute_pod(own, tol2, h)
    first = compute_pod(own, tol1, h)
    nb = snapshots[:, neighbors]
    resid = nb - reconstruct(first, project(first, nb))
    norms = np.sqrt(h * np.sum(resid * resid, axis=0))
    keep = norms > RESIDUAL_FLOOR
    parts = [first.modes, resid[:, keep] / norms[keep]]
    return compute_pod(np.hstack(parts), tol2, h)


def enrich_overlap(
    snapshots: np.ndarray,
    clustering: Clustering,
    grid_shape: tuple[int, int],
    tol1: float,
    tol2: float,
    h: float,
    overlap: bool = True,
) -> LocalBasisSet:
    if tol2 > tol1:
        raise ValueError(f"tol2={tol2} must not exceed tol1={tol1}")
    snapshots = np.asarray(snapshots, dtype=float)
    bases, members, neighbors = [], [], []
    for c in range(clustering.k):
        mem = clustering.members(c)
        nb = grid_neighbors(grid_shape, mem) if overlap else np.array([], dtype=int)
        bases.append(enrich_cluster(snapshots, mem, nb, tol1, tol2, h))
        members.append(mem)
        neighbors.append(nb)
    return LocalBasisSet(bases, members, neighbors, tol1, tol2, overlap)
