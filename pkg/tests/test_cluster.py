import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bifrom.cluster import _energy, elbow_report, enrich_cluster, enrich_overlap, grid_neighbors, kmeans
from bifrom.errors import InvalidKError
from bifrom.pod import compute_pod, projection_error

H = 0.5


def _params(m):
    return np.column_stack([np.arange(m, dtype=float), np.zeros(m)])


def test_two_separated_pairs():
    pts = np.array([[0.0, 0.0], [0.0, 0.2], [10.0, 10.0], [10.0, 10.4]]).T
    c = kmeans(pts, 2, _params(4), H, seed=3)
    assert c.labels[0] == c.labels[1] != c.labels[2] == c.labels[3]
    # each pair contributes 2 * (gap/2)^2 in the X-norm
    assert c.energy == pytest.approx(H * (2 * 0.1**2 + 2 * 0.2**2), rel=1e-12)


def test_k1_is_total_variance(rng):
    pts = rng.normal(size=(6, 10))
    c = kmeans(pts, 1, _params(10), H)
    assert np.allclose(c.state_centroids[:, 0], pts.mean(axis=1))
    assert c.energy == pytest.approx(H * np.sum((pts - pts.mean(axis=1, keepdims=True)) ** 2), rel=1e-12)


def test_k_equals_ns(rng):
    pts = rng.normal(size=(4, 7))
    c = kmeans(pts, 7, _params(7), H)
    assert c.energy == pytest.approx(0.0, abs=1e-20)
    assert sorted(c.labels) == list(range(7))


def test_invalid_k(rng):
    pts = rng.normal(size=(3, 5))
    for k in (0, 6):
        with pytest.raises(InvalidKError):
            kmeans(pts, k, _params(5), H)


def test_energy_recomputed_and_clusters_nonempty(snaps72, cfg):
    c = kmeans(snaps72.snapshots, 8, snaps72.params, cfg.h, seed=0, restarts=10)
    pts = snaps72.snapshots.T
    assert c.energy == pytest.approx(_energy(pts, c.labels, c.state_centroids.T, cfg.h), rel=1e-10, abs=1e-14)
    assert np.all(np.bincount(c.labels, minlength=8) > 0)
    assert np.allclose(c.parameter_centroids[0], snaps72.params[c.labels == 0].mean(axis=0))
    assert np.all(np.diff(c.energy_history) <= 1e-12 * np.abs(c.energy_history[:-1]))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 1000), k=st.integers(1, 6))
def test_lloyd_energy_nonincreasing(seed, k):
    rng = np.random.default_rng(seed)
    pts = np.hstack([rng.normal(loc=c, size=(3, 5)) for c in rng.normal(scale=4, size=3)])
    c = kmeans(pts, k, _params(15), H, seed=seed, restarts=2)
    hist = np.array(c.energy_history)
    assert np.all(hist[1:] <= hist[:-1] * (1 + 1e-12))


def test_seeded_determinism(snaps72, cfg):
    runs = [kmeans(snaps72.snapshots, 8, snaps72.params, cfg.h, seed=5, restarts=4) for _ in range(3)]
    for r in runs[1:]:
        assert np.array_equal(r.labels, runs[0].labels)
        assert np.array_equal(r.state_centroids, runs[0].state_centroids)
        assert r.energy == runs[0].energy


def test_duplicate_points_do_not_crash():
    pts = np.ones((3, 5))
    c = kmeans(pts, 3, _params(5), H)
    assert np.all(np.bincount(c.labels, minlength=3) > 0)
    assert c.energy == 0.0


def test_elbow_report_monotone(snaps72, cfg):
    rep = elbow_report(snaps72.snapshots, snaps72.params, cfg.h, [1, 2, 4, 8], restarts=3)
    energies = [e for _, e in rep]
    assert all(b <= a for a, b in zip(energies, energies[1:]))


def test_grid_neighbors():
    assert grid_neighbors((8, 9), range(72)).size == 0
    interior = 3 + 8 * 4
    assert sorted(grid_neighbors((8, 9), [interior])) == sorted([interior - 1, interior + 1, interior - 8, interior + 8])
    assert sorted(grid_neighbors((8, 9), [0])) == [1, 8]
    assert sorted(grid_neighbors((8, 9), [71])) == [63, 70]
    nb = grid_neighbors((8, 9), [0, 1])
    assert sorted(nb) == [2, 8, 9]


def test_no_neighbors_reduces_to_plain_pod(snaps72, cfg):
    c = kmeans(snaps72.snapshots, 1, snaps72.params, cfg.h)
    bases = enrich_overlap(snaps72.snapshots, c, snaps72.grid_shape, 1e-4, 1e-6, cfg.h)
    plain = compute_pod(snaps72.snapshots, 1e-6, cfg.h)
    assert bases.neighbors[0].size == 0
    assert np.allclose(bases.bases[0].modes, plain.modes, atol=1e-12)


def test_neighbor_in_span_is_discarded(rng):
    s = rng.normal(size=(10, 3))
    snaps = np.column_stack([s, s[:, 0] + 2 * s[:, 1]])
    with_nb = enrich_cluster(snaps, [0, 1, 2], [3], 0.0, 0.0, H)
    plain = compute_pod(s, 0.0, H)
    assert with_nb.size == plain.size
    cos = np.linalg.svd(H * with_nb.modes.T @ plain.modes, compute_uv=False)
    assert np.allclose(cos, 1.0, atol=1e-10)


def test_tol_order_enforced(snaps72, cfg):
    c = kmeans(snaps72.snapshots, 2, snaps72.params, cfg.h, restarts=1)
    with pytest.raises(ValueError):
        enrich_overlap(snaps72.snapshots, c, snaps72.grid_shape, 1e-6, 1e-4, cfg.h)


@pytest.fixture(scope="module")
def local72(snaps72, cfg):
    c = kmeans(snaps72.snapshots, 8, snaps72.params, cfg.h)
    return c, enrich_overlap(snaps72.snapshots, c, snaps72.grid_shape, 1e-4, 1e-6, cfg.h)


def test_enriched_basis_reproduces_neighbors(local72, snaps72, cfg):
    _, bases = local72
    s = snaps72.snapshots
    bound = 10 * np.sqrt(1e-6)
    for b, mem, nb in zip(bases.bases, bases.members, bases.neighbors):
        assert not set(mem) & set(nb)
        idx = np.r_[mem, nb]
        norms = np.sqrt(cfg.h * np.sum(s[:, idx] ** 2, axis=0))
        nonzero = norms > 1e-8
        rel = projection_error(b, s[:, idx])[nonzero] / norms[nonzero]
        assert np.all(rel <= bound)
        assert np.allclose(cfg.h * b.modes.T @ b.modes, np.eye(b.size), atol=1e-10)


def test_enrichment_never_worse_than_first_pod(local72, snaps72, cfg):
    c, bases = local72
    s = snaps72.snapshots
    for k, b in enumerate(bases.bases):
        first = compute_pod(s[:, bases.members[k]], 1e-4, cfg.h)
        idx = np.r_[bases.members[k], bases.neighbors[k]]
        assert np.all(projection_error(b, s[:, idx]) <= projection_error(first, s[:, idx]) + 1e-12)


def test_enrichment_deterministic(local72, snaps72, cfg):
    c, bases = local72
    again = enrich_overlap(snaps72.snapshots, c, snaps72.grid_shape, 1e-4, 1e-6, cfg.h)
    for a, b in zip(bases.bases, again.bases):
        assert np.array_equal(a.modes, b.modes)


def test_no_overlap_mode(local72, snaps72, cfg):
    c, _ = local72
    plain = enrich_overlap(snaps72.snapshots, c, snaps72.grid_shape, 1e-4, 1e-6, cfg.h, overlap=False)
    assert all(nb.size == 0 for nb in plain.neighbors)
    ref = compute_pod(snaps72.snapshots[:, c.members(0)], 1e-6, cfg.h)
    assert np.array_equal(plain.bases[0].modes, ref.modes)
