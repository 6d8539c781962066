"""Proper orthogonal decomposition by the method of snapshots."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ZeroSnapshotsError

# eigenvalues below this fraction of the largest are dropped as numerical noise
_RANK_CUTOFF = 1e-13


@dataclass
class Basis:
    """X-orthonormal modes (2N x L) with their singular values."""

    modes: np.ndarray
    singular_values: np.ndarray
    energy_tol: float
    h: float

    @property
    def size(self) -> int:
        return self.modes.shape[1]


def compute_pod(snapshots: np.ndarray, energy_tol: float, h: float) -> Basis:
    """POD of the columns of ``snapshots`` under the inner product h * a.b.

    Keeps the smallest L whose discarded eigenvalue mass is at most
    ``energy_tol`` of the total. Each mode is signed so that its entry of
    largest magnitude is positive.
    """
    s = np.asarray(snapshots, dtype=float)
    if s.ndim != 2 or s.shape[1] < 1:
        raise ValueError("snapshot matrix needs at least one column")
    if not 0.0 <= energy_tol < 1.0:
        raise ValueError(f"energy_tol must lie in [0, 1), got {energy_tol}")
    gram = h * (s.T @ s)
    gram = 0.5 * (gram + gram.T)
    lam, q = np.linalg.eigh(gram)
    lam, q = lam[::-1], q[:, ::-1]
    if lam[0] <= 0.0 or not np.isfinite(lam[0]):
        raise ZeroSnapshotsError("all snapshots are numerically zero")
    keep = lam > _RANK_CUTOFF * lam[0]
    lam, q = lam[keep], q[:, keep]

    total = lam.sum()
    # tail[L] = discarded mass when keeping the first L modes
    tail = np.r_[total - np.cumsum(lam), 0.0]
    n_modes = 1
    while n_modes < lam.size and tail[n_modes - 1] > energy_tol * total:
        n_modes += 1
    lam, q = lam[:n_modes], q[:, :n_modes]

    modes = (s @ q) / np.sqrt(lam)
    # one re-orthonormalization pass removes the round-off of the Gram route
    modes = _x_orthonormalize(modes, h)
    idx = np.argmax(np.abs(modes), axis=0)
    signs = np.sign(modes[idx, np.arange(n_modes)])
    signs[signs == 0] = 1.0
    return Basis(modes * signs, np.sqrt(lam), float(energy_tol), h)


def _x_orthonormalize(modes: np.ndarray, h: float) -> np.ndarray:
    q, r = np.linalg.qr(np.sqrt(h) * modes)
    q = q * np.sign(np.diag(r))
    return q / np.sqrt(h)


def project(basis: Basis, state: np.ndarray) -> np.ndarray:
    """Coefficients a_i = <phi_i, w>_X; accepts a state or a (2N x m) matrix."""
    return basis.h * (basis.modes.T @ np.asarray(state, dtype=float))


def reconstruct(basis: Basis, coeffs: np.ndarray) -> np.ndarray:
    return basis.modes @ np.asarray(coeffs, dtype=float)


def projection_error(basis: Basis, states: np.ndarray) -> np.ndarray:
    """X-norm of w - Pi w, column-wise for matrices."""
    states = np.asarray(states, dtype=float)
    r = states - reconstruct(basis, project(basis, states))
    return np.sqrt(basis.h * np.sum(r * r, axis=0))
