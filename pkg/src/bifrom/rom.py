"""Galerkin reduced operators and the reduced nonlinear solver.

The reduced system for coefficients ``a`` of length L reads

    r(a) = (mu2 A_diff + mu1 A_react + A_decay) a + T(a, a) = 0,

with T the symmetrized trilinear tensor of the quadratic term. Assembling T
costs O(L^3 N), which dominates the offline stage.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .fom import DiscreteOperators
from .pod import Basis, reconstruct

# rough multiply counts per assembly stage, for cost scaling checks
OP_COUNTS: Counter = Counter()

NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 50
MAX_HALVINGS = 30


@dataclass(frozen=True)
class ReducedOperators:
    a_diff: np.ndarray
    a_react: np.ndarray
    a_decay: np.ndarray
    tensor: np.ndarray
    basis: Basis

    @property
    def size(self) -> int:
        return self.a_diff.shape[0]

    def linear(self, params) -> np.ndarray:
        mu1, mu2 = params
        return mu2 * self.a_diff + mu1 * self.a_react + self.a_decay


@dataclass
class RomSolution:
    coeffs: np.ndarray
    converged: bool
    newton_iters: int
    residual_norm: float
    status: str = "converged"


def assemble_reduced(basis: Basis, ops: DiscreteOperators) -> ReducedOperators:
    phi, h, n = basis.modes, basis.h, ops.n
    size, dim = phi.shape[1], phi.shape[0]
    u, v = phi[:n], phi[n:]
    a_diff = h * (u.T @ (ops.laplacian @ u) + v.T @ (ops.laplacian @ v))
    a_diff = 0.5 * (a_diff + a_diff.T)
    a_react = h * (u.T @ u)
    a_decay = -h * (v.T @ v)
    OP_COUNTS["matrices"] += 3 * size * size * dim

    # <phi_i, N_sym(phi_j, phi_k)> with N_sym_u = -(u_j v_k + u_k v_j)/2, N_sym_v = u_j u_k
    uuv = np.einsum("ni,nj,nk->ijk", u, u, v, optimize=True)
    tensor = h * (-0.5 * (uuv + uuv.transpose(0, 2, 1)) + np.einsum("ni,nj,nk->ijk", v, u, u, optimize=True))
    OP_COUNTS["tensor"] += 2 * size**3 * n
    return ReducedOperators(a_diff, a_react, a_decay, tensor, basis)


def quadratic_term(ops: ReducedOperators, a: np.ndarray) -> np.ndarray:
    return np.einsum("ijk,j,k->i", ops.tensor, a, a)


def reduced_residual(ops: ReducedOperators, params, a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    return ops.linear(params) @ a + quadratic_term(ops, a)


def reduced_jacobian(ops: ReducedOperators, params, a: np.ndarray) -> np.ndarray:
    # T is symmetric in its last two indices, so dT(a,a)/da = 2 T(., ., a)
    return ops.linear(params) + 2.0 * np.einsum("ijk,k->ij", ops.tensor, a)


def rom_solve(
    ops: ReducedOperators,
    params,
    a0: np.ndarray,
    *,
    method: str = "newton",
    tol: float = NEWTON_TOL,
    max_iter: int = NEWTON_MAX_ITER,
) -> RomSolution:
    """Solve r(a) = 0 from ``a0``.

    ``method="newton"`` uses the exact reduced Jacobian with step halving.
    ``method="fixed_point"`` freezes the Jacobian at ``a0`` (chord iteration)
    and needs many more, cheaper iterations. Failures are reported through
    ``converged``/``status`` rather than raised.
    """
    if method not in ("newton", "fixed_point"):
        raise ValueError(f"unknown method {method!r}")
    a = np.array(a0, dtype=float)
    if a.shape != (ops.size,):
        raise ValueError(f"initial coefficients must have length {ops.size}")
    if method == "fixed_point":
        max_iter = max(max_iter, 20 * NEWTON_MAX_ITER)
    r = reduced_residual(ops, params, a)
    rnorm = float(np.linalg.norm(r))
    frozen = None
    for it in range(max_iter + 1):
        if rnorm < tol:
            return RomSolution(a, True, it, rnorm)
        if not np.isfinite(rnorm):
            return RomSolution(a, False, it, rnorm, "non-finite")
        if it == max_iter:
            break
        if method == "newton":
            jac = reduced_jacobian(ops, params, a)
        else:
            if frozen is None:
                frozen = reduced_jacobian(ops, params, a)
            jac = frozen
        try:
            da = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError:
            return RomSolution(a, False, it, rnorm, "singular-jacobian")
        step = 1.0
        for _ in range(MAX_HALVINGS):
            trial = a + step * da
            r_trial = reduced_residual(ops, params, trial)
            n_trial = float(np.linalg.norm(r_trial))
            if n_trial < rnorm:
                break
            step *= 0.5
        a, r, rnorm = trial, r_trial, n_trial
    return RomSolution(a, False, max_iter, rnorm, "max-iter")


def lift(ops: ReducedOperators, solution: RomSolution | np.ndarray) -> np.ndarray:
    coeffs = solution.coeffs if isinstance(solution, RomSolution) else solution
    return reconstruct(ops.basis, coeffs)
