"""Desk-scale full-order model.

A 1D two-field reaction-diffusion system on (0, 1) with homogeneous
Dirichlet conditions,

    u_t = mu2 u_xx + mu1 u - u v
    v_t = mu2 v_xx - v + u^2

discretized by second-order finite differences on ``n_interior`` nodes per
field. The state is stacked as ``w = (u, v)`` of length ``2 N``. The
nonlinearity is purely quadratic and the system is equivariant under
``(u, v) -> (-u, v)``, so the trivial state loses stability through a
supercritical pitchfork at ``mu1 = mu2 * lambda_1``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numba import njit

from .errors import ConfigError, NoConvergenceError, NonFiniteError

log = logging.getLogger(__name__)

# incremented by every call to residual(); POD-NN evaluation must not touch it
RESIDUAL_CALLS = 0


class ParameterPoint(NamedTuple):
    mu1: float
    mu2: float


@dataclass(frozen=True)
class FomConfig:
    n_interior: int = 63
    mu1_range: tuple[float, float] = (0.5, 2.0)
    mu2_range: tuple[float, float] = (0.06, 0.15)
    dt: float = 0.05
    tol: float = 1e-9
    max_steps: int = 200_000
    bias_amplitude: float = 0.1
    newton_tol: float = 1e-12
    newton_max_iter: int = 50

    def __post_init__(self):
        if self.n_interior < 3:
            raise ConfigError(f"n_interior must be >= 3, got {self.n_interior}")
        if not self.dt > 0 or not self.tol > 0:
            raise ConfigError("dt and tol must be positive")
        if self.max_steps < 1 or self.newton_max_iter < 1:
            raise ConfigError("step budgets must be positive")
        for name in ("mu1_range", "mu2_range"):
            lo, hi = getattr(self, name)
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise ConfigError(f"{name} must be a finite non-degenerate interval")
            object.__setattr__(self, name, (float(lo), float(hi)))

    @property
    def h(self) -> float:
        return 1.0 / (self.n_interior + 1)

    @property
    def n_state(self) -> int:
        return 2 * self.n_interior

    @property
    def x(self) -> np.ndarray:
        return self.h * np.arange(1, self.n_interior + 1)

    @property
    def box(self) -> np.ndarray:
        return np.array([self.mu1_range, self.mu2_range])

    def normalize(self, mu) -> np.ndarray:
        """Affine map of the parameter box onto [0, 1]^2 (works row-wise)."""
        box = self.box
        return (np.asarray(mu, dtype=float) - box[:, 0]) / (box[:, 1] - box[:, 0])

    def check_params(self, mu) -> ParameterPoint:
        mu1, mu2 = (float(m) for m in mu)
        (a1, b1), (a2, b2) = self.mu1_range, self.mu2_range
        if not (np.isfinite(mu1) and np.isfinite(mu2)):
            raise ConfigError(f"non-finite parameter {mu!r}")
        if not (a1 <= mu1 <= b1 and a2 <= mu2 <= b2):
            raise ConfigError(f"parameter {mu!r} outside the box {self.box.tolist()}")
        return ParameterPoint(mu1, mu2)


@dataclass(frozen=True)
class DiscreteOperators:
    """Laplacian, field masks and the quadratic form of the discrete system."""

    laplacian: np.ndarray
    mask_u: np.ndarray
    mask_v: np.ndarray
    h: float

    @property
    def n(self) -> int:
        return self.laplacian.shape[0]

    def quadratic(self, wa: np.ndarray, wb: np.ndarray) -> np.ndarray:
        """N(w_a, w_b) = (-u_a v_b, u_a u_b); works along the last axis."""
        n = self.n
        ua, ub, vb = wa[..., :n], wb[..., :n], wb[..., n:]
        return np.concatenate([-ua * vb, ua * ub], axis=-1)

    def laplacian_blocks(self, w: np.ndarray) -> np.ndarray:
        """blkdiag(D_h, D_h) applied along the last axis."""
        n = self.n
        d = self.laplacian
        return np.concatenate([w[..., :n] @ d, w[..., n:] @ d], axis=-1)


def assemble_operators(cfg: FomConfig) -> DiscreteOperators:
    n, h = cfg.n_interior, cfg.h
    d = (np.diag(np.full(n, -2.0)) + np.diag(np.ones(n - 1), 1) + np.diag(np.ones(n - 1), -1)) / h**2
    mask_u = np.r_[np.ones(n), np.zeros(n)]
    return DiscreteOperators(d, mask_u, 1.0 - mask_u, h)


def x_norm(w: np.ndarray, h: float) -> np.ndarray:
    """Discrete L2 norm sqrt(h * sum w^2) along the last axis."""
    return np.sqrt(h * np.sum(np.square(w), axis=-1))


def residual(cfg: FomConfig, ops: DiscreteOperators, params, w: np.ndarray) -> np.ndarray:
    global RESIDUAL_CALLS
    RESIDUAL_CALLS += 1
    mu1, mu2 = params
    w = np.asarray(w, dtype=float)
    if w.shape[-1] != cfg.n_state:
        raise ValueError(f"state length {w.shape[-1]} != {cfg.n_state}")
    return mu2 * ops.laplacian_blocks(w) + mu1 * ops.mask_u * w - ops.mask_v * w + ops.quadratic(w, w)


def jacobian(cfg: FomConfig, ops: DiscreteOperators, params, w: np.ndarray) -> np.ndarray:
    mu1, mu2 = params
    n = cfg.n_interior
    u, v = w[:n], w[n:]
    eye = np.eye(n)
    jac = np.empty((2 * n, 2 * n))
    jac[:n, :n] = mu2 * ops.laplacian + mu1 * eye - np.diag(v)
    jac[:n, n:] = -np.diag(u)
    jac[n:, :n] = 2.0 * np.diag(u)
    jac[n:, n:] = mu2 * ops.laplacian - eye
    return jac


@dataclass
class SteadySolution:
    params: ParameterPoint
    state: np.ndarray
    steps_taken: int
    converged: bool
    final_increment: float


def bias_guess(cfg: FomConfig, amplitude: float | None = None) -> np.ndarray:
    """u0 = a sin(pi x), v0 = 0; selects the nonnegative branch for a > 0."""
    a = cfg.bias_amplitude if amplitude is None else amplitude
    return np.r_[a * np.sin(np.pi * cfg.x), np.zeros(cfg.n_interior)]


@njit(cache=True)
def _thomas_factors(diag, off, n):
    # LU sweep of the constant symmetric tridiagonal (off, diag, off)
    cp = np.empty(n)
    denom = np.empty(n)
    denom[0] = diag
    cp[0] = off / diag
    for i in range(1, n):
        denom[i] = diag - off * cp[i - 1]
        cp[i] = off / denom[i]
    return cp, denom


@njit(cache=True)
def _thomas_solve(cp, denom, off, rhs, out):
    n = rhs.shape[0]
    out[0] = rhs[0] / denom[0]
    for i in range(1, n):
        out[i] = (rhs[i] - off * out[i - 1]) / denom[i]
    for i in range(n - 2, -1, -1):
        out[i] -= cp[i] * out[i + 1]


@njit(cache=True)
def _march_point(mu1, mu2, w0, n, h, dt, tol, max_steps):
    """Semi-implicit march for one parameter point.

    Diffusion and the -v decay are implicit, the mu1 u and quadratic terms
    explicit. Returns (state, steps, final_increment, status) with status
    0 converged, 1 budget exhausted, 2 non-finite.
    """
    off = -dt * mu2 / (h * h)
    cpu, du = _thomas_factors(1.0 + 2.0 * dt * mu2 / (h * h), off, n)
    cpv, dv = _thomas_factors(1.0 + dt + 2.0 * dt * mu2 / (h * h), off, n)
    u = w0[:n].copy()
    v = w0[n:].copy()
    ru = np.empty(n)
    rv = np.empty(n)
    un = np.empty(n)
    vn = np.empty(n)
    rel = np.inf
    for step in range(1, max_steps + 1):
        for i in range(n):
            ru[i] = u[i] + dt * (mu1 * u[i] - u[i] * v[i])
            rv[i] = v[i] + dt * u[i] * u[i]
        _thomas_solve(cpu, du, off, ru, un)
        _thomas_solve(cpv, dv, off, rv, vn)
        nrm = 0.0
        inc = 0.0
        for i in range(n):
            nrm += un[i] * un[i] + vn[i] * vn[i]
            inc += (un[i] - u[i]) ** 2 + (vn[i] - v[i]) ** 2
            u[i] = un[i]
            v[i] = vn[i]
        nrm = np.sqrt(h * nrm)
        inc = np.sqrt(h * inc)
        if not np.isfinite(nrm):
            return np.concatenate((u, v)), step, np.inf, 2
        rel = inc if nrm < 1e-14 else inc / nrm
        if rel < tol:
            return np.concatenate((u, v)), step, rel, 0
    return np.concatenate((u, v)), max_steps, rel, 1


def _march(cfg: FomConfig, params: np.ndarray, w0: np.ndarray):
    params = np.atleast_2d(np.asarray(params, dtype=float))
    w0 = np.atleast_2d(np.asarray(w0, dtype=float))
    out = []
    for (mu1, mu2), w in zip(params, w0):
        state, steps, inc, status = _march_point(
            mu1, mu2, np.ascontiguousarray(w), cfg.n_interior, cfg.h, cfg.dt, cfg.tol, cfg.max_steps
        )
        if status == 2:
            raise NonFiniteError(f"state became non-finite at step {steps} for mu={(mu1, mu2)}; reduce dt")
        out.append((state, int(steps), status == 0, float(inc)))
    return out


def steady_solve(cfg: FomConfig, params, w0: np.ndarray) -> SteadySolution:
    """March to steady state; stop on ||w^n - w^{n-1}|| / ||w^n|| < tol."""
    mu = cfg.check_params(params)
    w0 = np.asarray(w0, dtype=float)
    if w0.shape != (cfg.n_state,) or not np.all(np.isfinite(w0)):
        raise ValueError("initial state must be finite with length 2 * n_interior")
    ((state, steps, conv, inc),) = _march(cfg, np.array([mu]), w0[None, :])
    return SteadySolution(mu, state, steps, conv, inc)


def steady_solve_batch(cfg: FomConfig, params, w0) -> list[SteadySolution]:
    mus = [cfg.check_params(p) for p in params]
    w0 = np.asarray(w0, dtype=float)
    if w0.ndim == 1:
        w0 = np.tile(w0, (len(mus), 1))
    return [SteadySolution(m, *res) for m, res in zip(mus, _march(cfg, np.array(mus, dtype=float), w0))]


def newton_solve(cfg: FomConfig, params, w0: np.ndarray, ops: DiscreteOperators | None = None) -> SteadySolution:
    """Damped Newton on the steady residual (independent oracle for steady_solve)."""
    mu = cfg.check_params(params)
    ops = ops or assemble_operators(cfg)
    h = cfg.h
    w = np.array(w0, dtype=float)
    r = residual(cfg, ops, mu, w)
    rnorm = float(x_norm(r, h))
    for it in range(cfg.newton_max_iter + 1):
        if rnorm < cfg.newton_tol:
            return SteadySolution(mu, w, it, True, rnorm)
        if it == cfg.newton_max_iter:
            break
        dw = np.linalg.solve(jacobian(cfg, ops, mu, w), -r)
        step = 1.0
        for _ in range(30):
            trial = w + step * dw
            r_trial = residual(cfg, ops, mu, trial)
            n_trial = float(x_norm(r_trial, h))
            if n_trial < rnorm:
                break
            step *= 0.5
        w, r, rnorm = trial, r_trial, n_trial
    raise NoConvergenceError(f"Newton did not converge at {tuple(mu)}: residual {rnorm:.3e}")


def critical_mu1(cfg: FomConfig, mu2: float) -> float:
    """Onset of the nonzero branch: mu2 times the smallest eigenvalue of -D_h."""
    h = cfg.h
    return mu2 * (2.0 / h**2) * (1.0 - np.cos(np.pi * h))


def probe(state: np.ndarray) -> float:
    """u at the node nearest x = 0.5."""
    state = np.asarray(state)
    n = state.shape[-1] // 2
    return float(state[..., (n + 1) // 2 - 1])


def parameter_grid(cfg: FomConfig, n1: int, n2: int) -> np.ndarray:
    """Uniform tensor grid, row-major with mu1 fastest; shape (n1 * n2, 2)."""
    m1 = np.linspace(*cfg.mu1_range, n1)
    m2 = np.linspace(*cfg.mu2_range, n2)
    g1, g2 = np.meshgrid(m1, m2)
    return np.column_stack([g1.ravel(), g2.ravel()])


@dataclass
class SnapshotSet:
    n1: int
    n2: int
    params: np.ndarray  # (Ns, 2)
    snapshots: np.ndarray  # (2N, Ns)
    steps: np.ndarray
    final_increments: np.ndarray
    seed: int = 0

    @property
    def count(self) -> int:
        return self.params.shape[0]

    @property
    def grid_shape(self) -> tuple[int, int]:
        return self.n1, self.n2


def generate_snapshots(cfg: FomConfig, n1: int, n2: int, seed: int = 0, *, amplitude: float | None = None) -> SnapshotSet:
    """Steady states on an n1 x n2 grid from the branch-biased initial guess.

    The march is deterministic; ``seed`` is carried as metadata only.
    """
    if n1 < 2 or n2 < 2:
        raise ConfigError("snapshot grid needs at least 2 points per axis")
    params = parameter_grid(cfg, n1, n2)
    sols = steady_solve_batch(cfg, params, bias_guess(cfg, amplitude))
    failed = [i for i, s in enumerate(sols) if not s.converged]
    if failed:
        i = failed[0]
        raise NoConvergenceError(
            f"steady march did not converge at grid index {i} (i1={i % n1}, i2={i // n1}), "
            f"mu={tuple(params[i])}, increment {sols[i].final_increment:.3e}"
        )
    log.info("generated %d snapshots, max steps %d", len(sols), max(s.steps_taken for s in sols))
    return SnapshotSet(
        n1,
        n2,
        params,
        np.column_stack([s.state for s in sols]),
        np.array([s.steps_taken for s in sols]),
        np.array([s.final_increment for s in sols]),
        seed,
    )
