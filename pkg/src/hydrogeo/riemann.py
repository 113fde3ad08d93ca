"""Riemann surface of the hydrodynamic system, branch points and invariants.

The surface is ``λ(q) = a^{-1/2} (1+q²)^{-N/2} Π_m (q - b_m)``.  Its critical
points ``q_1 < ... < q_N`` solve ``N q Π(q-b) = (1+q²) Π'(q)``; the critical
values are the Riemann invariants and ``a^{-1/2} q_k`` the characteristic
velocities.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import root

from .fields import FieldError, Grid2D, ScalarField1D, ScalarField2D, diff_axis

__all__ = [
    "HydroSnapshot",
    "RiemannData",
    "DegenerateBranchPoints",
    "lambda_eval",
    "lambda_q",
    "branch_polynomial",
    "branch_points",
    "riemann_from_state",
    "invariants_and_velocities",
    "state_from_invariants",
    "n2_state_from_invariants",
    "moments",
    "generating_density",
    "generating_density_inverse",
    "series_grid",
    "stack_series",
    "liouville_residual",
    "SemiHamiltonianReport",
    "semi_hamiltonian_residual",
    "sample_velocities",
]


class DegenerateBranchPoints(ArithmeticError):
    """Branch points are complex or collide."""


@dataclass(frozen=True, eq=False)
class HydroSnapshot:
    """State ``(a, b_1..b_{N-1})`` at evolution coordinate ``y``."""

    a: ScalarField1D
    b: tuple
    y: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "b", tuple(self.b))
        if len(self.b) < 1:
            raise ValueError("need at least one root field b_1 (N >= 2)")
        for bm in self.b:
            if not self.a.same_grid(bm):
                raise FieldError("a and b fields must share one grid")
        if np.any(self.a.values <= 0.0):
            i = int(np.argmin(self.a.values))
            raise ValueError(f"a must be positive; a[{i}] = {self.a.values[i]:.6g}")

    @property
    def N(self) -> int:
        return len(self.b) + 1

    @property
    def b_values(self) -> np.ndarray:
        return np.array([bm.values for bm in self.b])

    @classmethod
    def from_arrays(cls, a, b, dx, y=0.0, x0=0.0, periodic=True) -> "HydroSnapshot":
        a = np.asarray(a, dtype=float)
        nx = a.shape[0]
        return cls(ScalarField1D(nx, dx, a, x0, periodic),
                   tuple(ScalarField1D(nx, dx, np.asarray(bm, dtype=float), x0, periodic) for bm in b),
                   y)

    def replace(self, a_values, b_values, y) -> "HydroSnapshot":
        return HydroSnapshot(ScalarField1D.like(self.a, a_values),
                             tuple(ScalarField1D.like(self.a, bv) for bv in b_values), y)


@dataclass(frozen=True, eq=False)
class RiemannData:
    """Branch points ``q``, invariants ``r`` and velocities ``mu``; leading axis is the family index."""

    q: np.ndarray
    r: np.ndarray
    mu: np.ndarray


def lambda_eval(q, a, b):
    """``a^{-1/2} (1+q²)^{-N/2} Π_m (q - b_m)`` with N = len(b) + 1; broadcasts."""
    q = np.asarray(q, dtype=float)
    N = len(b) + 1
    prod = np.ones(np.broadcast(q, *[np.asarray(x) for x in b]).shape) if len(b) else 1.0
    for bm in b:
        prod = prod * (q - bm)
    return np.asarray(a, dtype=float) ** -0.5 * (1.0 + q * q) ** (-N / 2.0) * prod


def lambda_q(q, a, b):
    """Analytic ∂λ/∂q of :func:`lambda_eval`."""
    q = np.asarray(q, dtype=float)
    N = len(b) + 1
    prod = 1.0
    dprod = 0.0
    for bm in b:
        dprod = dprod * (q - bm) + prod
        prod = prod * (q - bm)
    return np.asarray(a, dtype=float) ** -0.5 * (1.0 + q * q) ** (-N / 2.0) * (
        dprod - N * q * prod / (1.0 + q * q))


def branch_polynomial(b_values: np.ndarray) -> np.ndarray:
    """Monic coefficients (highest first) of ``N q P(q) - (1+q²) P'(q)``, ``P = Π(q-b_m)``.

    ``b_values`` has shape ``(N-1, M)``; returns shape ``(M, N+1)``.
    """
    b = np.atleast_2d(np.asarray(b_values, dtype=float))
    n_roots, M = b.shape
    N = n_roots + 1
    P = np.ones((M, 1))
    for bm in b:
        P = np.concatenate([P, np.zeros((M, 1))], axis=1) - bm[:, None] * np.concatenate(
            [np.zeros((M, 1)), P], axis=1)
    deg = P.shape[1] - 1
    dP = P[:, :-1] * np.arange(deg, 0, -1)[None, :]
    out = np.zeros((M, N + 1))
    out[:, : deg + 1] += N * P  # N q P
    out[:, 2:] -= dP  # - P'
    out[:, : dP.shape[1]] -= dP  # - q² P'
    return out


def _roots_batched(coeffs: np.ndarray, tol: float, where=None) -> np.ndarray:
    M, n1 = coeffs.shape
    N = n1 - 1
    comp = np.zeros((M, N, N))
    comp[:, 0, :] = -coeffs[:, 1:] / coeffs[:, :1]
    if N > 1:
        comp[:, np.arange(1, N), np.arange(N - 1)] = 1.0
    ev = np.linalg.eigvals(comp)
    scale = np.maximum(1.0, np.abs(ev))
    bad = np.any(np.abs(ev.imag) > 1e-9 * scale, axis=1)
    q = np.sort(ev.real, axis=1)
    if N > 1:
        gaps = np.diff(q, axis=1) / np.maximum(1.0, np.abs(q[:, 1:]))
        bad |= np.any(gaps < tol, axis=1)
    if np.any(bad):
        i = int(np.argmax(bad))
        loc = where(i) if where else i
        raise DegenerateBranchPoints(f"degenerate branch points at {loc}: {ev[i]}")
    return q


def branch_points(b_values: Sequence[float], N: int | None = None, tol: float = 1e-10) -> np.ndarray:
    """Sorted branch points ``q_1 < ... < q_N`` for one set of roots ``b``."""
    b = np.asarray(b_values, dtype=float).reshape(-1)
    if N is not None and N != b.size + 1:
        raise ValueError(f"N={N} needs {N - 1} roots, got {b.size}")
    return _roots_batched(branch_polynomial(b[:, None]), tol)[0]


def riemann_from_state(a, b_values, tol: float = 1e-10, where=None) -> RiemannData:
    """Pointwise branch points, invariants and velocities for arrays ``a`` (M,), ``b`` (N-1, M)."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b_values, dtype=float)).reshape(-1, a.size)
    q = _roots_batched(branch_polynomial(b), tol, where).T  # (N, M)
    r = lambda_eval(q, a[None, :], [bm[None, :] for bm in b])
    mu = a[None, :] ** -0.5 * q
    return RiemannData(q, r, mu)


def invariants_and_velocities(snapshot: HydroSnapshot, tol: float = 1e-10) -> RiemannData:
    x = snapshot.a.x
    return riemann_from_state(snapshot.a.values, snapshot.b_values, tol,
                              where=lambda i: f"grid index {i} (x={x[i]:.6g}, y={snapshot.y:.6g})")


def n2_state_from_invariants(r1, r2):
    """Closed-form inverse for N = 2: ``a = -1/(4 r1 r2)``, ``b = -(r1 + r2) a^{1/2}``."""
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    a = -1.0 / (4.0 * r1 * r2)
    return a, -(r1 + r2) * np.sqrt(a)


def state_from_invariants(r: Sequence[float], guess: Sequence[float], tol: float = 1e-13) -> np.ndarray:
    """Solve ``r(a, b) = r`` for the state ``(a, b_1..b_{N-1})`` by Newton iteration from ``guess``."""
    r = np.asarray(r, dtype=float)
    guess = np.asarray(guess, dtype=float)

    def fun(u):
        if u[0] <= 0:
            return np.full_like(u, 1e3)
        return riemann_from_state(u[:1], u[1:, None]).r[:, 0] - r

    sol = root(fun, guess, method="hybr", options={"xtol": tol})
    if not sol.success or np.max(np.abs(fun(sol.x))) > 1e-11 * max(1.0, np.max(np.abs(r))):
        raise ArithmeticError(f"inverse map failed near r={r}: {sol.message}")
    return sol.x


def moments(b_values, K: int) -> list:
    """``B^k = 1/(k+1) Σ_m b_m^{k+1}`` for k = 0..K, summed over the N-1 roots."""
    b = [np.asarray(bm, dtype=float) for bm in b_values]
    out = []
    for k in range(K + 1):
        out.append(sum(bm ** (k + 1) for bm in b) / (k + 1) if b else 0.0)
    return out


def generating_density(q):
    """``p̃ = q / sqrt(1 + q²)``: a bijection from the real line onto (-1, 1).

    Returned in extended precision: near ``|p̃| = 1`` the inverse amplifies
    rounding of ``p̃`` by ``(1+q²)^{3/2}``, so a double ``p̃`` cannot carry
    ``q`` to full double accuracy once ``|q|`` exceeds about 5.
    """
    q = np.asarray(q, dtype=np.longdouble)
    return q / np.sqrt(1 + q * q)


def generating_density_inverse(p):
    """``q = p̃ / sqrt(1 - p̃²)`` evaluated without cancellation; returns float64."""
    p = np.asarray(p, dtype=np.longdouble)
    if np.any(np.abs(p) >= 1):
        raise ValueError("generating density must satisfy |p̃| < 1")
    return (p / np.sqrt((1 - p) * (1 + p))).astype(float)


def series_grid(series: Sequence[HydroSnapshot], rtol: float = 1e-9) -> Grid2D:
    """Grid of a snapshot series stacked along y (axis 2, non-periodic)."""
    if len(series) < 4:
        raise ValueError("need at least 4 snapshots to difference in y")
    ys = np.array([s.y for s in series])
    dys = np.diff(ys)
    dy = float(np.mean(dys))
    if dy <= 0 or np.max(np.abs(dys - dy)) > rtol * max(1.0, abs(dy)) + 1e-14:
        raise ValueError("snapshots must be equally spaced in y")
    a0 = series[0].a
    return Grid2D(a0.nx, len(series), a0.dx, dy, a0.x0, float(ys[0]), a0.periodic, False)


def stack_series(series: Sequence[HydroSnapshot], fn) -> ScalarField2D:
    """Stack ``fn(snapshot) -> (nx,) array`` over a series into an (x, y) field."""
    grid = series_grid(series)
    return ScalarField2D(grid, np.stack([np.asarray(fn(s), dtype=float) for s in series], axis=1))


def liouville_residual(series: Sequence[HydroSnapshot], q_sample: float) -> ScalarField2D:
    """``λ_y - a^{-1/2} q λ_x - (1+q²) λ_q (a^{-1/2})_x`` at fixed ``q`` over a series."""
    lam = stack_series(series, lambda s: lambda_eval(q_sample, s.a.values, list(s.b_values)))
    lam_q = stack_series(series, lambda s: lambda_q(q_sample, s.a.values, list(s.b_values)))
    ia = stack_series(series, lambda s: s.a.values ** -0.5)
    g = lam.grid
    lam_x = diff_axis(lam.values, g.dx, 0, g.periodic_x)
    lam_y = diff_axis(lam.values, g.dy, 1, False)
    ia_x = diff_axis(ia.values, g.dx, 0, g.periodic_x)
    res = lam_y - ia.values * q_sample * lam_x - (1.0 + q_sample ** 2) * lam_q.values * ia_x
    return ScalarField2D(g, res)


@dataclass(frozen=True)
class SemiHamiltonianReport:
    defect: float
    vacuous: bool = False


def semi_hamiltonian_residual(mu: np.ndarray, step: float) -> SemiHamiltonianReport:
    """Max defect of ``∂_j(∂_i μ_k/(μ_i-μ_k)) = ∂_i(∂_j μ_k/(μ_j-μ_k))`` over distinct i, j, k.

    ``mu`` has shape ``(N, n, ..., n)``: velocity ``μ_k`` sampled on an
    N-dimensional uniform grid in Riemann-invariant space with spacing
    ``step``.  Derivatives are central differences; the defect is measured
    on points at least two layers from the sampling box boundary.
    """
    mu = np.asarray(mu, dtype=float)
    N = mu.shape[0]
    if N < 3:
        return SemiHamiltonianReport(0.0, vacuous=True)
    if mu.ndim != N + 1 or min(mu.shape[1:]) < 5:
        raise ValueError("mu must have shape (N, n, ..., n) with n >= 5")
    for i in range(N):
        for k in range(i + 1, N):
            if np.min(np.abs(mu[i] - mu[k])) < 1e-12:
                raise ValueError(f"coincident velocities mu_{i + 1} and mu_{k + 1}")
    grad = [[np.gradient(mu[k], step, axis=i) for i in range(N)] for k in range(N)]
    inner = tuple(slice(2, -2) for _ in range(N))
    worst = 0.0
    for k in range(N):
        for i in range(N):
            for j in range(i + 1, N):
                if k in (i, j):
                    continue
                gik = grad[k][i] / (mu[i] - mu[k])
                gjk = grad[k][j] / (mu[j] - mu[k])
                d = np.gradient(gik, step, axis=j) - np.gradient(gjk, step, axis=i)
                worst = max(worst, float(np.max(np.abs(d[inner]))))
    return SemiHamiltonianReport(worst)


def sample_velocities(r0: Sequence[float], state0: Sequence[float], step: float, n: int = 5) -> np.ndarray:
    """Velocities ``μ(r)`` on an ``n^N`` grid centred at ``r0`` with spacing ``step``.

    Each grid point is mapped back to a state by Newton iteration, seeded
    from ``state0`` (a state whose invariants are ``r0``).
    """
    r0 = np.asarray(r0, dtype=float)
    N = r0.size
    offs = (np.arange(n) - (n - 1) / 2) * step
    mu = np.empty((N,) + (n,) * N)
    for idx in np.ndindex(*(n,) * N):
        r = r0 + offs[list(idx)]
        u = state_from_invariants(r, state0)
        mu[(slice(None),) + idx] = riemann_from_state(u[:1], u[1:, None]).mu[:, 0]
    return mu
