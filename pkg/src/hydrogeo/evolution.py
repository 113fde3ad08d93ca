"""Numerical evolution of the hydrodynamic-type system in y.

    a_y     = 2 a^{1/2} (Σ b_m)_x + a^{-1/2} a_x Σ b_m
    (b_k)_y = a^{-1/2} b_k (b_k)_x - (1 + b_k²) (a^{-1/2})_x

and of its diagonal form ``r^i_y = μ_i(r) r^i_x``.  Periodic domains only.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .fields import ScalarField1D, diff_axis, partial1d
from .geodesics import drift
from .riemann import HydroSnapshot, moments, riemann_from_state, stack_series, n2_state_from_invariants

log = logging.getLogger(__name__)

__all__ = [
    "EvolutionConfig",
    "ConservationReport",
    "EvolutionResult",
    "DiagonalResult",
    "rhs_uno",
    "quasilinear_rhs",
    "evolve_uno",
    "evolve_diagonal",
    "n2_closure",
    "moment_chain_residual",
    "conservation_report",
]

SCHEMES = ("lax_friedrichs", "lax_wendroff", "upwind_diagonal")


@dataclass(frozen=True)
class EvolutionConfig:
    y_end: float
    scheme: str = "lax_friedrichs"
    cfl: float = 0.4
    output_every: int = 1
    dissipation: float = 0.0
    output_dy: float | None = None
    shock_factor: float = 50.0
    moment_order: int = 2

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if not 0.0 < self.cfl < 1.0:
            raise ValueError(f"cfl must lie in (0, 1), got {self.cfl}")
        if not self.y_end > 0:
            raise ValueError("y_end must be positive")
        if self.output_every < 1:
            raise ValueError("output_every must be >= 1")
        if self.dissipation < 0:
            raise ValueError("dissipation must be >= 0")
        if self.output_dy is not None and not self.output_dy > 0:
            raise ValueError("output_dy must be positive")


def rhs_uno(snapshot: HydroSnapshot):
    """y-derivatives ``(ȧ, [ḃ_1..ḃ_{N-1}])`` with literal field derivatives."""
    a = snapshot.a
    S = ScalarField1D.like(a, sum(bm.values for bm in snapshot.b))
    ia = ScalarField1D.like(a, a.values ** -0.5)
    a_x = partial1d(a).values
    S_x = partial1d(S).values
    ia_x = partial1d(ia).values
    adot = 2.0 * np.sqrt(a.values) * S_x + ia.values * a_x * S.values
    bdot = [ia.values * bm.values * partial1d(bm).values - (1.0 + bm.values ** 2) * ia_x
            for bm in snapshot.b]
    return adot, bdot


def quasilinear_rhs(u: np.ndarray, ux: np.ndarray) -> np.ndarray:
    """``A(u) u_x`` for ``u = (a, b_1, ..)`` stacked along axis 0 (chain-rule form)."""
    a = u[0]
    b = u[1:]
    ia = a ** -0.5
    out = np.empty_like(u)
    out[0] = ia * b.sum(axis=0) * ux[0] + 2.0 * np.sqrt(a) * ux[1:].sum(axis=0)
    out[1:] = ia * b * ux[1:] + 0.5 * (1.0 + b * b) * ia ** 3 * ux[0]
    return out


def _max_speed(u: np.ndarray) -> float:
    return float(np.max(np.abs(riemann_from_state(u[0], u[1:]).mu)))


def _step_lf(u, dy, dx, eps):
    up, um = np.roll(u, -1, axis=1), np.roll(u, 1, axis=1)
    return 0.5 * (up + um) + dy * quasilinear_rhs(u, (up - um) / (2.0 * dx))


def _step_lw(u, dy, dx, eps):
    # Richtmyer two-step form for the non-conservative system
    up = np.roll(u, -1, axis=1)
    mid = 0.5 * (u + up)
    half = mid + 0.5 * dy * quasilinear_rhs(mid, (up - u) / dx)
    half_m = np.roll(half, 1, axis=1)
    new = u + dy * quasilinear_rhs(0.5 * (half + half_m), (half - half_m) / dx)
    if eps:
        d4 = (np.roll(u, -2, 1) - 4 * np.roll(u, -1, 1) + 6 * u - 4 * np.roll(u, 1, 1) + np.roll(u, 2, 1))
        new = new - eps * d4
    return new


@dataclass
class ConservationReport:
    y: list
    mass: list
    second_density: list
    flux_residual_1: list
    flux_residual_2: list
    moment_chain: dict = field(default_factory=dict)

    @property
    def mass_drift(self) -> float:
        return drift(self.mass)

    @property
    def second_density_drift(self) -> float:
        return drift(self.second_density)

    def to_json(self) -> dict:
        return {
            "y": [float(v) for v in self.y],
            "mass": [float(v) for v in self.mass],
            "second_density": [float(v) for v in self.second_density],
            "flux_residual_1": [float(v) for v in self.flux_residual_1],
            "flux_residual_2": [float(v) for v in self.flux_residual_2],
            "moment_chain": {str(k): [float(v) for v in vals] for k, vals in self.moment_chain.items()},
            "mass_drift": self.mass_drift,
            "second_density_drift": self.second_density_drift,
        }


@dataclass
class EvolutionResult:
    snapshots: list
    report: ConservationReport
    halted: bool = False
    reason: str | None = None
    steps: int = 0


def _output_plan(y_end, dy0, cfg: EvolutionConfig):
    target = cfg.output_dy if cfg.output_dy is not None else cfg.output_every * dy0
    n_out = max(1, math.ceil(y_end / target - 1e-9))
    return n_out, y_end / n_out


def _second_density(s: HydroSnapshot) -> np.ndarray:
    return sum(bm.values for bm in s.b) * s.a.values ** 1.5


def moment_chain_residual(series: Sequence[HydroSnapshot], K: int = 2) -> dict:
    """Max-norm (over x) per snapshot of the moment-chain residuals, k = 0..K.

    ``B^0_y = a^{-1/2} B^1_x - (N-1 + 2 B^1)(a^{-1/2})_x`` and, for k >= 1,
    ``B^k_y = a^{-1/2} B^{k+1}_x - (k B^{k-1} + (k+2) B^{k+1})(a^{-1/2})_x``,
    both identities on solutions of the system.
    """
    N = series[0].N
    B = [stack_series(series, lambda s, k=k: moments(s.b_values, k)[k]) for k in range(K + 2)]
    ia = stack_series(series, lambda s: s.a.values ** -0.5)
    g = ia.grid
    dx = lambda f: diff_axis(f.values, g.dx, 0, g.periodic_x)
    dy = lambda f: diff_axis(f.values, g.dy, 1, False)
    ia_x = dx(ia)
    out = {}
    for k in range(K + 1):
        lower = (N - 1) if k == 0 else k * B[k - 1].values
        res = dy(B[k]) - ia.values * dx(B[k + 1]) + (lower + (k + 2) * B[k + 1].values) * ia_x
        out[k] = np.max(np.abs(res), axis=0)
    return out


def conservation_report(series: Sequence[HydroSnapshot], K: int = 2) -> ConservationReport:
    y = [s.y for s in series]
    mass = [s.a.integral() for s in series]
    second = [ScalarField1D.like(s.a, _second_density(s)).integral() for s in series]
    if len(series) < 4:
        return ConservationReport(y, mass, second, [], [], {})
    N = series[0].N
    dens1 = stack_series(series, lambda s: s.a.values)
    flux1 = stack_series(series, lambda s: 2.0 * np.sqrt(s.a.values) * sum(bm.values for bm in s.b))
    dens2 = stack_series(series, _second_density)

    def flux2_fn(s):
        B0, B1 = moments(s.b_values, 1)
        return s.a.values * (1.5 * B0 ** 2 + B1 + 0.5 * (N - 1))

    flux2 = stack_series(series, flux2_fn)
    g = dens1.grid
    r1 = diff_axis(dens1.values, g.dy, 1, False) - diff_axis(flux1.values, g.dx, 0, g.periodic_x)
    r2 = diff_axis(dens2.values, g.dy, 1, False) - diff_axis(flux2.values, g.dx, 0, g.periodic_x)
    chain = moment_chain_residual(series, K)
    return ConservationReport(y, mass, second, np.max(np.abs(r1), axis=0).tolist(),
                              np.max(np.abs(r2), axis=0).tolist(),
                              {k: v.tolist() for k, v in chain.items()})


def _pack(s: HydroSnapshot) -> np.ndarray:
    return np.vstack([s.a.values[None, :], s.b_values])


def evolve_uno(initial: HydroSnapshot, cfg: EvolutionConfig) -> EvolutionResult:
    """Step the system from ``initial`` to ``y = initial.y + cfg.y_end``.

    Outputs are equally spaced in y; within each output interval the step is
    the largest equal subdivision satisfying ``dy <= cfl dx / max|μ|``.  The
    run halts (keeping the last good state) on non-finite values, ``a <= 0``
    or when ``max|b_x|`` exceeds ``shock_factor`` times its initial value.
    """
    if not initial.a.periodic:
        raise ValueError("evolution requires a periodic grid")
    if cfg.scheme == "upwind_diagonal":
        return _evolve_uno_via_diagonal(initial, cfg)
    step = {"lax_friedrichs": _step_lf, "lax_wendroff": _step_lw}[cfg.scheme]
    dx = initial.a.dx
    u = _pack(initial)
    y0 = initial.y
    grad0 = float(np.max(np.abs(diff_axis(u[1:], dx, 1, True))))
    speed = _max_speed(u)
    dy0 = cfg.cfl * dx / speed if speed > 0 else cfg.y_end
    n_out, dy_out = _output_plan(cfg.y_end, dy0, cfg)
    snaps = [initial]
    halted, reason, steps = False, None, 0
    for j in range(1, n_out + 1):
        speed = _max_speed(u)
        n_sub = max(1, math.ceil(dy_out * speed / (cfg.cfl * dx) - 1e-12)) if speed > 0 else 1
        h = dy_out / n_sub
        trial = u
        for _ in range(n_sub):
            trial = step(trial, h, dx, cfg.dissipation)
            steps += 1
            if not np.all(np.isfinite(trial)):
                reason = "non-finite values"
            elif np.any(trial[0] <= 0.0):
                reason = "a lost positivity"
            elif grad0 > 0 and np.max(np.abs(diff_axis(trial[1:], dx, 1, True))) > cfg.shock_factor * grad0:
                reason = "gradient catastrophe"
            if reason:
                break
        if reason:
            halted = True
            log.warning("evolution halted at y~%.6g: %s", y0 + (j - 1) * dy_out, reason)
            break
        u = trial
        snaps.append(initial.replace(u[0], u[1:], y0 + j * dy_out))
    return EvolutionResult(snaps, conservation_report(snaps, cfg.moment_order), halted, reason, steps)


@dataclass
class DiagonalResult:
    y: np.ndarray
    r: np.ndarray  # (n_out, N, nx)
    dx: float
    halted: bool = False
    reason: str | None = None


def n2_closure(r: np.ndarray) -> np.ndarray:
    """Velocities of the two-component system: ``μ_1 = -2 r_2``, ``μ_2 = -2 r_1``."""
    return np.stack([-2.0 * r[1], -2.0 * r[0]])


def evolve_diagonal(r_initial, velocity_closure: Callable[[np.ndarray], np.ndarray],
                    cfg: EvolutionConfig, dx: float, y0: float = 0.0) -> DiagonalResult:
    """First-order upwind for ``r^i_y = μ_i(r) r^i_x`` on a periodic grid.

    ``r_initial`` is an ``(N, nx)`` array or a sequence of 1-D fields.
    Information travels against the sign of ``μ_i``, so positive velocities
    use the forward difference.
    """
    r = np.array([getattr(ri, "values", ri) for ri in r_initial], dtype=float)
    mu = velocity_closure(r)
    speed = float(np.max(np.abs(mu)))
    dy0 = cfg.cfl * dx / speed if speed > 0 else cfg.y_end
    n_out, dy_out = _output_plan(cfg.y_end, dy0, cfg)
    ys, out = [y0], [r.copy()]
    halted, reason = False, None
    for j in range(1, n_out + 1):
        speed = float(np.max(np.abs(velocity_closure(r))))
        n_sub = max(1, math.ceil(dy_out * speed / (cfg.cfl * dx) - 1e-12)) if speed > 0 else 1
        h = dy_out / n_sub
        for _ in range(n_sub):
            mu = velocity_closure(r)
            fwd = (np.roll(r, -1, axis=1) - r) / dx
            bwd = (r - np.roll(r, 1, axis=1)) / dx
            r = r + h * mu * np.where(mu > 0, fwd, bwd)
        if not np.all(np.isfinite(r)):
            halted, reason = True, "non-finite values"
            break
        ys.append(y0 + j * dy_out)
        out.append(r.copy())
    return DiagonalResult(np.array(ys), np.array(out), dx, halted, reason)


def _evolve_uno_via_diagonal(initial: HydroSnapshot, cfg: EvolutionConfig) -> EvolutionResult:
    if initial.N != 2:
        raise ValueError("scheme 'upwind_diagonal' for the (a, b) system needs an explicit closure; only N = 2 is built in")
    rd = riemann_from_state(initial.a.values, initial.b_values)
    res = evolve_diagonal(rd.r, n2_closure, cfg, initial.a.dx, initial.y)
    snaps = []
    for y, r in zip(res.y, res.r):
        a, b = n2_state_from_invariants(r[0], r[1])
        snaps.append(initial.replace(a, [b], float(y)))
    return EvolutionResult(snaps, conservation_report(snaps, cfg.moment_order), res.halted, res.reason)
