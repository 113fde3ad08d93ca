"""Hamilton's equations for ``H = ½p1² + g12 p1 p2 + ½p2²`` on gridded metrics.

Field coefficients are interpolated by bicubic splines (periodic axes are
padded by wrapping), so ``g12`` has a continuous gradient.  Integration is
classical fixed-step RK4.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .fields import Grid2D, ScalarField2D
from .momenta import HamiltonianForm, MomentaPolynomial

__all__ = [
    "DomainExit",
    "PhaseState",
    "FieldInterpolant",
    "InterpolatedHamiltonian",
    "InterpolatedPolynomial",
    "hamilton_rhs",
    "Trajectory",
    "integrate_geodesic",
    "drift",
]

_PAD = 4


class DomainExit(ValueError):
    """A phase point left the region covered by the interpolated fields."""


def drift(values: Sequence[float], floor: float = 1e-12) -> float:
    """``max_t |v(t) - v(0)| / max(|v(0)|, floor)``; absolute when ``v(0)`` is below ``floor``."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("empty series")
    dev = float(np.max(np.abs(v - v[0])))
    v0 = abs(float(v[0]))
    return dev / v0 if v0 > floor else dev


@dataclass(frozen=True)
class PhaseState:
    x1: float
    x2: float
    p1: float
    p2: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x1, self.x2, self.p1, self.p2], dtype=float)

    @classmethod
    def from_array(cls, v) -> "PhaseState":
        return cls(*(float(c) for c in v))


def _axis_nodes(n, h, x0, periodic):
    idx = np.arange(-_PAD, n + _PAD) if periodic else np.arange(n)
    return x0 + idx * h, idx % n


class FieldInterpolant:
    """Bicubic spline of a gridded field, or a constant."""

    def __init__(self, source):
        if isinstance(source, ScalarField2D):
            g = source.grid
            self.grid: Grid2D | None = g
            n1, i1 = _axis_nodes(g.nx, g.dx, g.x0, g.periodic_x)
            n2, i2 = _axis_nodes(g.ny, g.dy, g.y0, g.periodic_y)
            vals = source.values[np.ix_(i1, i2)]
            self._spline = RectBivariateSpline(n1, n2, vals, kx=3, ky=3, s=0)
            self.const = None
        else:
            self.grid = None
            self._spline = None
            self.const = float(source)

    def _wrap(self, x1, x2):
        g = self.grid
        if g.periodic_x:
            x1 = g.x0 + (x1 - g.x0) % (g.nx * g.dx)
        elif not g.x0 <= x1 <= g.x0 + (g.nx - 1) * g.dx:
            raise DomainExit(f"x1 = {x1:.6g} outside [{g.x0:.6g}, {g.x0 + (g.nx - 1) * g.dx:.6g}]")
        if g.periodic_y:
            x2 = g.y0 + (x2 - g.y0) % (g.ny * g.dy)
        elif not g.y0 <= x2 <= g.y0 + (g.ny - 1) * g.dy:
            raise DomainExit(f"x2 = {x2:.6g} outside [{g.y0:.6g}, {g.y0 + (g.ny - 1) * g.dy:.6g}]")
        return x1, x2

    def __call__(self, x1: float, x2: float) -> float:
        if self.const is not None:
            return self.const
        x1, x2 = self._wrap(x1, x2)
        return float(self._spline(x1, x2, grid=False))

    def with_gradient(self, x1: float, x2: float) -> tuple[float, float, float]:
        if self.const is not None:
            return self.const, 0.0, 0.0
        x1, x2 = self._wrap(x1, x2)
        s = self._spline
        return (float(s(x1, x2, grid=False)), float(s(x1, x2, dx=1, grid=False)),
                float(s(x1, x2, dy=1, grid=False)))


class InterpolatedHamiltonian:
    def __init__(self, H: HamiltonianForm):
        H.check_riemannian()
        self.form = H
        self.g = FieldInterpolant(H.g12)

    def value(self, s) -> float:
        x1, x2, p1, p2 = s
        g = self.g(x1, x2)
        return 0.5 * p1 * p1 + g * p1 * p2 + 0.5 * p2 * p2


class InterpolatedPolynomial:
    def __init__(self, f: MomentaPolynomial):
        self.poly = f
        self.coeffs = [FieldInterpolant(c) for c in f.coeffs]

    def value(self, s) -> float:
        x1, x2, p1, p2 = s
        N = self.poly.degree
        return float(sum(c(x1, x2) * p1 ** (N - m) * p2 ** m for m, c in enumerate(self.coeffs)))


def _as_interp_h(H):
    return H if isinstance(H, InterpolatedHamiltonian) else InterpolatedHamiltonian(H)


def hamilton_rhs(H, s) -> np.ndarray:
    """``(ẋ1, ẋ2, ṗ1, ṗ2) = (p1 + g p2, g p1 + p2, -g_x1 p1 p2, -g_x2 p1 p2)``."""
    H = _as_interp_h(H)
    x1, x2, p1, p2 = s.as_array() if isinstance(s, PhaseState) else s
    g, g1, g2 = H.g.with_gradient(x1, x2)
    pp = p1 * p2
    return np.array([p1 + g * p2, g * p1 + p2, -g1 * pp, -g2 * pp])


@dataclass(eq=False)
class Trajectory:
    t: np.ndarray
    states: np.ndarray  # (n, 4): x1, x2, p1, p2
    H: np.ndarray
    f: np.ndarray
    exited: bool = False
    exit_reason: str | None = None
    report: dict = field(default_factory=dict)

    def rows(self):
        """Tidy rows ``(t, x1, x2, p1, p2, H, f)``."""
        return np.column_stack([self.t, self.states, self.H, self.f])


def integrate_geodesic(H, f: MomentaPolynomial | InterpolatedPolynomial | None, s0, t_end: float,
                       dt: float, record_every: int = 1) -> Trajectory:
    """Classical RK4 with fixed step ``dt`` (negative ``dt`` integrates backwards).

    Leaving the field domain truncates the trajectory at the last complete
    step and sets ``exited``; an initial state outside raises ``DomainExit``.  The report holds the relative drifts of H
    and f over the recorded points.
    """
    if dt == 0 or t_end * dt < 0:
        raise ValueError("dt must be nonzero and point towards t_end")
    H = _as_interp_h(H)
    fi = None if f is None else (f if isinstance(f, InterpolatedPolynomial) else InterpolatedPolynomial(f))
    s = s0.as_array() if isinstance(s0, PhaseState) else np.asarray(s0, dtype=float)
    n = int(round(t_end / dt))
    ts, states = [0.0], [s.copy()]
    exited, reason = False, None
    try:
        H.value(s)
        if fi is not None:
            fi.value(s)
    except DomainExit as exc:
        raise DomainExit(f"initial state outside the field domain: {exc}") from exc
    try:
        for i in range(1, n + 1):
            k1 = hamilton_rhs(H, s)
            k2 = hamilton_rhs(H, s + 0.5 * dt * k1)
            k3 = hamilton_rhs(H, s + 0.5 * dt * k2)
            k4 = hamilton_rhs(H, s + dt * k3)
            s = s + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            H.g(s[0], s[1])
            if i % record_every == 0 or i == n:
                ts.append(i * dt)
                states.append(s.copy())
    except DomainExit as exc:
        exited, reason = True, str(exc)
    st = np.array(states)
    Hs = np.array([H.value(v) for v in st])
    fs = np.array([fi.value(v) for v in st]) if fi is not None else np.full(len(st), np.nan)
    report = {"H_drift": drift(Hs), "f_drift": drift(fs) if fi is not None else None,
              "t_reached": float(ts[-1]), "steps": len(ts) - 1, "exited": exited}
    return Trajectory(np.array(ts), st, Hs, fs, exited, reason, report)
