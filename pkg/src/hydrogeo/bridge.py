"""Reciprocal transformations between the (x1, x2) and semi-geodesic charts.

In the (x1, x2) chart the inverse metric has unit diagonal and off-diagonal
``g12``.  The closed 1-form ``dY = dx1/A - g12 dx2/A`` (``A = a_{N-1}``),
``dx = dx2`` gives semi-geodesic coordinates with ``ds² = dx² + A²/(1-g12²) dY²``.

Orientation: the evolution variable ``y`` of the hydrodynamic system runs
opposite to ``Y`` (``y = -Y``).  Functions that accept fields whose second
axis is a y-like coordinate take ``orientation``: ``EVOLUTION`` (-1) when the
axis is the evolution variable (snapshot series), ``CHART`` (+1) when it is
``Y`` itself.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.integrate import cumulative_trapezoid

from .fields import FieldError, Grid2D, ScalarField2D, partial
from .momenta import MomentaPolynomial, transform_from_semigeodesic
from .riemann import HydroSnapshot, series_grid, stack_series

log = logging.getLogger(__name__)

EVOLUTION = -1
CHART = 1

__all__ = [
    "EVOLUTION",
    "CHART",
    "Metric2D",
    "metric_chebyshev",
    "metric_semigeodesic",
    "ReciprocalResult",
    "reciprocal_forward",
    "Reconstruction",
    "reconstruct_from_solution",
    "PotentialResult",
    "x1_potential",
    "integral_coefficients",
    "ChebyshevChart",
    "resample_to_chebyshev",
    "hj_residual_chebyshev",
    "hj_residual_semigeodesic",
]


def _vals(f):
    return f.values if isinstance(f, ScalarField2D) else np.asarray(f, dtype=float)


def _first_bad(mask) -> tuple:
    return tuple(int(v) for v in np.argwhere(mask)[0])


@dataclass(frozen=True, eq=False)
class Metric2D:
    """Metric components of one chart.

    ``chebyshev``: lower ``g11, g12, g22`` and the inverse-metric function
    ``g12_up``.  ``semigeodesic``: ``G`` in ``ds² = dx² + G dy²``.
    """

    chart: str
    components: dict = field(default_factory=dict)

    def lower(self) -> np.ndarray:
        """Lower-index metric as an array of shape ``(..., 2, 2)``."""
        c = self.components
        if self.chart == "chebyshev":
            return np.stack([np.stack([c["g11"], c["g12"]], -1), np.stack([c["g12"], c["g22"]], -1)], -2)
        G = c["G"]
        one = np.ones_like(G)
        return np.stack([np.stack([one, 0 * G], -1), np.stack([0 * G, G], -1)], -2)

    def upper(self) -> np.ndarray:
        c = self.components
        if self.chart == "chebyshev":
            g = c["g12_up"]
            one = np.ones_like(g)
            return np.stack([np.stack([one, g], -1), np.stack([g, one], -1)], -2)
        G = c["G"]
        one = np.ones_like(G)
        return np.stack([np.stack([one, 0 * G], -1), np.stack([0 * G, 1.0 / G], -1)], -2)


def metric_chebyshev(g12) -> Metric2D:
    """``ds² = ((dx1)² - 2 g12 dx1 dx2 + (dx2)²) / (1 - g12²)``."""
    g = _vals(g12)
    bad = np.abs(g) >= 1.0
    if np.any(bad):
        raise ValueError(f"degenerate signature: |g12| >= 1 at grid point {_first_bad(np.atleast_1d(bad))}")
    w = 1.0 / (1.0 - g * g)
    return Metric2D("chebyshev", {"g11": w, "g22": w.copy(), "g12": -g * w, "g12_up": g})


def metric_semigeodesic(a_N_1, g12) -> Metric2D:
    """``G = a_{N-1}² / (1 - g12²)``."""
    g = _vals(g12)
    A = _vals(a_N_1)
    if np.any(np.abs(g) >= 1.0):
        raise ValueError(f"degenerate signature: |g12| >= 1 at grid point {_first_bad(np.atleast_1d(np.abs(g) >= 1))}")
    if np.any(A == 0.0):
        raise ValueError(f"a_(N-1) vanishes at grid point {_first_bad(np.atleast_1d(A == 0.0))}")
    return Metric2D("semigeodesic", {"G": A * A / (1.0 - g * g)})


def _path_integrate(P: np.ndarray, Q: np.ndarray, h1: float, h2: float, first_axis: int) -> np.ndarray:
    """Potential of ``P d(axis1) + Q d(axis2)`` by trapezoidal integration.

    ``first_axis = 1`` integrates along axis 1 on the first row of axis 2,
    then along axis 2; ``first_axis = 2`` uses the opposite order.
    """
    if first_axis == 1:
        base = cumulative_trapezoid(P[:, 0], dx=h1, initial=0.0)
        return base[:, None] + cumulative_trapezoid(Q, dx=h2, axis=1, initial=0.0)
    base = cumulative_trapezoid(Q[0, :], dx=h2, initial=0.0)
    return base[None, :] + cumulative_trapezoid(P, dx=h1, axis=0, initial=0.0)


@dataclass(frozen=True, eq=False)
class ReciprocalResult:
    potential: ScalarField2D
    closedness: ScalarField2D
    path_defect: float


def reciprocal_forward(g12: ScalarField2D, a_N_1: ScalarField2D) -> ReciprocalResult:
    """Potential ``Y(x1, x2)`` with ``Y_x1 = 1/A``, ``Y_x2 = -g12/A``.

    The closedness residual is ``(1/A)_x2 + (g12/A)_x1`` (zero exactly when
    the last raz equation holds); ``path_defect`` is the max difference
    between the two integration orders.
    """
    if g12.grid != a_N_1.grid:
        raise FieldError("g12 and a_(N-1) must share a grid")
    A = a_N_1.values
    if np.any(A == 0.0):
        raise ValueError(f"a_(N-1) vanishes at grid point {_first_bad(A == 0.0)}")
    grid = g12.grid
    P = 1.0 / A
    Q = -g12.values / A
    Y = _path_integrate(P, Q, grid.dx, grid.dy, 1)
    Y_alt = _path_integrate(P, Q, grid.dx, grid.dy, 2)
    closed = partial(ScalarField2D(grid, P), 2) - partial(ScalarField2D(grid, Q), 1)
    return ReciprocalResult(ScalarField2D(grid, Y), closed, float(np.max(np.abs(Y - Y_alt))))


@dataclass(frozen=True, eq=False)
class Reconstruction:
    """``g12 = h_k`` and ``a_{N-1} = sqrt((1-h_k²)/a)`` with ``h_k = b_k/sqrt(1+b_k²)``."""

    k: int
    g12: object  # ScalarField2D over the series, or 1-D array for one snapshot
    a_N_1: object
    closedness: ScalarField2D | None = None

    @property
    def closedness_max(self) -> float:
        return float("nan") if self.closedness is None else self.closedness.max_abs()


def _reconstruct_arrays(a: np.ndarray, b: np.ndarray):
    if np.any(a <= 0.0):
        raise ValueError("a must be positive for reconstruction")
    h = b / np.sqrt(1.0 + b * b)
    return h, np.sqrt((1.0 - h * h) / a)


def reconstruct_from_solution(solution, k: int, orientation: int = EVOLUTION) -> Reconstruction:
    """Metric data of the (x1, x2) chart from a snapshot or a snapshot series.

    ``k`` (1-based) selects the root field ``b_k``; every choice gives a
    valid bridge and there is no default.  For a series the closedness
    residual of ``dx1 = g12 dx + A dY`` is ``(g12)_Y - A_x``; along the
    evolution variable (``Y = -y``) this is ``-(g12)_y - A_x``.
    """
    if isinstance(solution, HydroSnapshot):
        series = None
        snap = solution
    else:
        series = list(solution)
        snap = series[0]
    if not 1 <= k <= snap.N - 1:
        raise ValueError(f"root index k must lie in 1..{snap.N - 1}, got {k}")
    if series is None:
        h, A = _reconstruct_arrays(snap.a.values, snap.b[k - 1].values)
        return Reconstruction(k, h, A)
    g = stack_series(series, lambda s: _reconstruct_arrays(s.a.values, s.b[k - 1].values)[0])
    A = stack_series(series, lambda s: _reconstruct_arrays(s.a.values, s.b[k - 1].values)[1])
    closed = orientation * partial(g, 2) - partial(A, 1)
    return Reconstruction(k, g, A, closed)


@dataclass(frozen=True, eq=False)
class PotentialResult:
    x1: ScalarField2D
    path_defect: float
    closedness_max: float
    dx1_dY_range: tuple
    folds: bool
    warning: str | None = None


def x1_potential(g12: ScalarField2D, a_N_1: ScalarField2D, orientation: int = EVOLUTION,
                 threshold: float | None = None) -> PotentialResult:
    """Potential ``x1`` of ``dx1 = g12 dx + A dY`` over an (x, ·) grid (``x2 = x``).

    Integration runs along x on the first row, then along the second axis.
    A warning is attached when the closedness residual exceeds
    ``threshold``; folds (``∂x1/∂Y`` changing sign) are reported, not
    interpreted.
    """
    if g12.grid != a_N_1.grid:
        raise FieldError("g12 and a_(N-1) must share a grid")
    grid = g12.grid
    P = g12.values
    Q = orientation * a_N_1.values
    x1 = _path_integrate(P, Q, grid.dx, grid.dy, 1)
    alt = _path_integrate(P, Q, grid.dx, grid.dy, 2)
    closed = float(np.max(np.abs(orientation * partial(g12, 2).values - partial(a_N_1, 1).values)))
    A = a_N_1.values
    folds = bool(np.min(A) <= 0.0 < np.max(A))
    msg = None
    if threshold is not None and closed > threshold:
        msg = f"closedness residual {closed:.3g} exceeds {threshold:.3g}; x1 is path dependent"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    if folds:
        log.warning("x1 potential folds: dx1/dY changes sign")
    return PotentialResult(ScalarField2D(grid, x1), float(np.max(np.abs(x1 - alt))), closed,
                           (float(np.min(A)), float(np.max(A))), folds, msg)


def integral_coefficients(series: Sequence[HydroSnapshot], k: int) -> tuple[MomentaPolynomial, Reconstruction]:
    """Coefficients ``a_0..a_N`` of the first integral in the (x1, x2) momenta.

    In semi-geodesic momenta the integral is ``P2 Π_m (P1 - a^{1/2} b_m P2)``;
    substituting ``P1 = p2 + g12 p1``, ``P2 = a_{N-1} p1`` with the bridge
    ``k`` makes the ``p1^N`` coefficient vanish (the ``m = k`` factor becomes
    ``p2``).  Fields live on the stacked (x, y) grid of the series.
    """
    rec = reconstruct_from_solution(series, k)
    N = series[0].N
    beta = [stack_series(series, lambda s, m=m: np.sqrt(s.a.values) * s.b[m].values) for m in range(N - 1)]
    poly = MomentaPolynomial([0.0, 1.0])  # P2
    for bm in beta:
        poly = poly * MomentaPolynomial([1.0, -bm])
    f = transform_from_semigeodesic(poly.coeffs, rec.g12, rec.a_N_1)
    return f, rec


@dataclass(frozen=True, eq=False)
class ChebyshevChart:
    """Fields resampled onto a uniform (x1, x2) grid (axis 1 = x1, axis 2 = x2 = x)."""

    grid: Grid2D
    fields: dict
    period_x1_shift: float


def resample_to_chebyshev(x1: ScalarField2D, fields: Mapping[str, ScalarField2D], n1: int,
                          margin: float = 0.0) -> ChebyshevChart:
    """Resample (x, y)-grid fields onto a uniform grid in (x1, x2).

    ``x1(x, y)`` must be strictly monotone in y along every x column.  The
    x1 range is the common range of all columns (shrunk by ``margin`` on
    both sides); values are interpolated by cubic splines along y.  The x2
    axis reuses the x nodes and is periodic when the source is periodic in x
    and the x1 potential returns to itself over one period.
    """
    grid = x1.grid
    X1 = x1.values
    d = np.diff(X1, axis=1)
    if not (np.all(d > 0) or np.all(d < 0)):
        raise ValueError("x1 is not monotone in y along some column (fold)")
    lo = float(np.max(np.min(X1, axis=1))) + margin
    hi = float(np.min(np.max(X1, axis=1))) - margin
    if not hi > lo:
        raise ValueError("columns of x1 share no common range")
    targets = np.linspace(lo, hi, n1)
    out = {name: np.empty((n1, grid.nx)) for name in fields}
    increasing = d[0, 0] > 0
    for i in range(grid.nx):
        xs = X1[i] if increasing else X1[i][::-1]
        for name, f in fields.items():
            if f.grid != grid:
                raise FieldError(f"field {name!r} is not on the x1 grid")
            vs = f.values[i] if increasing else f.values[i][::-1]
            out[name][:, i] = CubicSpline(xs, vs)(targets)
    period_shift = 0.0
    periodic = False
    if grid.periodic_x:
        g = fields.get("g12")
        if g is not None:
            period_shift = float(np.sum(g.values[:, 0]) * grid.dx)
            periodic = abs(period_shift) <= 1e-9 * max(1.0, grid.nx * grid.dx)
    cgrid = Grid2D(n1, grid.nx, (hi - lo) / (n1 - 1), grid.dx, lo, grid.x0, False, periodic)
    return ChebyshevChart(cgrid, {k: ScalarField2D(cgrid, v) for k, v in out.items()}, period_shift)


def hj_residual_chebyshev(p: ScalarField2D, g12: ScalarField2D, branch: int = 1) -> ScalarField2D:
    """``p_x2 - (branch·sqrt((g²-1)p²+1) - g p)_x1``.

    The x1-derivative acts on the whole expression, through both ``g12``
    and ``p``.
    """
    if p.grid != g12.grid:
        raise FieldError("p and g12 must share a grid")
    g, pv = g12.values, p.values
    rad = (g * g - 1.0) * pv * pv + 1.0
    if np.any(rad <= 0.0):
        raise ValueError(f"square-root domain violated at grid point {_first_bad(rad <= 0.0)}")
    F = ScalarField2D(p.grid, branch * np.sqrt(rad) - g * pv)
    return partial(p, 2) - partial(F, 1)


def hj_residual_semigeodesic(pt: ScalarField2D, a_N_1: ScalarField2D, g12: ScalarField2D,
                             orientation: int = EVOLUTION) -> ScalarField2D:
    """``p̃_Y - (A/sqrt(1-g12²) · sqrt(1-p̃²))_x`` over an (x, ·) grid."""
    if not (pt.grid == a_N_1.grid == g12.grid):
        raise FieldError("p̃, a_(N-1) and g12 must share a grid")
    v = pt.values
    if np.any(np.abs(v) >= 1.0):
        raise ValueError(f"|p̃| >= 1 at grid point {_first_bad(np.abs(v) >= 1.0)}")
    g = g12.values
    if np.any(np.abs(g) >= 1.0):
        raise ValueError(f"|g12| >= 1 at grid point {_first_bad(np.abs(g) >= 1.0)}")
    flux = ScalarField2D(pt.grid, a_N_1.values / np.sqrt(1.0 - g * g) * np.sqrt(1.0 - v * v))
    return orientation * partial(pt, 2) - partial(flux, 1)
