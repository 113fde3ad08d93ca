"""Homogeneous polynomials in momenta with field coefficients.

A polynomial of degree N is stored by its N+1 coefficients ``a_0..a_N`` with
``f = sum_m a_m p1**(N-m) p2**m``.  Coefficients are floats or
:class:`~hydrogeo.fields.ScalarField2D` objects; constants are promoted only
when they meet a field in arithmetic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .fields import FieldError, ScalarField2D, partial

Coeff = Union[float, ScalarField2D]

__all__ = [
    "MomentaPolynomial",
    "HamiltonianForm",
    "RootStructure",
    "NonRealFactorization",
    "poisson_bracket",
    "evaluate",
    "root_structure",
    "substitute_linear",
    "transform_to_semigeodesic",
    "transform_from_semigeodesic",
]


class NonRealFactorization(ArithmeticError):
    """The binary form has a complex-conjugate pair of roots at the point."""


def _is_field(c) -> bool:
    return isinstance(c, ScalarField2D)


def _d(c: Coeff, axis: int) -> Coeff:
    return partial(c, axis) if _is_field(c) else 0.0


def _common_grid(coeffs):
    grid = None
    for c in coeffs:
        if _is_field(c):
            if grid is None:
                grid = c.grid
            elif c.grid != grid:
                raise FieldError(f"coefficient grids differ: {grid} vs {c.grid}")
    return grid


def _at(c: Coeff, idx) -> float:
    if _is_field(c):
        return float(c.values[idx])
    return float(c)


class MomentaPolynomial:
    """``f = sum_m coeffs[m] * p1**(N-m) * p2**m``."""

    def __init__(self, coeffs: Sequence[Coeff]):
        if len(coeffs) < 1:
            raise ValueError("a momenta polynomial needs at least one coefficient")
        self.coeffs = tuple(c if _is_field(c) else float(c) for c in coeffs)
        self.grid = _common_grid(self.coeffs)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __len__(self):
        return len(self.coeffs)

    def __add__(self, other: "MomentaPolynomial") -> "MomentaPolynomial":
        if other.degree != self.degree:
            raise ValueError("degree mismatch")
        return MomentaPolynomial([a + b for a, b in zip(self.coeffs, other.coeffs)])

    def __sub__(self, other: "MomentaPolynomial") -> "MomentaPolynomial":
        return self + other.scale(-1.0)

    def scale(self, s) -> "MomentaPolynomial":
        return MomentaPolynomial([c * s for c in self.coeffs])

    def __mul__(self, other: "MomentaPolynomial") -> "MomentaPolynomial":
        out: list = [0.0] * (self.degree + other.degree + 1)
        for i, a in enumerate(self.coeffs):
            if not _is_field(a) and a == 0.0:
                continue
            for j, b in enumerate(other.coeffs):
                if not _is_field(b) and b == 0.0:
                    continue
                out[i + j] = out[i + j] + a * b
        return MomentaPolynomial(out)

    def dx(self, axis: int) -> "MomentaPolynomial":
        """Spatial derivative of every coefficient."""
        return MomentaPolynomial([_d(c, axis) for c in self.coeffs])

    def dp1(self) -> "MomentaPolynomial":
        N = self.degree
        if N == 0:
            return MomentaPolynomial([0.0])
        return MomentaPolynomial([(N - m) * self.coeffs[m] for m in range(N)])

    def dp2(self) -> "MomentaPolynomial":
        N = self.degree
        if N == 0:
            return MomentaPolynomial([0.0])
        return MomentaPolynomial([m * self.coeffs[m] for m in range(1, N + 1)])

    def at(self, idx) -> np.ndarray:
        """Coefficient values at grid index ``idx`` (ignored for constant polynomials)."""
        if self.grid is not None:
            i, j = idx
            if not (0 <= i < self.grid.nx and 0 <= j < self.grid.ny):
                raise IndexError(f"point {idx} outside grid {self.grid.shape}")
        return np.array([_at(c, idx) for c in self.coeffs])

    def coeff_arrays(self) -> list[np.ndarray]:
        """Coefficients broadcast to full arrays on the common grid."""
        if self.grid is None:
            raise FieldError("polynomial has only constant coefficients")
        return [c.values if _is_field(c) else np.full(self.grid.shape, c) for c in self.coeffs]

    def max_abs(self) -> float:
        return max(c.max_abs() if _is_field(c) else abs(c) for c in self.coeffs)

    def to_json(self, field_refs: Sequence[str | None] | None = None) -> dict:
        """``{degree, coeffs}``; field coefficients appear as ``{"field": ref}``.

        ``field_refs[m]`` names the CSV file holding coefficient ``m``.
        """
        out = []
        for m, c in enumerate(self.coeffs):
            if _is_field(c):
                if field_refs is None or field_refs[m] is None:
                    raise ValueError(f"coefficient {m} is a field and needs a file reference")
                out.append({"field": field_refs[m]})
            else:
                out.append(c)
        return {"degree": self.degree, "coeffs": out}

    @classmethod
    def from_json(cls, obj: dict, base_dir=None) -> "MomentaPolynomial":
        coeffs = []
        for c in obj["coeffs"]:
            if isinstance(c, dict):
                path = Path(c["field"]) if base_dir is None else Path(base_dir) / c["field"]
                coeffs.append(ScalarField2D.from_csv(path))
            else:
                coeffs.append(float(c))
        if len(coeffs) != obj["degree"] + 1:
            raise ValueError("degree does not match the number of coefficients")
        return cls(coeffs)

    def __repr__(self):
        parts = ["<field>" if _is_field(c) else f"{c:g}" for c in self.coeffs]
        return f"MomentaPolynomial(N={self.degree}, coeffs=[{', '.join(parts)}])"


@dataclass(frozen=True)
class HamiltonianForm:
    """``H = eps1/2 p1^2 + g12 p1 p2 + eps2/2 p2^2``."""

    g12: Coeff
    eps1: int = 1
    eps2: int = 1

    def __post_init__(self):
        if self.eps1 not in (-1, 0, 1) or self.eps2 not in (-1, 0, 1):
            raise ValueError("eps1, eps2 must be in {-1, 0, 1}")

    def as_polynomial(self) -> MomentaPolynomial:
        return MomentaPolynomial([0.5 * self.eps1, self.g12, 0.5 * self.eps2])

    def check_riemannian(self) -> None:
        """Raise unless eps1 = eps2 = 1 and |g12| < 1 everywhere."""
        if (self.eps1, self.eps2) != (1, 1):
            raise ValueError("main pipeline requires eps1 = eps2 = 1")
        vals = self.g12.values if _is_field(self.g12) else np.array(self.g12)
        bad = np.argwhere(np.abs(np.atleast_1d(vals)) >= 1.0)
        if bad.size:
            raise ValueError(f"|g12| >= 1 at grid point {tuple(int(v) for v in bad[0])}")


def poisson_bracket(f: MomentaPolynomial, H: HamiltonianForm) -> MomentaPolynomial:
    """{f, H} as a degree N+1 momenta polynomial.

    Uses ``{f,H} = f_x1 H_p1 - f_p1 H_x1 + f_x2 H_p2 - f_p2 H_x2`` with the
    polynomial product, so every coefficient is built from the same discrete
    derivatives as the raz residuals but through an unrelated code path.
    """
    grid = _common_grid(list(f.coeffs) + [H.g12])
    del grid  # validation only
    g = H.g12
    H_p1 = MomentaPolynomial([float(H.eps1), g])
    H_p2 = MomentaPolynomial([g, float(H.eps2)])
    H_x1 = MomentaPolynomial([0.0, _d(g, 1), 0.0])
    H_x2 = MomentaPolynomial([0.0, _d(g, 2), 0.0])
    out = f.dx(1) * H_p1 + f.dx(2) * H_p2
    if f.degree >= 1:
        out = out - f.dp1() * H_x1 - f.dp2() * H_x2
    return out


def evaluate(f: MomentaPolynomial, point_index, p1: float, p2: float) -> float:
    a = f.at(point_index)
    N = f.degree
    return float(sum(a[m] * p1 ** (N - m) * p2 ** m for m in range(N + 1)))


@dataclass(frozen=True)
class RootStructure:
    """Roots ``s = p2/p1`` of a binary form with multiplicities; ``math.inf`` is p1 = 0."""

    roots: tuple[tuple[float, int], ...]

    @property
    def total_multiplicity(self) -> int:
        return sum(m for _, m in self.roots)

    @property
    def distinct(self) -> int:
        return len(self.roots)


def _clusters(raw: np.ndarray) -> list[np.ndarray]:
    """Group computed roots that are numerically one multiple root.

    An m-fold root is perturbed by about ``eps**(1/m)`` relative, so sizes
    are tried from the largest down: at size m, roots linked within
    ``10 eps**(1/m) max(1, |s|)`` form a cluster when at least m of them
    connect.  Remaining roots are singletons.
    """
    left = list(raw)
    out: list[np.ndarray] = []
    eps = np.finfo(float).eps
    for m in range(len(left), 1, -1):
        rad = 10.0 * eps ** (1.0 / m)
        changed = True
        while changed and len(left) >= m:
            changed = False
            # connected components of the link graph (single linkage)
            comp = list(range(len(left)))
            for a in range(len(left)):
                for b in range(a + 1, len(left)):
                    if abs(left[a] - left[b]) <= rad * max(1.0, abs(left[a])):
                        ca, cb = comp[a], comp[b]
                        comp = [ca if c == cb else c for c in comp]
            for c in set(comp):
                members = [k for k in range(len(left)) if comp[k] == c]
                if len(members) >= m:
                    out.append(np.array([left[k] for k in members]))
                    left = [v for k, v in enumerate(left) if k not in members]
                    changed = True
                    break
    out.extend(np.array([v]) for v in left)
    return out


def root_structure(f: MomentaPolynomial, point_index=None, tol: float = 1e-8) -> RootStructure:
    """Factor the binary form at one grid point.

    Trailing zero coefficients (a_N, a_{N-1}, ...) give the root at infinity;
    the remaining polynomial ``sum_m a_m s^m`` is solved via its companion
    matrix.  Numerically split multiple roots are regrouped first (see
    :func:`_clusters`); real roots within ``tol * max(1, |s|)`` of each
    other are then merged.
    """
    a = f.at(point_index)
    if not np.any(a != 0.0):
        raise ValueError("polynomial vanishes identically at this point")
    N = f.degree
    k_inf = 0
    while a[N - k_inf] == 0.0:
        k_inf += 1
    finite = a[: N + 1 - k_inf]
    groups: list[list] = []
    if finite.size > 1:
        # numpy.roots builds the companion matrix of the highest-first coefficients
        raw = np.roots(finite[::-1])
        for cl in _clusters(raw):
            c = complex(np.mean(cl))
            if abs(c.imag) > tol * max(1.0, abs(c)):
                raise NonRealFactorization(f"complex roots {cl} at {point_index}")
            groups.append([c.real, len(cl)])
        groups.sort()
    merged: list[list] = []
    for s, m in groups:
        if merged and abs(s - merged[-1][0] / merged[-1][1]) <= tol * max(1.0, abs(s)):
            merged[-1][0] += s * m
            merged[-1][1] += m
        else:
            merged.append([s * m, m])
    out = [(total / count, count) for total, count in merged]
    if k_inf:
        out.append((math.inf, k_inf))
    return RootStructure(tuple(out))


def substitute_linear(f: MomentaPolynomial, alpha: Coeff, beta: Coeff, gamma: Coeff,
                      delta: Coeff) -> MomentaPolynomial:
    """Rewrite ``f`` in new momenta given ``p1 = alpha q1 + beta q2``, ``p2 = gamma q1 + delta q2``.

    The result uses the same convention: coefficient ``m`` multiplies
    ``q1**(N-m) q2**m``.
    """
    N = f.degree
    L1 = MomentaPolynomial([alpha, beta])
    L2 = MomentaPolynomial([gamma, delta])
    pow1 = [MomentaPolynomial([1.0])]
    pow2 = [MomentaPolynomial([1.0])]
    for _ in range(N):
        pow1.append(pow1[-1] * L1)
        pow2.append(pow2[-1] * L2)
    out = MomentaPolynomial([0.0] * (N + 1))
    for m, a in enumerate(f.coeffs):
        if not _is_field(a) and a == 0.0:
            continue
        term = pow1[N - m] * pow2[m]
        out = out + MomentaPolynomial([a * c for c in term.coeffs])
    return out


def _check_nonzero(c: Coeff, name: str) -> None:
    """Reject zeros, near-zeros, and sign changes between neighbouring nodes."""
    if _is_field(c):
        v = c.values
        bad = np.abs(v) <= 1e-12 * max(1.0, float(np.max(np.abs(v))))
        for axis in (0, 1):
            flip = np.sign(np.take(v, range(v.shape[axis] - 1), axis)) * np.sign(
                np.take(v, range(1, v.shape[axis]), axis)) < 0
            pad = [(0, 0), (0, 0)]
            pad[axis] = (0, 1)
            bad |= np.pad(flip, pad)
        idx = np.argwhere(bad)
        if idx.size:
            raise ValueError(f"{name} vanishes at grid point {tuple(int(t) for t in idx[0])}")
    elif abs(c) <= 1e-300:
        raise ValueError(f"{name} vanishes")


def transform_to_semigeodesic(a: Sequence[Coeff], g12: Coeff, tol: float = 1e-10) -> list[Coeff]:
    """Coefficients ``ã_1..ã_{N-1}`` of the integral in semi-geodesic momenta.

    ``a`` holds ``a_1..a_{N-1}`` of ``f = sum_{m=1}^{N-1} a_m p1^{N-m} p2^m``.
    With ``p̃1 = p2 + g12 p1`` and ``p̃2 = a_{N-1} p1`` the integral becomes
    ``p̃2 p̃1^{N-1} + sum_k ã_k p̃2^{k+1} p̃1^{N-1-k}``.
    """
    a = list(a)
    A = a[-1]
    _check_nonzero(A, "a_{N-1}")
    f = MomentaPolynomial([0.0, *a, 0.0])
    inv_A = 1.0 / A
    out = substitute_linear(f, 0.0, inv_A, 1.0, -g12 * inv_A)
    lead0, lead1 = out.coeffs[0], out.coeffs[1]
    for name, c, target in (("p̃1^N", lead0, 0.0), ("p̃2 p̃1^(N-1)", lead1, 1.0)):
        err = (c - target).max_abs() if _is_field(c) else abs(c - target)
        if err > tol:
            raise ArithmeticError(f"coefficient of {name} is off by {err:.3g}")
    return list(out.coeffs[2:])


def transform_from_semigeodesic(c: Sequence[Coeff], g12: Coeff, a_N_1: Coeff) -> MomentaPolynomial:
    """Inverse change of momenta: ``c_m`` multiply ``p̃1^{N-m} p̃2^m``; returns ``a_0..a_N``."""
    return substitute_linear(MomentaPolynomial(list(c)), g12, 1.0, a_N_1, 0.0)
