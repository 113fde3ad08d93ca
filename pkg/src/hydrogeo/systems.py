"""Quasi-linear first-order system for the coefficients of a polynomial integral.

For the Hamiltonian ``H = p1²/2 + g p1 p2 + p2²/2`` and the integral
``f = sum_{k=1}^{N-1} a_k p1^{N-k} p2^k`` the condition {f,H} = 0 splits into
N equations, one per monomial ``p1^{N+1-k} p2^k``:

    a_{k,x1} + g a_{k-1,x1} + g a_{k,x2} + a_{k-1,x2}
        = k a_k g_{x2} + (N+1-k) a_{k-1} g_{x1},      k = 1..N,

with ``a_0 = a_N = 0``.  Equations are kept as term lists so they can be
compared structurally and rendered, and evaluated numerically on fields.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Mapping

import numpy as np

from .fields import FieldError, ScalarField2D, partial
from .momenta import HamiltonianForm, MomentaPolynomial, poisson_bracket

__all__ = [
    "RazTerm",
    "RazSystem",
    "build_raz",
    "raz_residual",
    "bracket_equivalence",
    "render_system",
    "system_to_json",
]

G12 = "g12"


def a_name(k: int) -> str:
    return f"a{k}"


@dataclass(frozen=True, order=True)
class RazTerm:
    """``scalar * factor * d(derivative_of)/d(wrt)`` on one side of an equation."""

    side: str  # "LHS" | "RHS"
    scalar: Fraction
    factor: str  # "1", "g12" or "a<k>"
    derivative_of: str  # "g12" or "a<k>"
    wrt: str  # "x1" | "x2"

    def __post_init__(self):
        if self.side not in ("LHS", "RHS"):
            raise ValueError(f"bad side {self.side!r}")
        if self.wrt not in ("x1", "x2"):
            raise ValueError(f"bad axis {self.wrt!r}")
        if self.scalar == 0:
            raise ValueError("zero scalar term")

    def to_json(self) -> dict:
        d = asdict(self)
        s = self.scalar
        d["scalar"] = int(s) if s.denominator == 1 else f"{s.numerator}/{s.denominator}"
        return d


@dataclass(frozen=True)
class RazSystem:
    N: int
    zero_mask: frozenset
    equations: tuple  # tuple of (k, tuple[RazTerm, ...])

    @property
    def unknowns(self) -> list[str]:
        return [a_name(k) for k in range(1, self.N) if k not in self.zero_mask] + [G12]

    def equation(self, k: int) -> tuple:
        for kk, terms in self.equations:
            if kk == k:
                return terms
        raise KeyError(f"equation {k} is absent (degenerate under the mask)")


def _validate(N: int, zero_mask) -> frozenset:
    if int(N) != N or N < 2:
        raise ValueError(f"degree N must be an integer >= 2, got {N!r}")
    mask = frozenset(int(k) for k in zero_mask)
    bad = [k for k in mask if not 1 <= k <= N - 1]
    if bad:
        raise ValueError(f"mask indices {sorted(bad)} outside 1..{N - 1}")
    if len(mask) == N - 1:
        raise ValueError("polynomial identically zero: every coefficient is masked")
    return mask


def build_raz(N: int, zero_mask=()) -> RazSystem:
    mask = _validate(N, zero_mask)
    alive = {k for k in range(1, N) if k not in mask}
    eqs = []
    for k in range(1, N + 1):
        terms = []
        if k in alive:
            A = a_name(k)
            terms += [RazTerm("LHS", Fraction(1), "1", A, "x1"),
                      RazTerm("LHS", Fraction(1), G12, A, "x2"),
                      RazTerm("RHS", Fraction(k), A, G12, "x2")]
        if k - 1 in alive:
            B = a_name(k - 1)
            terms += [RazTerm("LHS", Fraction(1), G12, B, "x1"),
                      RazTerm("LHS", Fraction(1), "1", B, "x2"),
                      RazTerm("RHS", Fraction(N + 1 - k), B, G12, "x1")]
        if terms:
            eqs.append((k, tuple(sorted(terms))))
    return RazSystem(N, mask, tuple(eqs))


def _lookup(name: str, a: Mapping[int, ScalarField2D], g12: ScalarField2D):
    if name == "1":
        return 1.0
    if name == G12:
        return g12
    k = int(name[1:])
    if k not in a:
        raise KeyError(f"missing field for unmasked coefficient a_{k}")
    return a[k]


def raz_residual(sys: RazSystem, a: Mapping[int, ScalarField2D], g12: ScalarField2D) -> list[ScalarField2D]:
    """LHS − RHS of every surviving equation, in equation order."""
    for k in range(1, sys.N):
        if k not in sys.zero_mask:
            fk = a.get(k)
            if fk is None:
                raise KeyError(f"missing field for unmasked coefficient a_{k}")
            if fk.grid != g12.grid:
                raise FieldError(f"a_{k} and g12 are on different grids")
    cache: dict = {}

    def deriv(name, wrt):
        key = (name, wrt)
        if key not in cache:
            cache[key] = partial(_lookup(name, a, g12), 1 if wrt == "x1" else 2).values
        return cache[key]

    out = []
    for _, terms in sys.equations:
        r = np.zeros(g12.grid.shape)
        for t in terms:
            fac = _lookup(t.factor, a, g12)
            fac = fac.values if isinstance(fac, ScalarField2D) else fac
            val = float(t.scalar) * fac * deriv(t.derivative_of, t.wrt)
            r = r + val if t.side == "LHS" else r - val
        out.append(ScalarField2D(g12.grid, r))
    return out


def bracket_equivalence(N: int, a: Mapping[int, ScalarField2D], g12: ScalarField2D,
                        zero_mask=()) -> float:
    """Relative max discrepancy between {f,H} coefficients and raz residuals.

    Equation k is matched to the coefficient of ``p1^{N+1-k} p2^k``; the two
    extreme coefficients and the coefficients of degenerate equations must
    vanish.  The discrepancy is scaled by the largest bracket coefficient
    (or 1 if that is smaller).
    """
    sys = build_raz(N, zero_mask)
    coeffs = [0.0] + [0.0 if k in sys.zero_mask else a[k] for k in range(1, N)] + [0.0]
    br = poisson_bracket(MomentaPolynomial(coeffs), HamiltonianForm(g12))
    res = dict(zip([k for k, _ in sys.equations], raz_residual(sys, a, g12)))
    scale = max(1.0, br.max_abs())
    worst = 0.0
    for k, c in enumerate(br.coeffs):
        cv = c.values if isinstance(c, ScalarField2D) else np.asarray(c)
        rv = res[k].values if k in res else 0.0
        worst = max(worst, float(np.max(np.abs(cv - rv))))
    return worst / scale


def _fmt_term(t: RazTerm) -> str:
    s = "" if t.scalar == 1 else f"{t.scalar}·"
    f = "" if t.factor == "1" else f"{t.factor}·"
    d = f"(g12)_{t.wrt}" if t.derivative_of == G12 else f"{t.derivative_of}_{t.wrt}"
    return f"{s}{f}{d}"


def render_system(sys: RazSystem) -> str:
    """Human-readable listing, one equation per line."""
    lines = [f"# N={sys.N}, zero mask={sorted(sys.zero_mask) or '{}'}, "
             f"unknowns: {', '.join(sys.unknowns)}"]
    for k, terms in sys.equations:
        lhs = " + ".join(_fmt_term(t) for t in terms if t.side == "LHS")
        rhs = " + ".join(_fmt_term(t) for t in terms if t.side == "RHS")
        lines.append(f"[k={k}] {lhs} = {rhs}")
    return "\n".join(lines)


def system_to_json(sys: RazSystem) -> dict:
    return {
        "N": sys.N,
        "zero_mask": sorted(sys.zero_mask),
        "unknowns": sys.unknowns,
        "equations": [{"k": k, "terms": [t.to_json() for t in terms]} for k, terms in sys.equations],
    }
