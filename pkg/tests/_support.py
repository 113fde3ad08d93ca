"""Shared fixtures data: smooth fields and cached evolved runs."""
from fractions import Fraction
from functools import lru_cache

import numpy as np

from hydrogeo.evolution import EvolutionConfig, evolve_uno
from hydrogeo.fields import Grid2D, ScalarField2D
from hydrogeo.riemann import HydroSnapshot
from hydrogeo.systems import RazTerm

TWO_PI = 2.0 * np.pi


def smooth_random_field(grid: Grid2D, rng, modes: int = 3, amp: float = 1.0) -> ScalarField2D:
    """Sum of random low-order trigonometric modes plus a random mean."""
    X, Y = grid.mesh()
    L1 = grid.nx * grid.dx
    L2 = grid.ny * grid.dy
    vals = np.full(grid.shape, rng.uniform(-1, 1))
    for _ in range(modes):
        k1, k2 = rng.integers(0, 3, size=2)
        c, p1, p2 = rng.uniform(-1, 1), rng.uniform(0, TWO_PI), rng.uniform(0, TWO_PI)
        vals += c * np.sin(TWO_PI * k1 * X / L1 + p1) * np.cos(TWO_PI * k2 * Y / L2 + p2)
    return ScalarField2D(grid, amp * vals)


def periodic_grid(n: int = 64) -> Grid2D:
    return Grid2D(n, n, TWO_PI / n, TWO_PI / n, periodic_x=True, periodic_y=True)


def n3_initial(nx: int) -> HydroSnapshot:
    dx = TWO_PI / nx
    x = np.arange(nx) * dx
    return HydroSnapshot.from_arrays(1.0 + 0.1 * np.cos(x), [0.2 * np.sin(x), -0.1 + 0.15 * np.cos(2 * x)], dx)


def n2_initial(nx: int, amp: float = 0.2) -> HydroSnapshot:
    dx = TWO_PI / nx
    x = np.arange(nx) * dx
    return HydroSnapshot.from_arrays(1.0 + 0.1 * np.cos(x), [amp * np.sin(x)], dx)


def lw_config(nx: int, y_end: float) -> EvolutionConfig:
    # output spacing proportional to dx keeps y-differences second order under refinement
    return EvolutionConfig(y_end=y_end, scheme="lax_wendroff", output_dy=0.05 * 64 / nx)


@lru_cache(maxsize=None)
def evolved_n3(nx: int, y_end: float = 0.5):
    return evolve_uno(n3_initial(nx), lw_config(nx, y_end))


@lru_cache(maxsize=None)
def evolved_n2(nx: int, y_end: float = 1.0, amp: float = 0.2):
    return evolve_uno(n2_initial(nx, amp), lw_config(nx, y_end))


def ratios(values):
    v = np.asarray(values, dtype=float)
    return v[:-1] / v[1:]


def wrong_speed_series(nx, n=21):
    """Initial N=2 data translated at an arbitrary speed: smooth but not a solution."""
    dx = TWO_PI / nx
    x = np.arange(nx) * dx
    out = []
    for i in range(n):
        y = 0.05 * i
        out.append(HydroSnapshot.from_arrays(1 + 0.1 * np.cos(x - 0.7 * y), [0.2 * np.sin(x - 0.3 * y)], dx, y=y))
    return out


def parse_side(text, side):
    """Parse 'c*F*D_w + ...' where D_w is a derivative and F an optional factor."""
    terms = []
    for chunk in text.split("+"):
        parts = chunk.strip().split("*")
        scalar = Fraction(parts[0]) if parts[0][0].isdigit() else Fraction(1)
        if parts[0][0].isdigit():
            parts = parts[1:]
        deriv = parts[-1]
        factor = parts[0] if len(parts) == 2 else "1"
        name, wrt = deriv.rsplit("_", 1)
        terms.append(RazTerm(side, scalar, factor, name, wrt))
    return terms


def parse_equation(text):
    lhs, rhs = text.split("=")
    return sorted(parse_side(lhs, "LHS") + parse_side(rhs, "RHS"))


# transcribed term by term from the printed degree-3 and degree-4 systems
PRINTED_N3 = [
    "a1_x1 + g12*a1_x2 = a1*g12_x2",
    "g12*a1_x1 + a2_x1 + a1_x2 + g12*a2_x2 = 2*a1*g12_x1 + 2*a2*g12_x2",
    "g12*a2_x1 + a2_x2 = a2*g12_x1",
]
PRINTED_N4 = [
    "a1_x1 + g12*a1_x2 = a1*g12_x2",
    "a1_x2 + a2_x1 + g12*a1_x1 + g12*a2_x2 = 2*a2*g12_x2 + 3*a1*g12_x1",
    "a3_x1 + a2_x2 + g12*a3_x2 + g12*a2_x1 = 3*a3*g12_x2 + 2*a2*g12_x1",
    "a3_x2 + g12*a3_x1 = a3*g12_x1",
]
