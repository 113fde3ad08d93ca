"""Uniform-grid scalar fields and second-order finite differences.

Every coefficient function in the package (metric function, polynomial
coefficients, hydrodynamic unknowns) is stored as a sampled field on a
uniform grid.  Fields are immutable once built.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "Grid2D",
    "ScalarField2D",
    "ScalarField1D",
    "FieldError",
    "partial",
    "partial1d",
    "diff_axis",
]


class FieldError(ValueError):
    """Invalid grid, field data or serialized field."""


def diff_axis(values: np.ndarray, h: float, axis: int, periodic: bool) -> np.ndarray:
    """Second-order first derivative of ``values`` along ``axis``.

    Periodic axes use the wrap-around central stencil everywhere; otherwise
    central differences in the interior and one-sided three-point stencils
    on the two boundary layers.
    """
    if periodic:
        return (np.roll(values, -1, axis=axis) - np.roll(values, 1, axis=axis)) / (2.0 * h)
    return np.gradient(values, h, axis=axis, edge_order=2)


def _freeze(arr) -> np.ndarray:
    out = np.array(arr, dtype=float, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class Grid2D:
    nx: int
    ny: int
    dx: float
    dy: float
    x0: float = 0.0
    y0: float = 0.0
    periodic_x: bool = False
    periodic_y: bool = False

    def __post_init__(self):
        if int(self.nx) != self.nx or int(self.ny) != self.ny:
            raise FieldError("grid sizes must be integers")
        if self.nx < 4 or self.ny < 4:
            raise FieldError(f"grid needs nx, ny >= 4, got ({self.nx}, {self.ny})")
        if not (self.dx > 0 and self.dy > 0):
            raise FieldError(f"grid spacings must be positive, got ({self.dx}, {self.dy})")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.nx)

    @property
    def y(self) -> np.ndarray:
        return self.y0 + self.dy * np.arange(self.ny)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinate arrays with ``indexing='ij'`` (first index is axis 1)."""
        return np.meshgrid(self.x, self.y, indexing="ij")

    def to_dict(self) -> dict:
        return {
            "nx": self.nx, "ny": self.ny, "dx": self.dx, "dy": self.dy,
            "x0": self.x0, "y0": self.y0,
            "periodic_x": self.periodic_x, "periodic_y": self.periodic_y,
        }


class ScalarField2D:
    """Real field sampled on a :class:`Grid2D`; ``values[i, j] = f(x_i, y_j)``."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid2D, values):
        vals = _freeze(values)
        if vals.shape != grid.shape:
            raise FieldError(f"values shape {vals.shape} does not match grid {grid.shape}")
        if not np.all(np.isfinite(vals)):
            raise FieldError("field contains non-finite values")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", vals)

    def __setattr__(self, name, value):
        raise AttributeError("ScalarField2D is immutable")

    @classmethod
    def from_function(cls, grid: Grid2D, func) -> "ScalarField2D":
        X, Y = grid.mesh()
        return cls(grid, np.broadcast_to(func(X, Y), grid.shape))

    @classmethod
    def constant(cls, grid: Grid2D, c: float) -> "ScalarField2D":
        return cls(grid, np.full(grid.shape, float(c)))

    # arithmetic -----------------------------------------------------------
    def _other(self, other):
        if isinstance(other, ScalarField2D):
            if other.grid != self.grid:
                raise FieldError("fields live on different grids")
            return other.values
        if np.isscalar(other):
            return float(other)
        return NotImplemented

    def _wrap(self, vals):
        return ScalarField2D(self.grid, vals)

    def __add__(self, other):
        o = self._other(other)
        return NotImplemented if o is NotImplemented else self._wrap(self.values + o)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._other(other)
        return NotImplemented if o is NotImplemented else self._wrap(self.values - o)

    def __rsub__(self, other):
        o = self._other(other)
        return NotImplemented if o is NotImplemented else self._wrap(o - self.values)

    def __mul__(self, other):
        o = self._other(other)
        return NotImplemented if o is NotImplemented else self._wrap(self.values * o)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._other(other)
        return NotImplemented if o is NotImplemented else self._wrap(self.values / o)

    def __rtruediv__(self, other):
        o = self._other(other)
        return NotImplemented if o is NotImplemented else self._wrap(o / self.values)

    def __neg__(self):
        return self._wrap(-self.values)

    def __pow__(self, k):
        return self._wrap(self.values ** k)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def __repr__(self):
        return f"ScalarField2D(grid={self.grid!r}, max|f|={self.max_abs():.3g})"

    # serialization --------------------------------------------------------
    _HEADER = "# nx,ny,dx,dy,x0,y0,periodic_x,periodic_y"

    def to_csv(self, path=None) -> str:
        g = self.grid
        buf = io.StringIO()
        buf.write(self._HEADER + "\n")
        buf.write(f"# {g.nx},{g.ny},{g.dx!r},{g.dy!r},{g.x0!r},{g.y0!r},"
                  f"{int(g.periodic_x)},{int(g.periodic_y)}\n")
        writer = csv.writer(buf, lineterminator="\n")
        for row in self.values:
            writer.writerow([repr(float(v)) for v in row])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source) -> "ScalarField2D":
        """Read a field from a CSV path or CSV text."""
        text = _read_text(source)
        lines = text.splitlines()
        if len(lines) < 2 or lines[0].strip() != cls._HEADER:
            raise FieldError("missing field CSV header")
        meta = lines[1].lstrip("#").strip().split(",")
        if len(meta) != 8:
            raise FieldError("malformed field CSV metadata line")
        try:
            grid = Grid2D(int(meta[0]), int(meta[1]), float(meta[2]), float(meta[3]),
                          float(meta[4]), float(meta[5]), bool(int(meta[6])), bool(int(meta[7])))
            rows = [[float(v) for v in row] for row in csv.reader(lines[2:]) if row]
        except ValueError as exc:
            raise FieldError(f"malformed field CSV: {exc}") from exc
        if len(rows) != grid.nx or any(len(r) != grid.ny for r in rows):
            raise FieldError(
                f"field CSV has {len(rows)} rows of lengths {sorted({len(r) for r in rows})}, "
                f"expected {grid.nx} rows of {grid.ny}")
        return cls(grid, np.array(rows))

    def to_json(self) -> dict:
        return {"grid": self.grid.to_dict(), "values": self.values.tolist()}

    @classmethod
    def from_json(cls, obj) -> "ScalarField2D":
        if isinstance(obj, (str, Path)):
            obj = json.loads(_read_text(obj))
        try:
            grid = Grid2D(**obj["grid"])
            vals = np.array(obj["values"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise FieldError(f"malformed field JSON: {exc}") from exc
        if vals.shape != grid.shape:
            raise FieldError(f"field JSON values shape {vals.shape} != grid {grid.shape}")
        return cls(grid, vals)


@dataclass(frozen=True, eq=False)
class ScalarField1D:
    """Field on a uniform 1-D grid, ``values[i] = f(x0 + i*dx)``."""

    nx: int
    dx: float
    values: np.ndarray
    x0: float = 0.0
    periodic: bool = True

    def __post_init__(self):
        vals = _freeze(self.values)
        if vals.ndim != 1 or vals.shape[0] != self.nx:
            raise FieldError(f"values shape {vals.shape} does not match nx={self.nx}")
        if self.nx < 4:
            raise FieldError(f"1-D grid needs nx >= 4, got {self.nx}")
        if not self.dx > 0:
            raise FieldError("dx must be positive")
        if not np.all(np.isfinite(vals)):
            raise FieldError("field contains non-finite values")
        object.__setattr__(self, "values", vals)

    @classmethod
    def like(cls, other: "ScalarField1D", values) -> "ScalarField1D":
        return cls(other.nx, other.dx, values, other.x0, other.periodic)

    @classmethod
    def from_function(cls, nx, dx, func, x0=0.0, periodic=True) -> "ScalarField1D":
        x = x0 + dx * np.arange(nx)
        return cls(nx, dx, np.broadcast_to(func(x), (nx,)), x0, periodic)

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.nx)

    def same_grid(self, other: "ScalarField1D") -> bool:
        return (self.nx, self.dx, self.x0, self.periodic) == (other.nx, other.dx, other.x0, other.periodic)

    def integral(self) -> float:
        """Discrete integral: rectangle sum on periodic grids, trapezoid otherwise."""
        if self.periodic:
            return float(np.sum(self.values) * self.dx)
        return float(np.trapezoid(self.values, dx=self.dx))

    _HEADER = "# nx,dx,x0,periodic"

    def to_csv(self, path=None) -> str:
        text = (f"{self._HEADER}\n# {self.nx},{self.dx!r},{self.x0!r},{int(self.periodic)}\n"
                + "\n".join(repr(float(v)) for v in self.values) + "\n")
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source) -> "ScalarField1D":
        lines = [ln for ln in _read_text(source).splitlines() if ln.strip()]
        if len(lines) < 2 or lines[0].strip() != cls._HEADER:
            raise FieldError("missing 1-D field CSV header")
        meta = lines[1].lstrip("#").strip().split(",")
        try:
            nx, dx, x0, per = int(meta[0]), float(meta[1]), float(meta[2]), bool(int(meta[3]))
            vals = [float(v) for v in lines[2:]]
        except (ValueError, IndexError) as exc:
            raise FieldError(f"malformed 1-D field CSV: {exc}") from exc
        if len(vals) != nx:
            raise FieldError(f"1-D field CSV has {len(vals)} values, expected {nx}")
        return cls(nx, dx, np.array(vals), x0, per)

    def to_json(self) -> dict:
        return {"grid": {"nx": self.nx, "dx": self.dx, "x0": self.x0, "periodic": self.periodic},
                "values": self.values.tolist()}

    @classmethod
    def from_json(cls, obj) -> "ScalarField1D":
        try:
            g = obj["grid"]
            vals = np.array(obj["values"], dtype=float)
            nx = int(g["nx"])
        except (KeyError, TypeError, ValueError) as exc:
            raise FieldError(f"malformed 1-D field JSON: {exc}") from exc
        if vals.shape != (nx,):
            raise FieldError(f"1-D field JSON has shape {vals.shape}, expected ({nx},)")
        return cls(nx, float(g["dx"]), vals, float(g.get("x0", 0.0)), bool(g.get("periodic", True)))


def _read_text(source) -> str:
    if isinstance(source, Path):
        return source.read_text()
    if isinstance(source, str) and "\n" not in source and Path(source).exists():
        return Path(source).read_text()
    return str(source)


def partial(field: ScalarField2D, axis: int) -> ScalarField2D:
    """Derivative of ``field`` along axis 1 (first index) or axis 2 (second index)."""
    g = field.grid
    if axis == 1:
        vals = diff_axis(field.values, g.dx, 0, g.periodic_x)
    elif axis == 2:
        vals = diff_axis(field.values, g.dy, 1, g.periodic_y)
    else:
        raise FieldError(f"axis must be 1 or 2, got {axis!r}")
    return ScalarField2D(g, vals)


def partial1d(field: ScalarField1D) -> ScalarField1D:
    return ScalarField1D.like(field, diff_axis(field.values, field.dx, 0, field.periodic))
