"""Uniform 1D grids on (0, L) with labeled boundary points, nodal fields,
and trapezoidal quadrature.

The left endpoint (index 0) is the vessel boundary, the right endpoint
(index n-1) the tumor boundary. Grids and fields are immutable after
construction and safe to share between concurrent runs.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainConfigError

__all__ = [
    "Grid1D",
    "Field",
    "make_grid",
    "make_field",
    "const_field",
    "field_from_callable",
    "integrate",
    "norm",
    "field_to_csv",
    "field_from_csv",
    "grid_to_json",
    "grid_from_json",
]


@dataclass(frozen=True)
class Grid1D:
    """Equispaced nodes on [0, L] with the two boundary points labeled."""

    L: float
    n: int
    h: float = field(init=False)
    nodes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        h = self.L / (self.n - 1)
        nodes = np.linspace(0.0, self.L, self.n)
        nodes.flags.writeable = False
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "nodes", nodes)

    @property
    def gamma1_index(self) -> int:
        """Index of the vessel-boundary node."""
        return 0

    @property
    def gamma2_index(self) -> int:
        """Index of the tumor-boundary node."""
        return self.n - 1

    def quadrature_weights(self) -> np.ndarray:
        """Trapezoidal weights: h at interior nodes, h/2 at the ends."""
        w = np.full(self.n, self.h)
        w[0] = w[-1] = 0.5 * self.h
        return w


def make_grid(L: float, n: int) -> Grid1D:
    """Build a uniform grid with n nodes on (0, L)."""
    if not np.isfinite(L) or L <= 0:
        raise DomainConfigError(f"domain length L must be positive and finite, got {L}")
    if int(n) != n or n < 3:
        raise DomainConfigError(f"node count n must be an integer >= 3, got {n}")
    return Grid1D(float(L), int(n))


@dataclass(frozen=True)
class Field:
    """Nodal scalar function on a Grid1D."""

    grid: Grid1D
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.n,):
            raise ValueError(
                f"field needs {self.grid.n} nodal values, got shape {vals.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must all be finite")
        if vals is self.values:
            vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)


def make_field(grid: Grid1D, values) -> Field:
    return Field(grid, np.asarray(values, dtype=float))


def const_field(grid: Grid1D, value: float) -> Field:
    return Field(grid, np.full(grid.n, float(value)))


def field_from_callable(grid: Grid1D, fn) -> Field:
    return Field(grid, np.asarray(fn(grid.nodes), dtype=float))


def integrate(f: Field) -> float:
    """Composite trapezoidal approximation of the integral over (0, L).

    Exact for affine integrands.
    """
    v = f.values
    return float(f.grid.h * (v.sum() - 0.5 * (v[0] + v[-1])))


def norm(f: Field, kind: str = "L2") -> float:
    """L2 (quadrature-based) or Linf norm of a field."""
    if kind == "L2":
        sq = Field(f.grid, f.values * f.values)
        return float(np.sqrt(max(integrate(sq), 0.0)))
    if kind == "Linf":
        return float(np.abs(f.values).max())
    raise ValueError(f"unknown norm kind {kind!r}; expected 'L2' or 'Linf'")


def field_to_csv(f: Field, fh) -> None:
    """Write "x,value" rows with a header to an open text handle."""
    fh.write("x,value\n")
    for x, v in zip(f.grid.nodes, f.values):
        fh.write(f"{float(x)!r},{float(v)!r}\n")


def field_from_csv(grid: Grid1D, fh) -> Field:
    """Read a field previously written by field_to_csv."""
    header = fh.readline().strip()
    if header != "x,value":
        raise ValueError(f"unexpected field CSV header {header!r}")
    vals = []
    for line in fh:
        line = line.strip()
        if line:
            vals.append(float(line.split(",")[1]))
    return make_field(grid, vals)


def grid_to_json(grid: Grid1D) -> str:
    return json.dumps({"L": grid.L, "n": grid.n}, sort_keys=True)


def grid_from_json(text: str | io.TextIOBase) -> Grid1D:
    if hasattr(text, "read"):
        text = text.read()
    d = json.loads(text)
    return make_grid(d["L"], d["n"])
