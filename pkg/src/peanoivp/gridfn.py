"""Piecewise-linear functions on uniform grids.

A ``GridFunction`` stores node values on ``t_start + j*h``, ``j = 0..m``, and
stands for its linear interpolant.  For that class the Lipschitz constant is
the largest chord slope and the composite trapezoid rule integrates exactly,
so both are computed without approximation.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Callable, Sequence

import numpy as np

from .errors import GridError

if TYPE_CHECKING:
    from .problem import IvpProblem

# relative tolerance when deciding that two grids coincide
GRID_RTOL = 1e-9


@dataclass(frozen=True)
class Grid:
    """``m + 1`` equally spaced nodes covering ``[t_start, t_start + length]``."""

    t_start: float
    length: float
    m: int

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise GridError(f"grid needs m >= 1 intervals, got {self.m!r}")
        if not (math.isfinite(self.length) and self.length > 0):
            raise GridError(f"grid length must be finite and > 0, got {self.length!r}")
        object.__setattr__(self, "m", int(self.m))

    @property
    def h(self) -> float:
        return self.length / self.m

    @property
    def times(self) -> np.ndarray:
        return self.t_start + self.h * np.arange(self.m + 1)


class GridFunction:
    """Vector-valued piecewise-linear function on a uniform grid.

    ``values`` has shape ``(m + 1, n)``; a 1-D input is treated as ``n = 1``.
    Instances are immutable (the value array is read-only).
    """

    __slots__ = ("t_start", "h", "values")

    def __init__(self, t_start: float, h: float, values):
        values = np.array(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2 or values.shape[0] < 2 or values.shape[1] < 1:
            raise GridError(f"values must have shape (m+1, n) with m >= 1, got {values.shape}")
        if not (math.isfinite(h) and h > 0):
            raise GridError(f"step must be finite and > 0, got {h!r}")
        if not np.all(np.isfinite(values)):
            bad = int(np.argmax(~np.isfinite(values).all(axis=1)))
            raise GridError(f"non-finite value at node {bad}")
        values.setflags(write=False)
        object.__setattr__(self, "t_start", float(t_start))
        object.__setattr__(self, "h", float(h))
        object.__setattr__(self, "values", values)

    def __setattr__(self, name, value):
        raise AttributeError("GridFunction is immutable")

    def __repr__(self) -> str:
        return f"GridFunction(t_start={self.t_start!r}, h={self.h!r}, m={self.m}, n={self.n})"

    # construction ----------------------------------------------------------

    @classmethod
    def on_grid(cls, grid: Grid, values) -> "GridFunction":
        return cls(grid.t_start, grid.h, values)

    @classmethod
    def sample(cls, fn: Callable[[np.ndarray], np.ndarray], grid: Grid) -> "GridFunction":
        """Sample a vectorised ``fn(times) -> (m+1,) or (m+1, n)`` on ``grid``."""
        return cls.on_grid(grid, fn(grid.times))

    # shape -----------------------------------------------------------------

    @property
    def m(self) -> int:
        return self.values.shape[0] - 1

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @property
    def length(self) -> float:
        return self.m * self.h

    @property
    def t_end(self) -> float:
        return self.t_start + self.m * self.h

    @property
    def times(self) -> np.ndarray:
        return self.t_start + self.h * np.arange(self.m + 1)

    @property
    def grid(self) -> Grid:
        return Grid(self.t_start, self.length, self.m)

    def component(self, i: int = 0) -> np.ndarray:
        return self.values[:, i]

    def node_index(self, t: float) -> int:
        """Index of the node at time ``t``; raises if ``t`` is not (close to) a node."""
        pos = (t - self.t_start) / self.h
        j = int(round(pos))
        if abs(pos - j) > 1e-7 or not 0 <= j <= self.m:
            raise GridError(f"t={t!r} is not a grid node")
        return j

    # operations -------------------------------------------------------------

    def evaluate(self, t: float) -> np.ndarray:
        """Linear interpolation; exact stored value at nodes.

        Times up to half a step outside the grid are clamped to the end nodes.
        """
        pos = (t - self.t_start) / self.h
        if not -0.5 <= pos <= self.m + 0.5:
            raise GridError(
                f"t={t!r} outside [{self.t_start!r}, {self.t_end!r}] (half-step padding allowed)"
            )
        if pos <= 0:
            return self.values[0].copy()
        if pos >= self.m:
            return self.values[-1].copy()
        j = int(math.floor(pos))
        s = pos - j
        if s == 0.0:
            return self.values[j].copy()
        return self.values[j] + s * (self.values[j + 1] - self.values[j])

    __call__ = evaluate

    def resample(self, grid: Grid) -> "GridFunction":
        """Interpolate onto another grid inside the padded domain."""
        return GridFunction.on_grid(grid, np.array([self.evaluate(t) for t in grid.times]))

    def slopes(self) -> np.ndarray:
        """Cell slopes, shape ``(m, n)``."""
        return np.diff(self.values, axis=0) / self.h

    def lipschitz_constant(self) -> float:
        """Max-norm Lipschitz constant of the interpolant (largest chord slope)."""
        return float(np.max(np.abs(np.diff(self.values, axis=0)))) / self.h

    def integral(self) -> np.ndarray:
        """Exact integral of the interpolant over its whole interval, per component."""
        v = self.values
        return self.h * (0.5 * (v[0] + v[-1]) + v[1:-1].sum(axis=0))

    def restrict(self, j0: int, j1: int) -> "GridFunction":
        """Sub-function on nodes ``j0..j1``."""
        if not 0 <= j0 < j1 <= self.m:
            raise GridError(f"bad node range [{j0}, {j1}] for m={self.m}")
        return GridFunction(self.t_start + j0 * self.h, self.h, self.values[j0:j1 + 1])

    def map_values(self, fn: Callable[[np.ndarray], np.ndarray]) -> "GridFunction":
        return GridFunction(self.t_start, self.h, fn(self.values))

    def _binary(self, other, op) -> "GridFunction":
        if isinstance(other, GridFunction):
            check_same_grid(self, other)
            other = other.values
        return GridFunction(self.t_start, self.h, op(self.values, other))

    def __add__(self, other):
        return self._binary(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __mul__(self, scalar: float):
        return GridFunction(self.t_start, self.h, self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return GridFunction(self.t_start, self.h, -self.values)

    # serialisation ------------------------------------------------------------

    def to_csv(self, file=None) -> str | None:
        """Write ``t,y1,...,yn`` rows with round-trip float precision.

        Returns the text when ``file`` is None, else writes to the path or
        file object.
        """
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t"] + [f"y{i}" for i in range(1, self.n + 1)])
        for t, row in zip(self.times, self.values):
            writer.writerow([repr(float(t))] + [repr(float(v)) for v in row])
        text = buf.getvalue()
        if file is None:
            return text
        if isinstance(file, (str, Path)):
            Path(file).write_text(text)
        else:
            file.write(text)
        return None

    @classmethod
    def from_csv(cls, source) -> "GridFunction":
        """Read a trajectory CSV from a path or file object; raw CSV text is accepted too."""
        if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
            text = Path(source).read_text()
        elif isinstance(source, str):
            text = source
        else:
            text = source.read()
        rows = list(csv.reader(io.StringIO(text)))
        rows = [r for r in rows if r]
        if not rows:
            raise GridError("empty trajectory CSV")
        header = [h.strip() for h in rows[0]]
        n = len(header) - 1
        if n < 1 or header != ["t"] + [f"y{i}" for i in range(1, n + 1)]:
            raise GridError(f"trajectory CSV header must be t,y1,...,yn; got {','.join(header)}")
        try:
            data = np.array([[float(x) for x in r] for r in rows[1:]], dtype=float)
        except ValueError as exc:
            raise GridError(f"bad number in trajectory CSV: {exc}") from None
        if data.ndim != 2 or data.shape[0] < 2 or data.shape[1] != n + 1:
            raise GridError("trajectory CSV needs at least two rows of n+1 columns")
        t = data[:, 0]
        m = len(t) - 1
        h = (t[-1] - t[0]) / m
        if not h > 0:
            raise GridError("trajectory times must increase")
        expected = t[0] + h * np.arange(m + 1)
        if np.max(np.abs(t - expected)) > GRID_RTOL * max(1.0, abs(t[-1] - t[0])) + 1e-12:
            raise GridError("trajectory times are not uniformly spaced")
        return cls(t[0], h, data[:, 1:])


def same_grid(g1: GridFunction, g2: GridFunction) -> bool:
    scale = max(1.0, abs(g1.t_start), abs(g1.t_end))
    return (
        g1.m == g2.m
        and g1.n == g2.n
        and abs(g1.t_start - g2.t_start) <= GRID_RTOL * scale
        and abs(g1.h - g2.h) <= GRID_RTOL * g1.h
    )


def check_same_grid(g1: GridFunction, g2: GridFunction) -> None:
    if not same_grid(g1, g2):
        raise GridError(f"grid mismatch: {g1!r} vs {g2!r}")


def sup_distance(g1: GridFunction, g2: GridFunction) -> float:
    """Max over nodes of the max-norm difference."""
    check_same_grid(g1, g2)
    return float(np.max(np.abs(g1.values - g2.values)))


def covers_interval(g: GridFunction, t0: float, length: float) -> bool:
    scale = max(1.0, abs(t0), abs(t0 + length))
    return abs(g.t_start - t0) <= GRID_RTOL * scale and abs(g.length - length) <= GRID_RTOL * scale


def in_set_A(g: GridFunction, p: "IvpProblem", slack: float = 0.0) -> bool:
    """Membership in the set of L-Lipschitz functions on I starting at y0.

    ``g`` must live on ``[t0, t0 + c]`` of ``p``; the initial value must match
    exactly and the Lipschitz constant may exceed ``L`` by at most ``slack``.
    """
    box = p.domain
    if g.n != p.n:
        raise GridError(f"dimension mismatch: function has n={g.n}, problem has n={p.n}")
    if not covers_interval(g, box.t0, box.c):
        raise GridError(
            f"domain mismatch: function on [{g.t_start!r}, {g.t_end!r}], I = [{box.t0!r}, {box.t_end!r}]"
        )
    if np.max(np.abs(g.values[0] - np.asarray(p.y0))) != 0.0:
        return False
    return g.lipschitz_constant() <= box.L + slack


def constant(value: Sequence[float] | float, grid: Grid) -> GridFunction:
    row = np.atleast_1d(np.asarray(value, dtype=float))
    return GridFunction.on_grid(grid, np.tile(row, (grid.m + 1, 1)))
