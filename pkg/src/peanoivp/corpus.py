"""Built-in problems with closed-form solutions used as test oracles."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import UsageError
from .gridfn import Grid, GridFunction
from .problem import IvpProblem, make_problem


class UnknownProblemError(UsageError, KeyError):
    module = "corpus"

    def __str__(self) -> str:  # KeyError would repr() the message
        return UsageError.__str__(self)


@dataclass(frozen=True)
class Oracle:
    """A closed-form solution, or a one-parameter family of them.

    ``func(times, param)`` returns an array of shape ``(len(times), n)``.
    ``param_range(c)`` gives the admissible parameter interval on ``[t0, t0+c]``
    and ``samples`` a few representative parameter values for checks.
    """

    name: str
    func: Callable[[np.ndarray, float | None], np.ndarray]
    param_name: str | None = None
    param_range: Callable[[float], tuple[float, float]] | None = None
    samples: Callable[[float], tuple[float, ...]] | None = None

    def sample(self, grid: Grid, param: float | None = None) -> GridFunction:
        if self.param_name is not None:
            if param is None:
                raise UsageError(f"[corpus] oracle {self.name!r} needs {self.param_name}")
            lo, hi = self.param_range(grid.length)
            if not lo - 1e-12 <= param <= hi + 1e-12:
                raise UsageError(
                    f"[corpus] {self.param_name}={param!r} outside [{lo!r}, {hi!r}] for oracle {self.name!r}"
                )
        return GridFunction.on_grid(grid, self.func(grid.times, param))

    def parameter_values(self, c: float) -> tuple[float | None, ...]:
        if self.param_name is None:
            return (None,)
        return self.samples(c)


@dataclass(frozen=True)
class CorpusEntry:
    problem: IvpProblem
    oracles: dict[str, Oracle] = field(default_factory=dict)
    notes: str = ""
    certified: bool = True  # False: demonstration only, excluded from certificate runs


# closed forms --------------------------------------------------------------

def _switched_cube(t: np.ndarray, start: float) -> np.ndarray:
    s = np.maximum(t - start, 0.0)
    return s**3


def _peano_family(t, t2):
    return _switched_cube(t, t2)[:, None]


def _uncoupled(t, a):
    s = np.maximum(t - a, 0.0)
    return np.column_stack([s**3, -(s**4) / 4.0])


def _phi(x: np.ndarray) -> np.ndarray:
    # x^3 sin(1/x), continuous extension phi(0) = 0
    out = np.zeros_like(x)
    nz = x != 0
    out[nz] = x[nz] ** 3 * np.sin(1.0 / x[nz])
    return out


def _oscillating(t, a):
    s = np.maximum(t - a, 0.0)
    return np.column_stack([s**3, _phi(s)])


def _switch_samples(c: float) -> tuple[float, ...]:
    return (0.0, c / 4, c / 2, 3 * c / 4, c)


def _whole_range(c: float) -> tuple[float, float]:
    return (0.0, c)


# phi'(cbrt(y1)) with 1/x written as x/(x^2 + 1e-300): equal to 1/x
# in binary64 away from 0 and finite (giving phi'(0) = 0) at x = 0.
_OSC_INV = "(cbrt(y1)/(cbrt(y1)^2 + 1e-300))"
_OSC_RHS2 = f"3*cbrt(y1)^2*sin({_OSC_INV}) - cbrt(y1)*cos({_OSC_INV})"


def _build() -> dict[str, CorpusEntry]:
    peano = make_problem("3*cbrt(y1)^2", t0=0.0, y0=0.0, a=1.0, b=1.0, L=3.0, label="peano_cubed")
    family = make_problem("3*cbrt(y1)^2", t0=0.0, y0=0.0, a=1.0, b=1.0, L=3.0, label="peano_family")
    cubic = Oracle("cubic", lambda t, _: (t**3)[:, None])
    zero = Oracle("zero", lambda t, _: np.zeros((len(t), 1)))
    switched = Oracle("family", _peano_family, "t2", _whole_range, _switch_samples)
    entries = {
        "peano_cubed": CorpusEntry(
            peano,
            {"cubic": cubic, "zero": zero},
            "Peano's y' = 3 y^(2/3), y(0) = 0. Greatest solution t^3, least solution 0 on t >= 0.",
        ),
        "peano_family": CorpusEntry(
            family,
            {"family": switched, "cubic": cubic, "zero": zero},
            "All right-sided solutions of Peano's problem: 0 up to t2, then (t - t2)^3.",
        ),
        "blowup_tan": CorpusEntry(
            make_problem("1 + y1^2", t0=0.0, y0=0.0, a=1.0, b=1.0, L=2.0, label="blowup_tan"),
            {"tan": Oracle("tan", lambda t, _: np.tan(t)[:, None])},
            "y' = 1 + y^2, y(0) = 0; unique solution tan t, which has no extension to [0, pi].",
        ),
        "uncoupled_system": CorpusEntry(
            make_problem(["3*cbrt(y1)^2", "-y1"], t0=0.0, y0=[0.0, 0.0], a=1.0, b=1.0, L=3.0,
                         label="uncoupled_system"),
            {"family": Oracle("family", _uncoupled, "a_switch", _whole_range, _switch_samples)},
            "y1' = 3 y1^(2/3), y2' = -y1: a larger y1 gives a smaller y2, so no solution is "
            "greatest in both components; f2 is not quasimonotone.",
        ),
        "oscillating_system": CorpusEntry(
            make_problem(["3*cbrt(y1)^2", _OSC_RHS2], t0=0.0, y0=[0.0, 0.0], a=1.0, b=1.0, L=4.0,
                         label="oscillating_system"),
            {"family": Oracle("family", _oscillating, "a_switch", _whole_range, _switch_samples)},
            "y1' = 3 y1^(2/3), y2' = phi'(y1^(1/3)) with phi(x) = x^3 sin(1/x): second components of "
            "different solutions are incomparable. Demonstration only.",
            certified=False,
        ),
        "linear_unit": CorpusEntry(
            make_problem("1", t0=0.0, y0=0.0, a=1.0, b=math.inf, L=1.0, label="linear_unit"),
            {"line": Oracle("line", lambda t, _: t[:, None])},
            "y' = 1, y(0) = 0 with unbounded box; unique solution t.",
        ),
    }
    return entries


_ENTRIES = _build()


def names() -> list[str]:
    return list(_ENTRIES)


def get(name: str) -> CorpusEntry:
    try:
        return _ENTRIES[name]
    except KeyError:
        raise UnknownProblemError(f"unknown corpus problem {name!r}; available: {', '.join(names())}") from None


def peano_family(t2: float, grid: Grid | int, c: float | None = None) -> GridFunction:
    """Member of Peano's family: 0 up to ``t2``, then ``(t - t2)^3``.

    ``grid`` is a ``Grid`` or a cell count on ``[0, c]`` (``c`` defaults to the
    corpus interval 1/3).
    """
    entry = _ENTRIES["peano_family"]
    if not isinstance(grid, Grid):
        grid = Grid(0.0, entry.problem.domain.c if c is None else c, grid)
    return entry.oracles["family"].sample(grid, t2)


def uncoupled_family(a_switch: float, grid: Grid | int, c: float | None = None) -> GridFunction:
    """Solution of the uncoupled system switching on at ``a_switch``."""
    entry = _ENTRIES["uncoupled_system"]
    if not isinstance(grid, Grid):
        grid = Grid(0.0, entry.problem.domain.c if c is None else c, grid)
    return entry.oracles["family"].sample(grid, a_switch)
