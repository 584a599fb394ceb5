"""Initial value problems ``y' = f(t, y), y(t0) = y0`` on a box.

The box is ``[t0, t0 + a] x {|y - y0|_inf <= b}`` and ``L`` bounds the max
norm of ``f`` on it.  Approximate solutions live on ``I = [t0, t0 + c]`` with
``c = min(a, b / L)``, which keeps every L-Lipschitz function starting at
``y0`` inside the box.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .errors import EvaluationError, ProblemError
from .rhs_lang import (
    BinOp,
    Call,
    Expression,
    Y,
    compile_expression,
    literal,
    max_variable_index,
    parse,
    substitute,
    to_source,
)

BOUND_SAFETY = 1.05
DEFAULT_BOUND_SAMPLES = 21

_FILE_FIELDS = ("label", "t0", "y0", "a", "b", "L", "rhs")


@dataclass(frozen=True)
class DomainBox:
    """Effective interval ``[t0, t0 + c]`` plus the state box.

    ``L`` is the bound actually used to derive ``c``; ``L_estimated`` tells
    whether it came from sampling rather than from the problem definition.
    """

    t0: float
    c: float
    box_lo: tuple[float, ...]
    box_hi: tuple[float, ...]
    L: float
    L_estimated: bool = False

    @property
    def t_end(self) -> float:
        return self.t0 + self.c


@dataclass(frozen=True, eq=False)
class IvpProblem:
    t0: float
    y0: tuple[float, ...]
    a: float
    b: float
    rhs: tuple[Expression, ...]
    L: float | None = None
    label: str = ""
    _compiled: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "y0", tuple(float(v) for v in self.y0))
        object.__setattr__(self, "rhs", tuple(self.rhs))
        n = len(self.y0)
        if n < 1:
            raise ProblemError("y0 must have at least one component")
        if len(self.rhs) != n:
            raise ProblemError(f"rhs has {len(self.rhs)} components but y0 has {n}")
        for name in ("t0", "a", "b"):
            if math.isnan(getattr(self, name)):
                raise ProblemError(f"{name} is NaN")
        if not math.isfinite(self.t0) or not all(math.isfinite(v) for v in self.y0):
            raise ProblemError("t0 and y0 must be finite")
        if not (math.isfinite(self.a) and self.a > 0):
            raise ProblemError(f"a must be finite and > 0, got {self.a!r}")
        if not self.b > 0:
            raise ProblemError(f"b must be > 0, got {self.b!r}")
        if self.L is not None and not (math.isfinite(self.L) and self.L > 0):
            raise ProblemError(f"L must be finite and > 0, got {self.L!r}")
        if math.isinf(self.b) and self.L is None:
            raise ProblemError("b = inf requires an explicit global bound L")
        for i, e in enumerate(self.rhs, start=1):
            k = max_variable_index(e)
            if k > n:
                raise ProblemError(f"rhs component {i} references y{k} but n = {n}")
        object.__setattr__(self, "_compiled", tuple(compile_expression(e) for e in self.rhs))

    @property
    def n(self) -> int:
        return len(self.y0)

    @property
    def bounded_box(self) -> bool:
        return math.isfinite(self.b)

    def f(self, t: float, y: Sequence[float]) -> np.ndarray:
        """Right-hand side as a length-n array."""
        return np.array([fn(t, y) for fn in self._compiled])

    def f_scalar(self, t: float, y: float) -> float:
        """Right-hand side of a scalar problem, without array overhead."""
        return self._compiled[0](t, (y,))

    def rhs_sources(self) -> list[str]:
        return [to_source(e) for e in self.rhs]

    @cached_property
    def domain(self) -> DomainBox:
        return effective_interval(self)

    def with_rhs(self, rhs: Sequence[Expression], *, L: float | None = None, b: float | None = None,
                 label: str | None = None) -> "IvpProblem":
        return IvpProblem(
            t0=self.t0,
            y0=self.y0,
            a=self.a,
            b=self.b if b is None else b,
            rhs=tuple(rhs),
            L=L,
            label=self.label if label is None else label,
        )

    def perturbed(self, delta: float) -> "IvpProblem":
        """The problem ``y' = f(t, y) + delta`` (componentwise).

        The bound grows to ``L + |delta|``; when no ``L`` was given the sampled
        estimate of the original problem is used as the base.
        """
        base_L = self.L if self.L is not None else self.domain.L
        shift = literal(abs(delta))
        op = "+" if delta >= 0 else "-"
        rhs = [BinOp(op, e, shift) for e in self.rhs]
        sign = "+" if delta >= 0 else "-"
        return self.with_rhs(rhs, L=base_L + abs(delta), label=f"{self.label} {sign} {abs(delta)!r}")

    # problem files ---------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return {
            "label": self.label,
            "t0": self.t0,
            "y0": list(self.y0),
            "a": self.a,
            "b": "inf" if math.isinf(self.b) else self.b,
            **({"L": self.L} if self.L is not None else {}),
            "rhs": self.rhs_sources(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "IvpProblem":
        if not isinstance(data, dict):
            raise ProblemError("a problem file must contain a single JSON object")
        unknown = sorted(set(data) - set(_FILE_FIELDS))
        if unknown:
            raise ProblemError(f"unknown field(s) in problem file: {', '.join(unknown)}")
        missing = [k for k in ("t0", "y0", "a", "b", "rhs") if k not in data]
        if missing:
            raise ProblemError(f"missing field(s) in problem file: {', '.join(missing)}")
        b = data["b"]
        if isinstance(b, str):
            if b.strip().lower() not in ("inf", "+inf"):
                raise ProblemError(f"b must be a number or \"inf\", got {b!r}")
            b = math.inf
        y0 = data["y0"]
        rhs = data["rhs"]
        if not isinstance(y0, list) or not isinstance(rhs, list):
            raise ProblemError("y0 and rhs must be lists")
        if not all(isinstance(s, str) for s in rhs):
            raise ProblemError("rhs entries must be expression strings")
        try:
            return cls(
                t0=_number(data["t0"], "t0"),
                y0=tuple(_number(v, "y0") for v in y0),
                a=_number(data["a"], "a"),
                b=_number(b, "b"),
                rhs=tuple(parse(s) for s in rhs),
                L=None if data.get("L") is None else _number(data["L"], "L"),
                label=str(data.get("label", "")),
            )
        except TypeError as exc:
            raise ProblemError(str(exc)) from None

    @classmethod
    def from_json(cls, text: str) -> "IvpProblem":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ProblemError(f"problem file is not valid JSON: {exc}") from None
        return cls.from_dict(data)

    @classmethod
    def load(cls, path: str | Path) -> "IvpProblem":
        return cls.from_json(Path(path).read_text())


def _number(value: Any, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ProblemError(f"{name} must be a number, got {value!r}")
    return float(value)


def make_problem(rhs: str | Sequence[str], *, t0: float = 0.0, y0: float | Sequence[float] = 0.0,
                 a: float = 1.0, b: float = 1.0, L: float | None = None, label: str = "") -> IvpProblem:
    """Convenience constructor taking expression strings."""
    if isinstance(rhs, str):
        rhs = [rhs]
    if np.ndim(y0) == 0:
        y0 = [y0] * len(rhs)
    return IvpProblem(t0=t0, y0=tuple(y0), a=a, b=b, rhs=tuple(parse(s) for s in rhs), L=L, label=label)


def estimate_bound(p: IvpProblem, samples_per_axis: int = DEFAULT_BOUND_SAMPLES) -> float:
    """``1.05 * max |f|`` over a tensor grid of ``[t0, t0+a] x box``.

    This is an estimate: sampling can miss an interior maximum, which is what
    the safety factor is for.  Callers who know a true bound should pass it as
    ``L`` instead.
    """
    if not p.bounded_box:
        raise ProblemError("cannot sample an unbounded box (b = inf)")
    if samples_per_axis < 2:
        raise ProblemError("samples_per_axis must be >= 2")
    ts = np.linspace(p.t0, p.t0 + p.a, samples_per_axis)
    axes = [np.linspace(y - p.b, y + p.b, samples_per_axis) for y in p.y0]
    best = 0.0
    for t in ts:
        for point in itertools.product(*axes):
            try:
                value = float(np.max(np.abs(p.f(t, point))))
            except EvaluationError as exc:
                raise EvaluationError(f"while estimating L at t={t!r}, y={list(point)}: {exc}") from None
            best = max(best, value)
    return BOUND_SAFETY * best


def effective_interval(p: IvpProblem, samples_per_axis: int = DEFAULT_BOUND_SAMPLES) -> DomainBox:
    """``c = min(a, b/L)`` for a finite box, ``c = a`` for ``b = inf``."""
    estimated = False
    L = p.L
    if L is None:
        if not p.bounded_box:
            raise ProblemError("b = inf requires an explicit global bound L")
        L = estimate_bound(p, samples_per_axis)
        estimated = True
        if L == 0.0:
            # f vanishes on the sampled box: any positive bound works
            L = BOUND_SAFETY * 1e-12
    c = min(p.a, p.b / L) if p.bounded_box else p.a
    lo = tuple(y - p.b for y in p.y0)
    hi = tuple(y + p.b for y in p.y0)
    return DomainBox(t0=p.t0, c=c, box_lo=lo, box_hi=hi, L=L, L_estimated=estimated)


def truncate_rhs(p: IvpProblem) -> IvpProblem:
    """Globally defined problem ``f~(t, y) = f(t, clamp(y, y0 - b, y0 + b))``.

    The clamp is componentwise (max-norm box).  The result has ``b = inf`` and
    the same ``L``; it agrees with ``f`` on the box.
    """
    if not p.bounded_box:
        raise ProblemError("truncation needs a finite box radius b")
    L = p.L if p.L is not None else p.domain.L
    mapping = {
        i: Call("max", (literal(y - p.b), Call("min", (Y(i), literal(y + p.b)))))
        for i, y in enumerate(p.y0, start=1)
    }
    rhs = [substitute(e, mapping) for e in p.rhs]
    return p.with_rhs(rhs, L=L, b=math.inf, label=f"{p.label} (truncated)" if p.label else "truncated")
