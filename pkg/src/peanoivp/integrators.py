"""Minimizing sequences for the residual functional: Tonelli and Euler.

Both schemes are explicit and causal.  At every node they check that the
iterate is still in the box and that ``|f|`` along it respects the claimed
bound ``L``; either failure means the problem's hypotheses do not hold for
the given ``L`` and is raised rather than silently integrated through.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import BoundViolationError, BoxExitError, EvaluationError, UsageError
from .gridfn import Grid, GridFunction
from .problem import IvpProblem
from .residual import ResidualReport, residual_functional

# relative allowance before a value counts as violating L or leaving the box
_REL_TOL = 1e-9


@dataclass(frozen=True)
class TonelliParams:
    k: int
    m: int

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 2:
            raise UsageError(f"[integrators] Tonelli needs k >= 2, got {self.k!r}")
        if int(self.m) != self.m or self.m % self.k != 0 or self.m // self.k < 2:
            raise UsageError(
                f"[integrators] grid size m={self.m!r} must be a multiple of k={self.k} with m/k >= 2"
            )

    @property
    def delay_steps(self) -> int:
        return self.m // self.k


class _Guard:
    """Per-node box and bound checks shared by both schemes."""

    def __init__(self, p: IvpProblem, L: float):
        self.p = p
        self.y0 = np.asarray(p.y0)
        self.b = p.b
        self.L = L
        self.L_estimated = p.L is None

    def state(self, t: float, y: np.ndarray) -> None:
        if math.isfinite(self.b):
            dist = float(np.max(np.abs(y - self.y0)))
            if dist > self.b * (1 + _REL_TOL):
                raise BoxExitError(
                    f"iterate left the box: |y - y0| = {dist!r} > b = {self.b!r}; "
                    f"L = {self.L!r}{' (estimated)' if self.L_estimated else ''} underestimates |f|",
                    t,
                )

    def slope(self, t: float, y: np.ndarray) -> np.ndarray:
        try:
            fy = self.p.f(t, y)
        except EvaluationError as exc:
            err = EvaluationError(f"[integrators] at t={float(t)!r}: {exc}")
            err.t = float(t)
            raise err from None
        size = float(np.max(np.abs(fy)))
        if size > self.L * (1 + _REL_TOL):
            raise BoundViolationError(
                f"|f(t, y)| = {size!r} exceeds the claimed bound L = {self.L!r}; "
                "the boundedness hypothesis fails along the trajectory",
                t,
            )
        return fy


def _interval(p: IvpProblem, length: float | None) -> tuple[float, float]:
    box = p.domain
    if length is None:
        return box.c, box.L
    if not 0 < length <= p.a * (1 + 1e-12):
        raise UsageError(f"[integrators] interval length {length!r} must lie in (0, a={p.a!r}]")
    return length, box.L


def tonelli(p: IvpProblem, params: TonelliParams, *, length: float | None = None) -> GridFunction:
    """Tonelli's delayed iterate ``g_k`` on ``[t0, t0 + c]`` with ``m`` cells.

    ``g_k = y0`` up to ``t0 + c/k``; afterwards ``g_k(t) = y0 + int_{t0}^{t - c/k}
    f(s, g_k(s)) ds``.  The delay is exactly ``m/k`` cells, so the integral is
    a trapezoid sum over nodes that are already known.  ``length`` overrides
    ``c`` (at most ``a``).
    """
    c, L = _interval(p, length)
    grid = Grid(p.t0, c, params.m)
    h = grid.h
    times = grid.times
    d = params.delay_steps
    guard = _Guard(p, L)
    y0 = np.asarray(p.y0, dtype=float)
    m = params.m
    values = np.empty((m + 1, p.n))
    slopes = np.empty((m + 1, p.n))
    running = np.zeros((m + 1, p.n))
    for j in range(m + 1):
        values[j] = y0 if j <= d else y0 + running[j - d]
        guard.state(times[j], values[j])
        slopes[j] = guard.slope(times[j], values[j])
        if j > 0:
            running[j] = running[j - 1] + 0.5 * h * (slopes[j - 1] + slopes[j])
    return GridFunction.on_grid(grid, values)


def euler_polygon(p: IvpProblem, m: int, *, length: float | None = None) -> GridFunction:
    """Forward Euler polygon with ``m`` uniform cells on ``[t0, t0 + c]``."""
    if int(m) != m or m < 2:
        raise UsageError(f"[integrators] Euler needs m >= 2, got {m!r}")
    m = int(m)
    c, L = _interval(p, length)
    grid = Grid(p.t0, c, m)
    h = grid.h
    times = grid.times
    guard = _Guard(p, L)
    values = np.empty((m + 1, p.n))
    values[0] = p.y0
    for j in range(m):
        guard.state(times[j], values[j])
        values[j + 1] = values[j] + h * guard.slope(times[j], values[j])
    guard.state(times[m], values[m])
    return GridFunction.on_grid(grid, values)


@dataclass(frozen=True)
class SolveCertificate:
    """Outcome of one approximate solve, in the form the CLI reports it."""

    label: str
    method: str
    k: int | None
    m: int
    c: float
    L: float
    L_estimated: bool
    residual: float
    argmax_t: float
    bound_Lc_over_k: float | None
    quadrature_slack: float

    @property
    def holds(self) -> bool:
        """Residual within ``L c / k + slack`` (Tonelli) or within slack (Euler on exact data)."""
        if self.bound_Lc_over_k is None:
            return True
        return self.residual <= self.bound_Lc_over_k + self.quadrature_slack

    def to_dict(self) -> dict:
        out = asdict(self)
        out["certificate_holds"] = self.holds
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def solve(p: IvpProblem, method: str = "tonelli", *, k: int | None = None, m: int | None = None
          ) -> tuple[GridFunction, SolveCertificate, ResidualReport]:
    """Run one scheme and certify its residual."""
    box = p.domain
    if method == "tonelli":
        if k is None:
            raise UsageError("[integrators] Tonelli needs k")
        params = TonelliParams(k, m if m is not None else 100 * k)
        g = tonelli(p, params)
        bound = box.L * box.c / params.k
        m_used = params.m
    elif method == "euler":
        m_used = m if m is not None else 1000
        g = euler_polygon(p, m_used)
        bound = None
    else:
        raise UsageError(f"[integrators] unknown method {method!r} (tonelli or euler)")
    report = residual_functional(p, g)
    cert = SolveCertificate(
        label=p.label,
        method=method,
        k=k if method == "tonelli" else None,
        m=m_used,
        c=box.c,
        L=box.L,
        L_estimated=box.L_estimated,
        residual=report.value,
        argmax_t=report.argmax_t,
        bound_Lc_over_k=bound,
        quadrature_slack=report.quadrature_slack,
    )
    return g, cert, report
