"""Least and greatest solutions of scalar problems.

The greatest solution is approached from above by Euler polygons of the
perturbed problems ``y' = f + 1/k``; each is a strict upper solution of the
original problem and the rungs decrease as ``k`` grows.  The least solution
is the mirror image with ``f - 1/k``.  All rungs share one grid on the
original interval ``[t0, t0 + c]`` so their ordering can be checked node by
node.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import BoxExitError, NumericalFailure, UsageError
from .gridfn import GridFunction, check_same_grid, sup_distance
from .integrators import euler_polygon
from .problem import IvpProblem
from .residual import residual_functional

DEFAULT_SCHEDULE = (4, 8, 16, 32, 64, 128, 256)


class LadderError(NumericalFailure):
    module = "extremal"


@dataclass(frozen=True)
class ExtremalResult:
    side: str
    approx: GridFunction
    ladder: tuple[tuple[int, GridFunction], ...]
    integrals: tuple[float, ...]
    final_residual: float
    final_slack: float
    converged: bool
    monotonicity_violation: float
    last_step: float  # sup distance between the last two rungs
    label: str = ""
    tol: float = 0.0

    @property
    def schedule(self) -> tuple[int, ...]:
        return tuple(k for k, _ in self.ladder)

    def to_dict(self, verbose: bool = False) -> dict:
        out = {
            "label": self.label,
            "side": self.side,
            "k_schedule": list(self.schedule),
            "k_final": self.ladder[-1][0],
            "m": self.approx.m,
            "tol": self.tol,
            "converged": self.converged,
            "last_step": self.last_step,
            "monotonicity_violation": self.monotonicity_violation,
            "integrals": list(self.integrals),
            "final_residual": self.final_residual,
            "quadrature_slack": self.final_slack,
        }
        if verbose:
            out["ladder"] = [
                {"k": k, "values": [float(v) for v in g.component(0)]} for k, g in self.ladder
            ]
        return out

    def to_json(self, verbose: bool = False) -> str:
        return json.dumps(self.to_dict(verbose), indent=2)


def perturbation_rung(p: IvpProblem, k: int, m: int, side: str) -> GridFunction:
    """Euler polygon of ``y' = f +/- 1/k`` on the original interval of ``p``."""
    delta = 1.0 / k if side == "greatest" else -1.0 / k
    q = p.perturbed(delta)
    try:
        return euler_polygon(q, m, length=p.domain.c)
    except BoxExitError as exc:
        raise BoxExitError(
            f"rung k={k} left the box; the perturbation adds up to a/k = {p.a / k!r} of drift, "
            f"so b must allow for it ({exc})",
            exc.t,
            module="extremal",
        ) from None


def _validate(p: IvpProblem, k_schedule: Sequence[int], m: int, tol: float) -> list[int]:
    if p.n != 1:
        raise UsageError(f"[extremal] extremal solutions are computed for scalar problems only (n={p.n})")
    ks = [int(k) for k in k_schedule]
    if not ks:
        raise UsageError("[extremal] empty k schedule")
    if any(k < 2 for k in ks) or any(b <= a for a, b in zip(ks, ks[1:])):
        raise UsageError(f"[extremal] k schedule must be strictly increasing with k >= 2, got {ks}")
    if int(m) != m or m < 2:
        raise UsageError(f"[extremal] m must be an integer >= 2, got {m!r}")
    if not tol > 0:
        raise UsageError(f"[extremal] tol must be > 0, got {tol!r}")
    return ks


def _ladder(p: IvpProblem, side: str, k_schedule: Sequence[int], m: int, tol: float) -> ExtremalResult:
    ks = _validate(p, k_schedule, m, tol)
    rungs: list[tuple[int, GridFunction]] = []
    violation = 0.0
    converged = False
    last_step = float("nan")
    for k in ks:
        rung = perturbation_rung(p, k, m, side)
        if rungs:
            prev = rungs[-1][1]
            # greatest: rungs decrease with k; least: rungs increase
            excess = rung.values - prev.values if side == "greatest" else prev.values - rung.values
            step_violation = max(0.0, float(np.max(excess)))
            violation = max(violation, step_violation)
            if violation > 10 * tol:
                raise LadderError(
                    f"ladder not monotone: rung k={k} crosses rung k={rungs[-1][0]} by {violation!r} "
                    f"> 10*tol; the grid (m={m}) is too coarse"
                )
            last_step = sup_distance(rung, prev)
            rungs.append((k, rung))
            if last_step <= tol:
                converged = True
                break
        else:
            rungs.append((k, rung))
    approx = rungs[-1][1]
    report = residual_functional(p, approx)
    return ExtremalResult(
        side=side,
        approx=approx,
        ladder=tuple(rungs),
        integrals=tuple(float(g.integral()[0]) for _, g in rungs),
        final_residual=report.value,
        final_slack=report.quadrature_slack,
        converged=converged,
        monotonicity_violation=violation,
        last_step=last_step,
        label=p.label,
        tol=tol,
    )


def greatest_solution(p: IvpProblem, k_schedule: Sequence[int] = DEFAULT_SCHEDULE, m: int = 4096,
                      tol: float = 1e-3) -> ExtremalResult:
    """Approximate the greatest solution by the decreasing ladder ``y' = f + 1/k``.

    Stops once consecutive rungs are within ``tol`` in sup distance;
    ``converged`` is False if the schedule runs out first.
    """
    return _ladder(p, "greatest", k_schedule, m, tol)


def least_solution(p: IvpProblem, k_schedule: Sequence[int] = DEFAULT_SCHEDULE, m: int = 4096,
                   tol: float = 1e-3) -> ExtremalResult:
    """Mirror image of ``greatest_solution`` with ``y' = f - 1/k``."""
    return _ladder(p, "least", k_schedule, m, tol)


def integral_rank(p: IvpProblem, candidates: Sequence[GridFunction]) -> list[tuple[int, float]]:
    """Candidates' integrals over ``I``, largest first; ties keep input order."""
    if not candidates:
        return []
    first = candidates[0]
    for g in candidates[1:]:
        check_same_grid(first, g)
    if first.n != 1 or p.n != 1:
        raise UsageError("[extremal] integral ranking is defined for scalar problems")
    box = p.domain
    if abs(first.t_start - box.t0) > 1e-9 * max(1.0, abs(box.t0)) or abs(first.length - box.c) > 1e-9 * max(1.0, box.c):
        raise UsageError("[extremal] candidates must live on the interval I of the problem")
    values = [(i, float(g.integral()[0])) for i, g in enumerate(candidates)]
    return sorted(values, key=lambda item: -item[1])


def schedule_up_to(kmax: int, kmin: int = 4) -> list[int]:
    """Powers of two from ``kmin`` to ``kmax`` inclusive (``kmax`` appended if not a power)."""
    if kmin < 2 or kmax < kmin:
        raise UsageError(f"[extremal] need 2 <= kmin <= kmax, got kmin={kmin}, kmax={kmax}")
    ks = []
    k = kmin
    while k <= kmax:
        ks.append(k)
        k *= 2
    if ks[-1] != kmax:
        ks.append(kmax)
    return ks
