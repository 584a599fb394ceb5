"""Residual functional ``F(g) = max_t |g(t) - y0 - int_{t0}^t f(s, g(s)) ds|``.

``F(g) = 0`` exactly when ``g`` solves the problem on ``I``.  The integral is a
cumulative composite trapezoid over the nodes of ``g`` and the maximum is
taken over nodes; ``quadrature_slack`` bounds what both simplifications can
hide, so ``value + quadrature_slack`` is the certified figure.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import EvaluationError, GridError, UsageError
from .gridfn import GridFunction
from .problem import IvpProblem

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class ResidualReport:
    value: float
    argmax_t: float
    node_residuals: np.ndarray
    quadrature_slack: float

    def to_dict(self, verbose: bool = False) -> dict:
        out = {
            "value": self.value,
            "argmax_t": self.argmax_t,
            "quadrature_slack": self.quadrature_slack,
        }
        if verbose:
            out["node_residuals"] = [float(r) for r in self.node_residuals]
        return out

    def to_json(self, verbose: bool = False) -> str:
        return json.dumps(self.to_dict(verbose), indent=2)


def integrand_samples(p: IvpProblem, g: GridFunction, module: str = "residual") -> np.ndarray:
    """``f(t_j, g(t_j))`` at every node, shape ``(m + 1, n)``."""
    if g.n != p.n:
        raise GridError(f"dimension mismatch: function has n={g.n}, problem has n={p.n}")
    out = np.empty_like(g.values)
    times = g.times
    for j in range(g.m + 1):
        try:
            out[j] = p.f(times[j], g.values[j])
        except EvaluationError as exc:
            raise EvaluationError(f"[{module}] at node {j} (t={times[j]!r}): {exc}") from None
    return out


def cumulative_trapezoid(samples: np.ndarray, h: float) -> np.ndarray:
    """Running trapezoid integral, zero at the first node."""
    out = np.zeros_like(samples)
    np.cumsum(0.5 * h * (samples[1:] + samples[:-1]), axis=0, out=out[1:])
    return out


def quadrature_slack(samples: np.ndarray, h: float, length: float, values: np.ndarray) -> float:
    """Bound on the error of node-wise trapezoid residuals.

    The main term is the trapezoid error summed over cells, each cell taking
    the smaller of the smooth estimate ``h/12 * |second difference|`` and the
    monotone-cell bound ``h/2 * |first difference|`` (nearby differences are
    used so a kink is seen from both sides).  Added on top: the deviation of
    the exact running integral from its chord inside one cell, ``h/8 *
    max|first difference|``, plus accumulated rounding.
    """
    m = samples.shape[0] - 1
    first = np.max(np.abs(np.diff(samples, axis=0)), axis=1)  # per cell
    near_first = first.copy()
    near_first[1:] = np.maximum(near_first[1:], first[:-1])
    near_first[:-1] = np.maximum(near_first[:-1], first[1:])
    if m >= 2:
        second = np.max(np.abs(samples[2:] - 2 * samples[1:-1] + samples[:-2]), axis=1)  # per inner node
        near_second = np.empty(m)
        near_second[0] = second[0]
        near_second[-1] = second[-1]
        near_second[1:-1] = np.maximum(second[:-1], second[1:])
        cells = np.minimum(h / 12.0 * near_second, h / 2.0 * near_first)
    else:
        cells = h / 2.0 * near_first
    trapezoid = float(np.sum(cells))
    scale = max(1.0, float(np.max(np.abs(values))), length * float(np.max(np.abs(samples))))
    rounding = 8.0 * (m + 1) * _EPS * scale
    return trapezoid + h / 8.0 * float(np.max(first)) + rounding


def residual_functional(p: IvpProblem, g: GridFunction) -> ResidualReport:
    samples = integrand_samples(p, g)
    running = cumulative_trapezoid(samples, g.h)
    gap = g.values - np.asarray(p.y0) - running
    node_residuals = np.max(np.abs(gap), axis=1)
    j = int(np.argmax(node_residuals))
    slack = quadrature_slack(samples, g.h, g.length, g.values)
    node_residuals.setflags(write=False)
    return ResidualReport(
        value=float(node_residuals[j]),
        argmax_t=float(g.times[j]),
        node_residuals=node_residuals,
        quadrature_slack=slack,
    )


def is_solution(p: IvpProblem, g: GridFunction, tol: float, report: ResidualReport | None = None) -> bool:
    """``F(g) <= tol``; ``tol`` must exceed the quadrature slack to mean anything."""
    report = report or residual_functional(p, g)
    if not tol > report.quadrature_slack:
        raise UsageError(
            f"[residual] tolerance {tol!r} does not exceed quadrature slack {report.quadrature_slack!r}"
        )
    return report.value <= tol
