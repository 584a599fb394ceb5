"""Lower and upper solutions: certificates and bracketed construction.

A lower solution ``alpha`` satisfies ``alpha(t0) <= y0`` and
``alpha' <= f(t, alpha)``; an upper solution reverses both inequalities.
Candidates are piecewise-linear, so derivatives are cell slopes, compared
with ``f`` at the cell midpoints.

``lemma_segment`` and ``goodman_chain`` build an approximate solution between
ordered lower and upper solutions: each partition cell is bridged by a member
of the convex family joining two modified envelopes, picked by bisection so
that the endpoint satisfies the integral equation on that cell.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .errors import BracketError, EvaluationError, GridError, UsageError
from .gridfn import GridFunction, check_same_grid, covers_interval
from .problem import IvpProblem

DELTA_STRICT = 1e-9
ORDER_TOL = 1e-12
DEFAULT_TOL_G = 1e-10


@dataclass(frozen=True)
class BoundCertificate:
    kind: str  # "lower" or "upper"
    strict: bool
    initial_margin: float
    worst_margin: float
    worst_t: float
    verdict: bool
    h: float
    delta_strict: float
    slack: float
    label: str = ""

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _check_kind(kind: str) -> str:
    if kind not in ("lower", "upper"):
        raise UsageError(f"[bounds] kind must be 'lower' or 'upper', got {kind!r}")
    return kind


def _scalar(p: IvpProblem, what: str) -> None:
    if p.n != 1:
        raise UsageError(f"[bounds] {what} is defined for scalar problems only (n={p.n})")


def _f_at(p: IvpProblem, t: float, y: float) -> float:
    try:
        return p.f_scalar(t, y)
    except EvaluationError as exc:
        raise EvaluationError(f"[bounds] at t={t!r}: {exc}") from None


def _check_span(p: IvpProblem, g: GridFunction) -> None:
    scale = max(1.0, abs(p.t0), abs(p.t0 + p.a))
    if abs(g.t_start - p.t0) > 1e-9 * scale or g.t_end > p.t0 + p.a + 1e-9 * scale:
        raise GridError(
            f"[bounds] candidate on [{g.t_start!r}, {g.t_end!r}] must start at t0={p.t0!r} "
            f"and end by t0+a={p.t0 + p.a!r}"
        )


def verify(p: IvpProblem, g: GridFunction, kind: str, strict: bool = False, *,
           delta_strict: float = DELTA_STRICT, slack: float = 0.0) -> BoundCertificate:
    """Certify ``g`` as a lower or upper solution of a scalar problem.

    Margins are oriented so that positive is good: ``f(t, g) - g'`` for lower,
    ``g' - f(t, g)`` for upper, and ``y0 - g(t0)`` / ``g(t0) - y0`` at the
    start.  Strictness concerns the differential inequality only: it requires
    ``worst_margin > delta_strict``.  ``slack`` lets a non-strict check absorb
    discretisation error (``worst_margin >= -slack``).
    """
    _scalar(p, "verify")
    _check_kind(kind)
    _check_span(p, g)
    y = g.component(0)
    slopes = np.diff(y) / g.h
    times = g.times
    mids_t = 0.5 * (times[:-1] + times[1:])
    mids_y = 0.5 * (y[:-1] + y[1:])
    fmid = np.array([_f_at(p, t, v) for t, v in zip(mids_t, mids_y)])
    sign = 1.0 if kind == "lower" else -1.0
    margins = sign * (fmid - slopes)
    j = int(np.argmin(margins))
    worst = float(margins[j])
    initial = sign * (p.y0[0] - y[0])
    if strict:
        verdict = initial >= 0 and worst > delta_strict
    else:
        verdict = initial >= 0 and worst >= -slack
    return BoundCertificate(
        kind=kind,
        strict=strict,
        initial_margin=float(initial),
        worst_margin=worst,
        worst_t=float(mids_t[j]),
        verdict=bool(verdict),
        h=g.h,
        delta_strict=delta_strict,
        slack=slack,
        label=p.label,
    )


def check_ordering(alpha: GridFunction, beta: GridFunction) -> tuple[bool, float]:
    """``alpha <= beta`` at every node (to 1e-12); returns the smallest gap too."""
    check_same_grid(alpha, beta)
    gap = float(np.min(beta.values - alpha.values))
    return gap >= -ORDER_TOL, gap


def envelopes(p: IvpProblem, m: int, length: float | None = None) -> tuple[GridFunction, GridFunction]:
    """The lines ``y0 -/+ L (t - t0)`` on ``[t0, t0 + c]`` (scalar problems)."""
    _scalar(p, "envelopes")
    box = p.domain
    c = box.c if length is None else length
    g = GridFunction(p.t0, c / m, p.y0[0] + box.L * (np.arange(m + 1) * (c / m)))
    lower = GridFunction(p.t0, c / m, 2 * p.y0[0] - g.component(0))
    return lower, g


# --------------------------------------------------------------------------
# bracketed construction


def _chain_bound(p: IvpProblem, alpha: GridFunction, beta: GridFunction) -> float:
    """A bound for |f| between the envelopes and for their slopes."""
    return max(p.domain.L, alpha.lipschitz_constant(), beta.lipschitz_constant())


def _trapezoid(values: np.ndarray, h: float) -> float:
    return float(h * (0.5 * (values[0] + values[-1]) + values[1:-1].sum()))


@dataclass(frozen=True)
class SegmentResult:
    segment: GridFunction
    lam: float
    G: float
    iterations: int


def lemma_segment(p: IvpProblem, t1: float, t2: float, y1: float, alpha: GridFunction, beta: GridFunction,
                  *, tol_G: float = DEFAULT_TOL_G, L: float | None = None,
                  max_iter: int = 200) -> SegmentResult:
    """A piece on ``[t1, t2]`` starting at ``y1`` that satisfies the integral
    equation between its endpoints: ``g(t2) = y1 + int_{t1}^{t2} f(s, g(s)) ds``.

    ``t1`` and ``t2`` must be nodes of the common grid of ``alpha <= beta``.
    Right of ``t1`` the lower envelope is rerouted as ``max(alpha, y1 - L (t - t1))``
    and the upper one as ``min(beta, y1 + L (t - t1))``; their convex
    combinations all start at ``y1`` and are L-Lipschitz.  ``G`` is increasing
    from non-positive to non-negative along the family in the cases the
    construction guarantees, and bisection on the mixing weight finds
    ``|G| <= tol_G``.
    """
    _scalar(p, "lemma_segment")
    check_same_grid(alpha, beta)
    j1 = alpha.node_index(t1)
    j2 = alpha.node_index(t2)
    if not j1 < j2:
        raise UsageError(f"[bounds] need t1 < t2, got t1={t1!r}, t2={t2!r}")
    a = alpha.component(0)
    b = beta.component(0)
    if not a[j1] - ORDER_TOL <= y1 <= b[j1] + ORDER_TOL:
        raise BracketError(f"y1={y1!r} outside [alpha(t1), beta(t1)] = [{a[j1]!r}, {b[j1]!r}] at t1={t1!r}")
    if L is None:
        L = _chain_bound(p, alpha, beta)
    h = alpha.h
    times = alpha.times[j1:j2 + 1]
    dt = times - times[0]
    lower = np.maximum(a[j1:j2 + 1], y1 - L * dt)
    upper = np.minimum(b[j1:j2 + 1], y1 + L * dt)
    lower[0] = upper[0] = y1

    def member(lam: float) -> np.ndarray:
        g = (1.0 - lam) * lower + lam * upper
        g[0] = y1
        return g

    def G(g: np.ndarray) -> float:
        fs = np.array([_f_at(p, t, v) for t, v in zip(times, g)])
        return float(g[-1] - y1 - _trapezoid(fs, h))

    g_lo, g_hi = G(lower), G(upper)
    where = f"on [{t1!r}, {t2!r}]"
    if g_lo > tol_G:
        raise BracketError(f"G(lower envelope) = {g_lo!r} > 0 {where}: envelope is not a lower solution or L is too small")
    if g_hi < -tol_G:
        raise BracketError(f"G(upper envelope) = {g_hi!r} < 0 {where}: envelope is not an upper solution or L is too small")
    if g_lo > 0:
        return SegmentResult(_segment(alpha, j1, lower), 0.0, g_lo, 0)
    if g_hi < 0:
        return SegmentResult(_segment(alpha, j1, upper), 1.0, g_hi, 0)

    lo, hi = 0.0, 1.0
    best_lam, best_G = (0.0, g_lo) if abs(g_lo) <= abs(g_hi) else (1.0, g_hi)
    for it in range(1, max_iter + 1):
        mid = 0.5 * (lo + hi)
        g_mid = G(member(mid))
        if abs(g_mid) < abs(best_G):
            best_lam, best_G = mid, g_mid
        if abs(g_mid) <= tol_G:
            return SegmentResult(_segment(alpha, j1, member(mid)), mid, g_mid, it)
        if g_mid < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 4 * np.finfo(float).eps:
            break
    if abs(best_G) <= tol_G:
        return SegmentResult(_segment(alpha, j1, member(best_lam)), best_lam, best_G, max_iter)
    raise BracketError(f"bisection failed to reach |G| <= {tol_G!r} {where}; best |G| = {abs(best_G)!r}")


def _segment(template: GridFunction, j1: int, values: np.ndarray) -> GridFunction:
    return GridFunction(template.t_start + j1 * template.h, template.h, values)


@dataclass(frozen=True)
class ChainResult:
    chain: GridFunction
    partition: tuple[float, ...]
    steps_per_segment: int
    L: float
    eps: float
    max_abs_G: float
    tol_chain: float


def goodman_chain(p: IvpProblem, alpha: GridFunction, beta: GridFunction, eps: float, *,
                  tol_G: float = DEFAULT_TOL_G) -> ChainResult:
    """Chain segments over a partition of mesh ``< eps / (2L)`` starting at ``(t0, y0)``.

    Partition points are grid nodes, so the grid step must be below
    ``eps / (2L)``.  The chain's residual is below ``eps`` up to
    ``tol_chain`` (accumulated ``|G|`` plus quadrature).
    """
    _scalar(p, "goodman_chain")
    if not eps > 0:
        raise UsageError(f"[bounds] eps must be > 0, got {eps!r}")
    check_same_grid(alpha, beta)
    box = p.domain
    if not covers_interval(alpha, box.t0, box.c):
        raise GridError(f"[bounds] envelopes must live on I = [{box.t0!r}, {box.t_end!r}]")
    ordered, gap = check_ordering(alpha, beta)
    if not ordered:
        raise BracketError(f"envelopes are not ordered: min(beta - alpha) = {gap!r}")
    a0, b0 = alpha.component(0)[0], beta.component(0)[0]
    if not a0 - ORDER_TOL <= p.y0[0] <= b0 + ORDER_TOL:
        raise BracketError(f"y0={p.y0[0]!r} is not between alpha(t0)={a0!r} and beta(t0)={b0!r}")
    L = _chain_bound(p, alpha, beta)
    mesh = eps / (2 * L)
    steps = math.ceil(mesh / alpha.h) - 1  # largest s with s*h < mesh
    while steps >= 1 and steps * alpha.h >= mesh:
        steps -= 1
    if steps < 1:
        raise UsageError(
            f"[bounds] grid step {alpha.h!r} is not below eps/(2L) = {mesh!r}; refine the envelopes' grid"
        )
    m = alpha.m
    nodes = list(range(0, m, steps)) + [m]
    values = np.empty(m + 1)
    values[0] = p.y0[0]
    y = p.y0[0]
    max_G = 0.0
    times = alpha.times
    for j1, j2 in zip(nodes, nodes[1:]):
        seg = lemma_segment(p, times[j1], times[j2], y, alpha, beta, tol_G=tol_G, L=L)
        values[j1:j2 + 1] = seg.segment.component(0)
        y = values[j2]
        max_G = max(max_G, abs(seg.G))
    chain = GridFunction(alpha.t_start, alpha.h, values)
    tol_chain = (len(nodes) - 1) * tol_G
    return ChainResult(
        chain=chain,
        partition=tuple(float(times[j]) for j in nodes),
        steps_per_segment=steps,
        L=L,
        eps=eps,
        max_abs_G=max_G,
        tol_chain=tol_chain,
    )


# --------------------------------------------------------------------------
# quasimonotonicity


@dataclass(frozen=True)
class QuasimonotoneWitness:
    component: int  # 1-based index i of the decreasing f_i
    t: float
    y: tuple[float, ...]
    y_bar: tuple[float, ...]
    f_y: float
    f_y_bar: float


@dataclass(frozen=True)
class QuasimonotoneReport:
    verdict: bool
    witness: QuasimonotoneWitness | None
    samples_checked: int
    seed: int

    def to_dict(self) -> dict:
        out = {
            "verdict": self.verdict,
            "evidence": "sampled: no violation found" if self.verdict else "counterexample",
            "samples_checked": self.samples_checked,
            "seed": self.seed,
            "witness": None if self.witness is None else asdict(self.witness),
        }
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _pairs_grid(p: IvpProblem, i: int, levels: int):
    """Deterministic pairs: y at grid levels, y_bar raising one other coordinate to the top."""
    lo = np.asarray(p.y0) - p.b
    hi = np.asarray(p.y0) + p.b
    ticks = np.linspace(0.0, 1.0, levels)
    for t_frac in (0.0, 0.5, 1.0):
        t = p.t0 + t_frac * p.a
        for j in range(p.n):
            if j == i:
                continue
            for base in ticks:
                for top in ticks:
                    if top <= base:
                        continue
                    y = lo + base * (hi - lo)
                    y_bar = y.copy()
                    y_bar[j] = lo[j] + top * (hi[j] - lo[j])
                    yield t, y, y_bar


def check_quasimonotone(p: IvpProblem, samples: int = 10_000, seed: int = 0) -> QuasimonotoneReport:
    """Search for a violation of quasimonotone nondecrease.

    For each component ``i`` compare ``f_i(t, y)`` with ``f_i(t, y_bar)`` where
    ``y <= y_bar`` and ``y_i = y_bar_i``.  A returned witness is a genuine
    counterexample; ``verdict=True`` only means none was found among
    ``samples_checked`` pairs.
    """
    if not p.bounded_box:
        raise UsageError("[bounds] quasimonotone sampling needs a finite box")
    if samples < 1:
        raise UsageError("[bounds] samples must be >= 1")
    if p.n == 1:
        return QuasimonotoneReport(True, None, 0, seed)
    rng = np.random.default_rng(seed)
    lo = np.asarray(p.y0) - p.b
    hi = np.asarray(p.y0) + p.b
    checked = 0

    def violated(i, t, y, y_bar):
        fy = p.f(t, y)[i]
        fb = p.f(t, y_bar)[i]
        tol = 1e-12 * max(1.0, abs(fy), abs(fb))
        if fy > fb + tol:
            return QuasimonotoneWitness(i + 1, float(t), tuple(map(float, y)), tuple(map(float, y_bar)),
                                        float(fy), float(fb))
        return None

    per_component = max(1, samples // p.n)
    for i in range(p.n):
        budget = per_component
        for t, y, y_bar in _pairs_grid(p, i, levels=5):
            if budget == 0:
                break
            checked += 1
            budget -= 1
            w = violated(i, t, y, y_bar)
            if w:
                return QuasimonotoneReport(False, w, checked, seed)
        for _ in range(budget):
            t = p.t0 + rng.random() * p.a
            y = lo + rng.random(p.n) * (hi - lo)
            y_bar = y + rng.random(p.n) * (hi - y)
            y_bar[i] = y[i]
            checked += 1
            w = violated(i, t, y, y_bar)
            if w:
                return QuasimonotoneReport(False, w, checked, seed)
    return QuasimonotoneReport(True, None, checked, seed)
