"""Line-search ascent on the oracle: gradient ascent, nonlinear CG and quasi-Newton.

Everything here maximises. The iterate update is ``u <- u + alpha p`` with
``p`` an ascent direction (``g . p > 0``). Two sign conventions follow from
the maximisation framing and are fixed once here:

* conjugate-gradient directions are ``p = g + beta p_prev``, so that ``p``
  stays conjugate to the previous ascent direction;
* quasi-Newton pairs use ``y = g_old - g_new`` (the gradient change of
  ``-f``), so ``H`` approximates the inverse of the *negative* Hessian and
  stays positive definite on concave landscapes.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np
from numpy.typing import NDArray

from .oracle import OracleAnswer

logger = logging.getLogger(__name__)

Vector = NDArray[np.float64]

METHODS = ("ga", "cg-fr", "cg-pr", "cg-hs", "qn-dfp", "qn-bfgs")
LINE_SEARCHES = ("backtracking", "wolfe")


class OracleLike(Protocol):
    queries_total: int
    evaluations: int

    def fitness(self, u: Vector, repeats: int = 1) -> float: ...

    def query(self, u: Vector) -> OracleAnswer: ...


@dataclass
class StopRule:
    max_iters: int | None = None
    grad_tol: float | None = None  # on ||g||_inf
    target_f: float | None = None
    query_budget: int | None = None
    max_evals: int | None = None

    def __post_init__(self) -> None:
        if all(v is None for v in (self.max_iters, self.grad_tol, self.target_f, self.query_budget, self.max_evals)):
            raise ValueError("StopRule needs at least one finite criterion")


@dataclass
class LineSearchParams:
    kind: str = "backtracking"
    c1: float = 1e-4
    c2: float | None = None  # None: 0.9 for qn/ga, 0.4 for cg
    shrink: float = 0.5
    max_steps: int = 30
    init_step: float = 1.0  # first trial moves the largest amplitude by this much
    expand: float = 2.0
    avg_f: int = 1

    def __post_init__(self) -> None:
        if self.kind not in LINE_SEARCHES:
            raise ValueError(f"unknown line search {self.kind!r}")


@dataclass(frozen=True)
class HistoryRow:
    iter: int
    f: float
    grad_norm: float
    alpha: float
    queries_cum: int
    evals_cum: int


@dataclass
class OptimizerState:
    q: int
    u: Vector
    g_prev: Vector | None = None
    p_prev: Vector | None = None
    H: Vector | None = None
    alpha_prev: float | None = None
    slope_prev: float | None = None
    updated: bool = False
    history: list[HistoryRow] = field(default_factory=list)


@dataclass(frozen=True)
class LineSearchResult:
    alpha: float
    f_new: float
    queries_used: int
    answer: OracleAnswer | None = None  # oracle answer at the accepted point (wolfe)
    stalled: bool = False
    exhausted: bool = False


@dataclass
class RunResult:
    u: Vector
    history: list[HistoryRow]
    status: str  # converged | budget | stalled
    final: OracleAnswer
    best_f: float


# -- directions ---------------------------------------------------------------


def cg_beta(kind: str, g: Vector, g_prev: Vector, p_prev: Vector) -> float:
    if kind == "cg-fr":
        return float(g @ g) / float(g_prev @ g_prev)
    if kind == "cg-pr":
        return max(float(g @ (g - g_prev)) / float(g_prev @ g_prev), 0.0)
    if kind == "cg-hs":
        # Ascent form: denominator is p_prev . (g_prev - g), positive after an exact step.
        dy = g_prev - g
        den = float(p_prev @ dy)
        return float(g @ -dy) / den if den != 0.0 else 0.0
    raise ValueError(f"not a CG rule: {kind!r}")


def direction(rule: str, g: Vector, state: OptimizerState, restart: float | None = 0.2) -> Vector:
    """Search direction for ``rule``; falls back to ``g`` when the result is not ascent.

    For CG rules, ``restart`` is Powell's threshold: when successive gradients
    satisfy ``|g . g_prev| >= restart * |g|^2`` the direction is reset to ``g``.
    """
    if rule not in METHODS:
        raise ValueError(f"unknown method {rule!r}")
    if state.g_prev is not None and state.g_prev.shape != g.shape:
        raise ValueError(f"dimension mismatch: {g.shape} vs {state.g_prev.shape}")
    if rule == "ga" or state.g_prev is None or state.p_prev is None:
        return g.copy()
    if rule.startswith("cg"):
        if restart is not None and abs(float(g @ state.g_prev)) >= restart * float(g @ g):
            return g.copy()
        beta = cg_beta(rule, g, state.g_prev, state.p_prev)
        p = g + beta * state.p_prev
    else:
        p = state.H @ g
    if float(g @ p) <= 0.0:
        logger.debug("non-ascent direction at q=%d; restarting along the gradient", state.q)
        if state.H is not None:
            state.H = np.eye(g.size)
            state.updated = False
        return g.copy()
    return p


def hessian_update(kind: str, H: Vector, delta_u: Vector, y: Vector) -> Vector:
    """DFP or BFGS rank-two update; skips (returns ``H`` itself) on degenerate curvature."""
    sy = float(delta_u @ y)
    if abs(sy) < 1e-12 * np.linalg.norm(delta_u) * np.linalg.norm(y) or sy == 0.0:
        logger.info("curvature skip: |du.y| = %.3e", abs(sy))
        return H
    if kind == "dfp":
        Hy = H @ y
        yHy = float(y @ Hy)
        if yHy <= 0.0:
            logger.info("curvature skip: y.Hy = %.3e", yHy)
            return H
        out = H + np.outer(delta_u, delta_u) / sy - np.outer(Hy, Hy) / yHy
    elif kind == "bfgs":
        I = np.eye(H.shape[0])
        A = I - np.outer(delta_u, y) / sy
        out = A @ H @ A.T + np.outer(delta_u, delta_u) / sy
    else:
        raise ValueError(f"unknown quasi-Newton update {kind!r}")
    return (out + out.T) / 2


# -- line searches --------------------------------------------------------------


def _budget_left(oracle: OracleLike, budget: int | None, max_evals: int | None) -> bool:
    if budget is not None and oracle.queries_total >= budget:
        return False
    if max_evals is not None and oracle.evaluations >= max_evals:
        return False
    return True


def line_search(
    oracle: OracleLike,
    u: Vector,
    p: Vector,
    f0: float,
    g0: Vector,
    params: LineSearchParams,
    alpha0: float,
    c2: float = 0.9,
    query_budget: int | None = None,
    max_evals: int | None = None,
) -> LineSearchResult:
    slope = float(g0 @ p)
    if not slope > 0:
        raise ValueError(f"p is not an ascent direction (g.p = {slope:.3e})")
    q_start = oracle.queries_total
    if params.kind == "backtracking":
        return _backtracking(oracle, u, p, f0, slope, params, alpha0, q_start, query_budget, max_evals)
    return _wolfe(oracle, u, p, f0, slope, params, alpha0, c2, q_start, query_budget, max_evals)


def _backtracking(oracle, u, p, f0, slope, params, alpha0, q_start, budget, max_evals) -> LineSearchResult:
    alpha = alpha0
    for _ in range(params.max_steps + 1):
        if not _budget_left(oracle, budget, max_evals):
            return LineSearchResult(0.0, f0, oracle.queries_total - q_start, stalled=True, exhausted=True)
        f = oracle.fitness(u + alpha * p, repeats=params.avg_f)
        if f >= f0 + params.c1 * alpha * slope:
            return LineSearchResult(alpha, f, oracle.queries_total - q_start)
        alpha *= params.shrink
    return LineSearchResult(0.0, f0, oracle.queries_total - q_start, stalled=True)


def _wolfe(oracle, u, p, f0, slope, params, alpha0, c2, q_start, budget, max_evals) -> LineSearchResult:
    """Strong-Wolfe bracket and zoom on phi(a) = f(u + a p), maximising."""
    calls = 0

    def evaluate(a):
        nonlocal calls
        calls += 1
        ans = oracle.query(u + a * p)
        return ans, float(ans.g @ p)

    def done(a, ans, stalled=False, exhausted=False):
        if ans is None:
            return LineSearchResult(0.0, f0, oracle.queries_total - q_start, stalled=True, exhausted=exhausted)
        return LineSearchResult(a, ans.f, oracle.queries_total - q_start, ans, stalled, exhausted)

    def sufficient(a, f):
        return f >= f0 + params.c1 * a * slope

    def zoom(lo, f_lo, d_lo, hi, f_hi, best):
        while calls < params.max_steps:
            if not _budget_left(oracle, budget, max_evals):
                return done(*best, exhausted=True) if best[1] is not None else done(0.0, None, exhausted=True)
            # Safeguarded quadratic interpolation using phi(lo), phi'(lo), phi(hi).
            width = hi - lo
            denom = 2 * (f_hi - f_lo - d_lo * width)
            a = lo - d_lo * width**2 / denom if denom != 0 else lo + width / 2
            if not (min(lo, hi) + 0.1 * abs(width) <= a <= max(lo, hi) - 0.1 * abs(width)):
                a = lo + width / 2
            ans, d = evaluate(a)
            if not sufficient(a, ans.f) or ans.f <= f_lo:
                hi, f_hi = a, ans.f
            else:
                best = (a, ans)
                if abs(d) <= c2 * slope:
                    return done(a, ans)
                if d * (hi - lo) <= 0:
                    hi, f_hi = lo, f_lo
                lo, f_lo, d_lo = a, ans.f, d
        return done(*best) if best[1] is not None else done(0.0, None)

    a_prev, f_prev, d_prev = 0.0, f0, slope
    a = alpha0
    best = (0.0, None)
    while calls < params.max_steps:
        if not _budget_left(oracle, budget, max_evals):
            return done(*best, exhausted=True) if best[1] is not None else done(0.0, None, exhausted=True)
        ans, d = evaluate(a)
        if not sufficient(a, ans.f) or (calls > 1 and ans.f <= f_prev):
            return zoom(a_prev, f_prev, d_prev, a, ans.f, best)
        best = (a, ans)
        if abs(d) <= c2 * slope:
            return done(a, ans)
        if d <= 0:
            return zoom(a, ans.f, d, a_prev, f_prev, best)
        a_prev, f_prev, d_prev = a, ans.f, d
        a *= params.expand
    return done(*best) if best[1] is not None else done(0.0, None)


# -- driver -------------------------------------------------------------------------


def _initial_alpha(rule: str, p: Vector, g: Vector, state: OptimizerState, params: LineSearchParams) -> float:
    slope = float(g @ p)
    if rule.startswith("qn") and state.g_prev is not None and state.alpha_prev:
        return 1.0
    if state.alpha_prev and state.slope_prev:
        # Keep alpha * (g . p) roughly constant between iterations, then allow growth.
        return params.expand * state.alpha_prev * state.slope_prev / slope
    return params.init_step / float(np.max(np.abs(p)))


def run(
    oracle: OracleLike,
    u0: Vector,
    rule: str,
    stop: StopRule,
    params: LineSearchParams | None = None,
    callback: Callable[[OptimizerState], None] | None = None,
) -> RunResult:
    """Iterate query -> direction -> line search -> update until ``stop`` fires.

    ``callback`` (if given) sees the optimizer state after every update.
    """
    if rule not in METHODS:
        raise ValueError(f"unknown method {rule!r}")
    params = params or LineSearchParams()
    c2 = params.c2 if params.c2 is not None else (0.4 if rule.startswith("cg") else 0.9)
    qn = rule.startswith("qn")
    u = np.array(u0, dtype=float)
    state = OptimizerState(0, u, H=np.eye(u.size) if qn else None)
    ans = oracle.query(u)
    best_f = ans.f
    stalls = 0
    status = "budget"

    while True:
        g = ans.g
        if not np.all(np.isfinite(g)):
            raise FloatingPointError("oracle returned a non-finite gradient")

        def record(alpha: float) -> None:
            state.history.append(
                HistoryRow(state.q, ans.f, float(np.linalg.norm(g)), alpha, oracle.queries_total, oracle.evaluations)
            )

        if stop.target_f is not None and ans.f >= stop.target_f:
            status = "converged"
        elif not np.any(g):
            status = "converged"  # exact stationary point: no ascent direction exists
        elif stop.grad_tol is not None and float(np.max(np.abs(g))) <= stop.grad_tol:
            status = "converged"
        elif (
            (stop.max_iters is not None and state.q >= stop.max_iters)
            or not _budget_left(oracle, stop.query_budget, stop.max_evals)
        ):
            status = "budget"
        else:
            status = None
        if status is not None:
            record(0.0)
            break

        p = direction(rule, g, state)
        alpha0 = _initial_alpha(rule, p, g, state, params)
        res = line_search(oracle, u, p, ans.f, g, params, alpha0, c2, stop.query_budget, stop.max_evals)
        record(res.alpha)
        best_f = max(best_f, res.f_new)
        if res.exhausted:
            status = "budget"
            break
        if res.alpha == 0.0:
            stalls += 1
            if stalls >= 2:
                status = "stalled"
                break
            # Forget curvature memory and retry from steepest ascent.
            state.g_prev = state.p_prev = state.alpha_prev = state.slope_prev = None
            if qn:
                state.H = np.eye(u.size)
                state.updated = False
            ans = oracle.query(u)
        else:
            stalls = 0
            step = res.alpha * p
            u = u + step
            new = res.answer if res.answer is not None else oracle.query(u)
            if qn:
                y = g - new.g
                if float(step @ y) > 0:
                    if not state.updated:
                        # Rescale the identity to the observed curvature before the first update.
                        state.H = np.eye(u.size) * float(step @ y) / float(y @ y)
                        state.updated = True
                    state.H = hessian_update(rule[3:], state.H, step, y)
                else:
                    logger.info("curvature skip at q=%d: du.y <= 0", state.q)
            state.g_prev, state.p_prev = g, p
            state.alpha_prev, state.slope_prev = res.alpha, float(g @ p)
            ans = new
        best_f = max(best_f, ans.f)
        state.q += 1
        state.u = u
        if callback is not None:
            callback(state)

    return RunResult(u, state.history, status, ans, best_f)
