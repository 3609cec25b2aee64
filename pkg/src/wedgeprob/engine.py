"""Method selection, top-level evaluation, batch evaluation, and minimal-term grids.

``evaluate`` dispatches one problem; ``evaluate_batch`` applies the same
arithmetic over numpy arrays (grouping rows by planned term count), so batch
results are bitwise identical to a row-by-row loop.  ``min_terms_grid``
tabulates minimal term counts of both series over a log-log parameter grid.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from . import alternative, anderson, limits, strip
from .core import (
    N_CAP,
    DerivedParams,
    DomainError,
    EvalResult,
    InternalConsistencyError,
    Method,
    PlanningError,
    TruncationPlan,
    WedgeProblem,
    check_horizon,
    derive_params,
)

TOL_MIN = 1e-16
TOL_MAX = 1e-2

_EXCURSION_LIMIT = 1e-12
_STRIP_TOL_FLOOR = 1e-13

_METHOD_CODES = {Method.ANDERSON: 0, Method.ALTERNATIVE: 1, Method.STRIP: 2, Method.DOOB: 3}
_CODE_METHODS = {v: k for k, v in _METHOD_CODES.items()}


class Rule(Enum):
    """How to pick between the two series at a finite horizon."""

    SIMPLE = "simple"  # dual series iff alpha < 1 and beta < 1
    BEST = "best"      # whichever remainder bound needs fewer terms


@dataclass(frozen=True, slots=True)
class MethodChoice:
    method: Method
    rule: Rule | None
    forced: bool = False
    plan: TruncationPlan | None = None


@dataclass(frozen=True, slots=True)
class GridSpec:
    """Log10 ranges (lo, hi, steps) for alpha and beta, plus the tolerance."""

    log_alpha: tuple[float, float, int] = (-3.0, 3.0, 121)
    log_beta: tuple[float, float, int] = (-3.0, 3.0, 121)
    tol: float = 1e-16

    def __post_init__(self) -> None:
        for name in ("log_alpha", "log_beta"):
            lo, hi, steps = getattr(self, name)
            if steps < 1:
                raise DomainError(f"{name} needs at least one step")
            if steps == 1 and lo != hi:
                raise DomainError(f"{name}: a single step needs lo == hi")
            if steps >= 2 and not lo < hi:
                raise DomainError(f"{name}: lo must be < hi")
        _check_tol(self.tol)


@dataclass(frozen=True, slots=True)
class GridRecord:
    log_alpha: float
    log_beta: float
    n_anderson: int
    n_alternative: int
    n_best: int
    n_simple_rule: int


@dataclass(frozen=True, slots=True)
class EvalFailure:
    """Per-row failure inside a batch; other rows are unaffected."""

    error: str


def _check_tol(tol: float) -> float:
    tol = float(tol)
    if not (TOL_MIN <= tol <= TOL_MAX):
        raise DomainError(f"tol must be in [{TOL_MIN}, {TOL_MAX}], got {tol}")
    return tol


def _best_choice(params: DerivedParams, tol: float) -> MethodChoice:
    plan_a = plan_b = None
    try:
        plan_a = anderson.min_terms(params, tol)
    except PlanningError:
        pass
    try:
        plan_b = alternative.min_terms(params, tol)
    except PlanningError:
        pass
    if plan_a is None and plan_b is None:
        raise PlanningError(
            f"neither series reaches tol={tol} within the term cap "
            f"(alpha={params.alpha:g}, beta={params.beta:g})"
        )
    if plan_b is None or (plan_a is not None and plan_a.n_terms <= plan_b.n_terms):
        return MethodChoice(Method.ANDERSON, Rule.BEST, plan=plan_a)
    return MethodChoice(Method.ALTERNATIVE, Rule.BEST, plan=plan_b)


def classify(
    params: DerivedParams,
    t: float,
    rule: Rule = Rule.SIMPLE,
    force: Method | None = None,
    tol: float = 1e-16,
) -> MethodChoice:
    """Pick the evaluation route for one problem.

    The infinite horizon always goes to the limit series and the zero-slope
    wedge to the strip integrals; only the remaining cases consult the rule.
    Ties under ``Rule.BEST`` go to the image series.
    """
    t = check_horizon(t)
    tol = _check_tol(tol)
    infinite = math.isinf(t)
    if force is not None:
        if force is Method.DOOB and not infinite:
            raise DomainError("the limit series applies only to T=inf")
        if force in (Method.ANDERSON, Method.ALTERNATIVE) and infinite:
            raise DomainError("forced series methods need a finite horizon")
        if force is Method.ALTERNATIVE and params.a_plus <= 0.0:
            raise DomainError("the dual series needs a_plus > 0")
        if force is Method.STRIP and params.a_plus != 0.0:
            raise DomainError("the strip route applies only to a1 = a2 = 0")
        return MethodChoice(force, None, forced=True)
    if infinite:
        return MethodChoice(Method.DOOB, rule)
    if params.a_plus == 0.0:
        return MethodChoice(Method.STRIP, rule)
    if rule is Rule.SIMPLE:
        method = (
            Method.ALTERNATIVE
            if (params.alpha < 1.0 and params.beta < 1.0)
            else Method.ANDERSON
        )
        return MethodChoice(method, rule)
    if rule is Rule.BEST:
        return _best_choice(params, tol)
    raise DomainError(f"unknown rule {rule!r}")


def _clamp(raw: float) -> tuple[float, float]:
    excursion = max(0.0, -raw, raw - 1.0)
    if excursion > _EXCURSION_LIMIT:
        raise InternalConsistencyError(
            f"series value {raw!r} strays {excursion:.3g} outside [0, 1]"
        )
    return min(1.0, max(0.0, raw)), excursion


def evaluate(
    problem: WedgeProblem,
    t: float,
    tol: float = 1e-16,
    rule: Rule = Rule.SIMPLE,
    force: Method | None = None,
) -> EvalResult:
    """Wedge probability with plan metadata, clamped to [0, 1]."""
    t = check_horizon(t)
    tol = _check_tol(tol)
    params = derive_params(problem, t)
    choice = classify(params, t, rule, force, tol)
    if choice.method is Method.DOOB:
        raw, bound = limits.infinite_horizon(problem)
        value, exc = _clamp(raw)
        return EvalResult(value, Method.DOOB, limits.DEFAULT_TERMS, bound, exc)
    if choice.method is Method.STRIP:
        sp = strip.StripProblem(0.0, problem.b1, problem.b2)
        raw, terms, _gap = strip.survival_detail(sp, t, max(tol, _STRIP_TOL_FLOOR))
        value, exc = _clamp(raw)
        return EvalResult(value, Method.STRIP, terms, tol, exc)
    if choice.method is Method.ANDERSON:
        plan = choice.plan or anderson.min_terms(params, tol)
        raw = anderson.partial_sum(problem, t, plan.n_terms)
    else:
        plan = choice.plan or alternative.min_terms(params, tol)
        raw = alternative.partial_sum(problem, t, plan.n_terms)
    value, exc = _clamp(raw)
    return EvalResult(value, choice.method, plan.n_terms, plan.bound, exc)


# ---------------------------------------------------------------------------
# Batch evaluation
# ---------------------------------------------------------------------------


def _min_terms_arrays(bound_fn, alpha: np.ndarray, beta: np.ndarray, tol: float):
    """Vectorized minimal term count: (n, bound), n = -1 where no plan exists."""
    n_out = np.full(alpha.shape, -1, dtype=np.int64)
    bound_out = np.full(alpha.shape, np.inf)
    open_idx = np.arange(alpha.size)
    a_open, b_open = alpha.ravel(), beta.ravel()
    for n in range(2, N_CAP + 1):
        if open_idx.size == 0:
            break
        bounds = np.asarray(bound_fn(a_open, b_open, float(n)))
        hit = bounds < tol
        if np.any(hit):
            done = open_idx[hit]
            n_out.ravel()[done] = n
            bound_out.ravel()[done] = bounds[hit]
            keep = ~hit
            open_idx = open_idx[keep]
            a_open = a_open[keep]
            b_open = b_open[keep]
    return n_out, bound_out


@dataclass(slots=True)
class BatchArrays:
    """Columnar batch result; ``errors[i]`` is None for successful rows."""

    values: np.ndarray
    method_codes: np.ndarray
    terms: np.ndarray
    bounds: np.ndarray
    excursions: np.ndarray
    errors: list


def _scalar_fallback(i, a1, b1, a2, b2, t, tol, rule, out: BatchArrays) -> None:
    try:
        problem = WedgeProblem(a1[i], b1[i], a2[i], b2[i])
        res = evaluate(problem, t[i], tol, rule)
    except (DomainError, PlanningError, InternalConsistencyError) as exc:
        out.errors[i] = str(exc)
        return
    out.values[i] = res.value
    out.method_codes[i] = _METHOD_CODES[res.method]
    out.terms[i] = res.terms
    out.bounds[i] = res.bound
    out.excursions[i] = res.excursion


def _evaluate_batch_arrays_chunk(a1, b1, a2, b2, t, tol, rule) -> BatchArrays:
    n = a1.size
    out = BatchArrays(
        values=np.full(n, np.nan),
        method_codes=np.full(n, -1, dtype=np.int8),
        terms=np.zeros(n, dtype=np.int32),
        bounds=np.full(n, np.nan),
        excursions=np.zeros(n),
        errors=[None] * n,
    )
    with np.errstate(invalid="ignore"):
        valid = (
            np.isfinite(a1) & np.isfinite(b1) & np.isfinite(a2) & np.isfinite(b2)
            & (b1 > 0.0) & (b2 > 0.0) & (a1 >= 0.0) & (a2 >= 0.0)
            & ~np.isnan(t) & (t > 0.0)
        )
    for i in np.flatnonzero(~valid):
        try:
            WedgeProblem(a1[i], b1[i], a2[i], b2[i])
            check_horizon(t[i])
            out.errors[i] = "invalid row"
        except DomainError as exc:
            out.errors[i] = str(exc)

    a_plus = 0.5 * (a1 + a2)
    b_plus = 0.5 * (b1 + b2)
    with np.errstate(invalid="ignore", divide="ignore"):
        alpha = a_plus * b_plus
        beta = b_plus * b_plus / t

    infinite = valid & np.isinf(t)
    strip_rows = valid & ~infinite & (a_plus == 0.0)
    series = valid & ~infinite & ~strip_rows

    # Non-vectorized routes go through the scalar evaluator row by row.
    for i in np.flatnonzero(infinite | strip_rows):
        _scalar_fallback(i, a1, b1, a2, b2, t, tol, rule, out)

    if not np.any(series):
        return out

    if rule is Rule.SIMPLE:
        alt_rows = series & (alpha < 1.0) & (beta < 1.0)
        and_rows = series & ~alt_rows
        and_idx = np.flatnonzero(and_rows)
        n_and, b_and = _min_terms_arrays(
            anderson.remainder_bound, alpha[and_idx], beta[and_idx], tol
        )
    elif rule is Rule.BEST:
        ser_idx = np.flatnonzero(series)
        n_a, b_a = _min_terms_arrays(anderson.remainder_bound, alpha[ser_idx], beta[ser_idx], tol)
        n_b, b_b = _min_terms_arrays(alternative.remainder_bound, alpha[ser_idx], beta[ser_idx], tol)
        pick_alt = (n_b != -1) & ((n_a == -1) | (n_b < n_a))
        neither = (n_a == -1) & (n_b == -1)
        alt_rows = np.zeros_like(series)
        alt_rows[ser_idx[pick_alt]] = True
        and_rows = np.zeros_like(series)
        and_sel = ~pick_alt & ~neither
        and_rows[ser_idx[and_sel]] = True
        for i in ser_idx[neither]:
            out.errors[i] = (
                f"neither series reaches tol={tol} within the term cap "
                f"(alpha={alpha[i]:g}, beta={beta[i]:g})"
            )
        and_idx = np.flatnonzero(and_rows)
        n_and, b_and = n_a[and_sel], b_a[and_sel]
    else:
        raise DomainError(f"unknown rule {rule!r}")

    # Alternative rows stay scalar: each term is an adaptive quadrature.
    for i in np.flatnonzero(alt_rows):
        _scalar_fallback(i, a1, b1, a2, b2, t, tol, rule, out)

    if and_idx.size:
        no_plan = n_and == -1
        for j in np.flatnonzero(no_plan):
            i = and_idx[j]
            out.errors[i] = (
                f"image-series plan exceeds {N_CAP} terms at tol={tol} "
                f"(alpha={alpha[i]:g}, beta={beta[i]:g})"
            )
        planned = ~no_plan
        for n_terms in np.unique(n_and[planned]):
            grp = planned & (n_and == n_terms)
            rows = and_idx[grp]
            raw = anderson.partial_sum_arrays(
                a1[rows], b1[rows], a2[rows], b2[rows], t[rows], int(n_terms)
            )
            exc = np.maximum(0.0, np.maximum(-raw, raw - 1.0))
            bad = exc > _EXCURSION_LIMIT
            for k in np.flatnonzero(bad):
                out.errors[rows[k]] = (
                    f"series value {raw[k]!r} strays {exc[k]:.3g} outside [0, 1]"
                )
            good = ~bad
            rg = rows[good]
            out.values[rg] = np.clip(raw[good], 0.0, 1.0)
            out.method_codes[rg] = _METHOD_CODES[Method.ANDERSON]
            out.terms[rg] = n_terms
            out.bounds[rg] = b_and[grp][good]
            out.excursions[rg] = exc[good]
    return out


def evaluate_batch_arrays(
    a1, b1, a2, b2, t, *, tol: float = 1e-16, rule: Rule = Rule.SIMPLE, workers: int = 1
) -> BatchArrays:
    """Columnar batch evaluation; rows are independent and order is preserved."""
    tol = _check_tol(tol)
    cols = [np.ascontiguousarray(np.asarray(x, dtype=np.float64)) for x in (a1, b1, a2, b2, t)]
    n = cols[0].size
    if any(c.size != n for c in cols):
        raise DomainError("batch columns must have equal length")
    if n == 0:
        return BatchArrays(
            np.empty(0), np.empty(0, np.int8), np.empty(0, np.int32), np.empty(0), np.empty(0), []
        )
    if workers <= 1:
        return _evaluate_batch_arrays_chunk(*cols, tol, rule)
    bounds = np.linspace(0, n, workers * 4 + 1, dtype=np.int64)
    chunks = [(int(lo), int(hi)) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(
            pool.map(
                lambda span: _evaluate_batch_arrays_chunk(
                    *(c[span[0]:span[1]] for c in cols), tol, rule
                ),
                chunks,
            )
        )
    out = BatchArrays(
        values=np.concatenate([p.values for p in parts]),
        method_codes=np.concatenate([p.method_codes for p in parts]),
        terms=np.concatenate([p.terms for p in parts]),
        bounds=np.concatenate([p.bounds for p in parts]),
        excursions=np.concatenate([p.excursions for p in parts]),
        errors=[e for p in parts for e in p.errors],
    )
    return out


def evaluate_batch(
    rows: Sequence[tuple[WedgeProblem, float]],
    tol: float = 1e-16,
    rule: Rule = Rule.SIMPLE,
    workers: int = 1,
) -> list[EvalResult | EvalFailure]:
    """Order-preserving batch evaluation of (problem, horizon) rows.

    Equivalent to mapping ``evaluate`` row-wise; per-row errors come back as
    ``EvalFailure`` entries and do not disturb the remaining rows.
    """
    n = len(rows)
    a1 = np.empty(n)
    b1 = np.empty(n)
    a2 = np.empty(n)
    b2 = np.empty(n)
    t = np.empty(n)
    for i, (problem, horizon) in enumerate(rows):
        a1[i] = problem.a1
        b1[i] = problem.b1
        a2[i] = problem.a2
        b2[i] = problem.b2
        t[i] = horizon
    cols = evaluate_batch_arrays(a1, b1, a2, b2, t, tol=tol, rule=rule, workers=workers)
    out: list[EvalResult | EvalFailure] = []
    for i in range(n):
        err = cols.errors[i]
        if err is not None:
            out.append(EvalFailure(err))
        else:
            out.append(
                EvalResult(
                    float(cols.values[i]),
                    _CODE_METHODS[int(cols.method_codes[i])],
                    int(cols.terms[i]),
                    float(cols.bounds[i]),
                    float(cols.excursions[i]),
                )
            )
    return out


def min_terms_grid(spec: GridSpec) -> list[GridRecord]:
    """Minimal term counts of both series over the log10(alpha) x log10(beta) grid."""
    la = np.linspace(*spec.log_alpha)
    lb = np.linspace(*spec.log_beta)
    la_mesh, lb_mesh = np.meshgrid(la, lb, indexing="ij")
    alpha = 10.0 ** la_mesh.ravel()
    beta = 10.0 ** lb_mesh.ravel()
    n_a, _ = _min_terms_arrays(anderson.remainder_bound, alpha, beta, spec.tol)
    n_b, _ = _min_terms_arrays(alternative.remainder_bound, alpha, beta, spec.tol)
    both = (n_a != -1) & (n_b != -1)
    n_best = np.where(n_a != -1, n_a, n_b)
    n_best[both] = np.minimum(n_a[both], n_b[both])
    simple_alt = (alpha < 1.0) & (beta < 1.0)
    n_simple = np.where(simple_alt, n_b, n_a)
    records = [
        GridRecord(
            float(la_mesh.ravel()[i]),
            float(lb_mesh.ravel()[i]),
            int(n_a[i]),
            int(n_b[i]),
            int(n_best[i]),
            int(n_simple[i]),
        )
        for i in range(alpha.size)
    ]
    return records
