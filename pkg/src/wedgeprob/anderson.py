"""Anderson's image series for the finite-horizon wedge probability.

The probability is a leading Gaussian mass minus/plus four families of
exponentially weighted masses.  The four weight families are quadratics in
the term index; their common growth ``4*(n-1)^2 * a_plus * b_plus`` drives
the remainder bound used for truncation planning.

A note on the second family's exponent: the source formula for this series
circulates in print with ``exp(-B_n)`` on the second sum while the other
three sums carry a factor 2 in the exponent.  Re-deriving the series from
the bilateral image sum gives ``exp(-2*B_n)`` (with ``B_n`` as implemented
here), and only that variant agrees with the alternative series, the
infinite-horizon limit, and Monte-Carlo.  ``partial_sum`` therefore uses
``exp(-2*B_n)`` by default and keeps the printed variant behind
``printed_second_exponent=True`` for comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    N_CAP,
    DerivedParams,
    DomainError,
    Method,
    PlanningError,
    TruncationPlan,
    WedgeProblem,
    check_horizon,
    gauss_mass,
    scaled_gauss_mass,
)


@dataclass(frozen=True, slots=True)
class CoefficientSet:
    """The four exponential rates of term ``n``, one per image family."""

    n: int
    a: float
    b: float
    c: float
    d: float


def coefficient_rates(n, a1, b1, a2, b2):
    """Quadratic-form rates (A, B, C, D) for term ``n``; array-aware."""
    nm1 = n - 1.0
    np1 = n + 1.0
    cross = a2 * b1 + a1 * b2
    a = n * n * a2 * b2 + nm1 * nm1 * a1 * b1 + n * nm1 * cross
    b = nm1 * nm1 * a2 * b2 + n * n * a1 * b1 + n * nm1 * cross
    c = n * n * (a1 * b1 + a2 * b2) + n * nm1 * a2 * b1 + n * np1 * a1 * b2
    d = n * n * (a1 * b1 + a2 * b2) + n * np1 * a2 * b1 + n * nm1 * a1 * b2
    return a, b, c, d


def coefficients(n: int, problem: WedgeProblem) -> CoefficientSet:
    """Exact rates for term ``n >= 1`` of the series for ``problem``."""
    if n < 1:
        raise DomainError(f"term index must be >= 1, got {n}")
    a, b, c, d = coefficient_rates(float(n), problem.a1, problem.b1, problem.a2, problem.b2)
    return CoefficientSet(n, a, b, c, d)


def partial_sum_arrays(a1, b1, a2, b2, t, n_terms: int, printed_second_exponent: bool = False):
    """N-term partial sum over arrays of problems at finite horizons ``t``."""
    sqrt_t = np.sqrt(t)
    u_lo = (-a1 * t - b1) / sqrt_t
    u_hi = (a2 * t + b2) / sqrt_t
    b_plus = 0.5 * (b1 + b2)
    acc = gauss_mass(u_lo, u_hi)
    b_factor = 1.0 if printed_second_exponent else 2.0
    for n in range(1, n_terms + 1):
        ra, rb, rc, rd = coefficient_rates(float(n), a1, b1, a2, b2)
        shift = 4.0 * n * b_plus / sqrt_t
        shift_b = 4.0 * (n - 1) * b_plus / sqrt_t
        two_b1 = 2.0 * b1 / sqrt_t
        acc = acc - scaled_gauss_mass(-2.0 * ra, u_lo + two_b1 - shift, u_hi + two_b1 - shift)
        acc = acc - scaled_gauss_mass(-b_factor * rb, u_lo + two_b1 + shift_b, u_hi + two_b1 + shift_b)
        acc = acc + scaled_gauss_mass(-2.0 * rc, u_lo + shift, u_hi + shift)
        acc = acc + scaled_gauss_mass(-2.0 * rd, u_lo - shift, u_hi - shift)
    return acc


def partial_sum(
    problem: WedgeProblem,
    t: float,
    n_terms: int,
    *,
    printed_second_exponent: bool = False,
) -> float:
    """N-term partial sum of the image series at finite horizon ``t``."""
    t = check_horizon(t)
    if math.isinf(t):
        raise DomainError("the image series needs a finite horizon; use the limit series for T=inf")
    if n_terms < 1:
        raise DomainError(f"n_terms must be >= 1, got {n_terms}")
    out = partial_sum_arrays(
        np.float64(problem.a1),
        np.float64(problem.b1),
        np.float64(problem.a2),
        np.float64(problem.b2),
        np.float64(t),
        n_terms,
        printed_second_exponent,
    )
    return float(out)


def remainder_bound(alpha, beta, n):
    """Guaranteed bound on the dropped tail after ``n`` terms; array-aware.

    Two branches: a horizon-dependent bound valid when ``n >= alpha/beta``
    and a horizon-free bound.  Where both apply the smaller wins.  Returns
    ``inf`` where no branch applies (n < 2, or alpha = beta = 0).
    """
    alpha_a = np.asarray(alpha, dtype=np.float64)
    beta_a = np.asarray(beta, dtype=np.float64)
    n_a = np.asarray(n, dtype=np.float64)
    alpha_b, beta_b, n_b = np.broadcast_arrays(alpha_a, beta_a, n_a)
    nm1 = n_b - 1.0

    with np.errstate(divide="ignore", invalid="ignore", over="ignore", under="ignore"):
        b1_ok = (n_b >= 2) & (beta_b > 0.0) & (n_b * beta_b >= alpha_b)
        safe_beta = np.where(beta_b > 0.0, beta_b, 1.0)
        branch1 = (
            np.sqrt(2.0 / (np.pi * safe_beta))
            * (alpha_b + beta_b)
            / ((4.0 * alpha_b + beta_b) * nm1)
            * np.exp(-nm1 * nm1 * (8.0 * alpha_b + 2.0 * beta_b))
        )
        b2_ok = (n_b >= 2) & (alpha_b > 0.0)
        safe_alpha = np.where(alpha_b > 0.0, alpha_b, 1.0)
        branch2 = np.exp(-8.0 * safe_alpha * nm1 * nm1) / (4.0 * safe_alpha * nm1)

    out = np.where(b1_ok, branch1, np.inf)
    out = np.where(b2_ok & (branch2 < out), branch2, out)
    if out.ndim == 0:
        return float(out)
    return out


def min_terms(params: DerivedParams, tol: float) -> TruncationPlan:
    """Smallest ``n >= 2`` whose remainder bound drops below ``tol``.

    The bound formulas are stated for more than one term, so planning starts
    at 2 even when the first bound already clears the tolerance.
    """
    if not tol >= 1e-16:
        raise DomainError(f"tolerance must be >= 1e-16, got {tol}")
    for n in range(2, N_CAP + 1):
        bound = remainder_bound(params.alpha, params.beta, n)
        if bound < tol:
            return TruncationPlan(Method.ANDERSON, n, bound, tol)
    raise PlanningError(
        f"image-series plan exceeds {N_CAP} terms at tol={tol} "
        f"(alpha={params.alpha:g}, beta={params.beta:g})"
    )
