"""Infinite-horizon wedge probabilities via two dual theta-type series.

The image-side series (Doob) converges fast when ``alpha = a_plus*b_plus``
is large; its Poisson-summation dual (Ycart-Drouilhet) converges fast when
``alpha`` is small.  ``infinite_horizon`` picks whichever side of the
duality converges faster and reports a tail bound.

With one slope exactly zero the wedge has a horizontal boundary that
Brownian motion crosses almost surely, so the infinite-horizon probability
is 0; both functions return that directly.
"""

from __future__ import annotations

import math

from .anderson import coefficient_rates
from .core import DerivedParams, DomainError, WedgeProblem, cospi, derive_params

DEFAULT_TERMS = 8


def doob_prob(problem: WedgeProblem, n_terms: int = DEFAULT_TERMS) -> float:
    """Image-side series for the probability of never leaving the wedge."""
    if n_terms < 1:
        raise DomainError(f"n_terms must be >= 1, got {n_terms}")
    if problem.a1 == 0.0 or problem.a2 == 0.0:
        return 0.0
    total = 0.0
    for n in range(1, n_terms + 1):
        ra, rb, rc, rd = coefficient_rates(
            float(n), problem.a1, problem.b1, problem.a2, problem.b2
        )
        total += math.exp(-2.0 * ra) + math.exp(-2.0 * rb) - math.exp(-2.0 * rc) - math.exp(-2.0 * rd)
    return min(1.0, max(0.0, 1.0 - total))


def ycart_prob(problem: WedgeProblem, n_terms: int = DEFAULT_TERMS) -> float:
    """Dual theta series for the same probability, fast for small ``alpha``."""
    if n_terms < 1:
        raise DomainError(f"n_terms must be >= 1, got {n_terms}")
    if problem.a1 == 0.0 or problem.a2 == 0.0:
        return 0.0
    p = derive_params(problem, math.inf)
    alpha, d, c = p.alpha, p.d, p.c
    total = 0.0
    for n in range(1, n_terms + 1):
        bracket = cospi(n * d / (2.0 * alpha)) + (-1.0) ** (n + 1) * cospi(n * c / (2.0 * alpha))
        if bracket == 0.0:
            continue
        total += math.exp(d * d / (2.0 * alpha) - math.pi * math.pi * n * n / (8.0 * alpha)) * bracket
    value = math.sqrt(math.pi / (2.0 * alpha)) * total
    return min(1.0, max(0.0, value))


def _doob_tail_bound(params: DerivedParams, n_terms: int) -> float:
    # Dropped bracket magnitudes are at most 4*exp(-8*alpha*(n-1)^2), and the
    # shifted Gaussian tail sum is at most its first term times (1 + 1/(16*alpha*N)).
    alpha = params.alpha
    if alpha <= 0.0:
        return math.inf
    n = float(n_terms)
    return 4.0 * math.exp(-8.0 * alpha * n * n) * (1.0 + 1.0 / (16.0 * alpha * n))


def _ycart_tail_bound(params: DerivedParams, n_terms: int) -> float:
    alpha = params.alpha
    if alpha <= 0.0:
        return math.inf
    rate = math.pi * math.pi / (8.0 * alpha)
    lead = math.exp(params.d * params.d / (2.0 * alpha) - rate * n_terms * n_terms)
    return math.sqrt(math.pi / (2.0 * alpha)) * lead / (rate * n_terms)


def infinite_horizon(problem: WedgeProblem, n_terms: int = DEFAULT_TERMS) -> tuple[float, float]:
    """Infinite-horizon probability and a tail bound, picking the faster dual.

    The image side decays like ``exp(-8*alpha*n^2)`` and the theta side like
    ``exp(-pi^2*n^2/(8*alpha))``; the crossover is at ``alpha = pi/8``, but
    using ``alpha >= 1`` keeps the choice aligned with the finite-horizon
    selection rule and both sides are comfortably converged there.
    """
    if problem.a1 == 0.0 or problem.a2 == 0.0:
        return 0.0, 0.0
    params = derive_params(problem, math.inf)
    if params.alpha >= 1.0:
        return doob_prob(problem, n_terms), _doob_tail_bound(params, n_terms)
    return ycart_prob(problem, n_terms), _ycart_tail_bound(params, n_terms)
