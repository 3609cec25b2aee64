"""Killed density between two fixed walls, strip survival, and the
moving-boundary density obtained from it by a symmetry transform.

The strip density has two representations: a sine eigenfunction expansion
(fast for large time over span squared) and an alternating sum of reflected
heat kernels (fast for small).  They are kept as independent code paths and
cross-checked; survival integrates each in closed form.

The moving-boundary (wedge) density is the strip density composed with a
change of variables that maps the wedge onto the strip whose walls are the
two slopes; its Gaussian prefactor is folded into each term's exponent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    DomainError,
    InternalConsistencyError,
    PlanningError,
    WedgeProblem,
    check_horizon,
    gauss_mass,
    sinpi,
)

_FOURIER_CAP = 4_000_000
_IMAGE_CAP = 4_000_000


@dataclass(frozen=True, slots=True)
class StripProblem:
    """Start point and wall distances: absorbing walls at ``-a1`` and ``a2``.

    One wall distance may be 0 (the transform of a wedge with one zero slope
    produces that); the span must stay positive and the start strictly
    interior.
    """

    x0: float
    a1: float
    a2: float

    def __post_init__(self) -> None:
        for name in ("x0", "a1", "a2"):
            v = float(getattr(self, name))
            object.__setattr__(self, name, v)
            if not math.isfinite(v):
                raise DomainError(f"{name} must be finite, got {v!r}")
        if self.a1 < 0.0 or self.a2 < 0.0:
            raise DomainError("wall distances must be nonnegative")
        if self.a1 + self.a2 <= 0.0:
            raise DomainError("wall span must be positive")
        if not (-self.a1 < self.x0 < self.a2):
            raise DomainError(f"start {self.x0} must lie strictly inside (-{self.a1}, {self.a2})")

    @property
    def span(self) -> float:
        return self.a1 + self.a2


def _fourier_n(span: float, t: float, tol: float) -> int:
    rate = math.pi * math.pi * t / (2.0 * span * span)
    n = math.ceil(math.sqrt(max(math.log(4.0 / tol), 1.0) / rate)) + 2
    if n > _FOURIER_CAP:
        raise PlanningError(f"eigenfunction expansion needs {n} terms (t/span^2 too small)")
    return n


def _image_n(span: float, t: float, tol: float, reach: float) -> int:
    n = math.ceil((math.sqrt(2.0 * t * max(math.log(4.0 / tol), 1.0)) + reach) / (2.0 * span)) + 2
    if n > _IMAGE_CAP:
        raise PlanningError(f"image sum needs {n} terms (t/span^2 too large)")
    return n


def density_fourier(
    sp: StripProblem, x: float, t: float, n_terms: int, log_prefactor: float = 0.0
) -> float:
    """Eigenfunction expansion of the killed density at position ``x``."""
    t = _check_density_args(sp, x, t)
    span = sp.span
    u_x = (x + sp.a1) / span
    u_0 = (sp.x0 + sp.a1) / span
    rate = math.pi * math.pi * t / (2.0 * span * span)
    total = 0.0
    for n in range(1, n_terms + 1):
        sx = sinpi(n * u_x)
        if sx == 0.0:
            continue
        s0 = sinpi(n * u_0)
        if s0 == 0.0:
            continue
        exponent = log_prefactor - rate * n * n
        if exponent < -745.0:
            break
        total += sx * s0 * math.exp(exponent)
    return 2.0 / span * total


def density_images(
    sp: StripProblem, x: float, t: float, n_terms: int, log_prefactor: float = 0.0
) -> float:
    """Reflected heat kernels for the same density.

    Pairs of images are grouped so that at the lower wall they cancel
    bitwise; positions in the upper half of the strip are evaluated through
    the mirrored problem so the upper wall cancels exactly too.
    """
    t = _check_density_args(sp, x, t)
    span = sp.span
    if (x + sp.a1) > 0.5 * span:
        mirrored = StripProblem(-sp.x0, sp.a2, sp.a1)
        return density_images(mirrored, -x, t, n_terms, log_prefactor)
    inv = 1.0 / (2.0 * t)
    q = sp.x0 + sp.a1
    c = x + sp.a1
    s_minus = c - q
    s_plus = c + q
    with np.errstate(under="ignore"):
        total = math.exp(log_prefactor - s_minus * s_minus * inv) - math.exp(
            log_prefactor - s_plus * s_plus * inv
        )
        if n_terms >= 1:
            n = np.arange(1, n_terms + 1, dtype=np.float64)
            shift = 2.0 * n * span
            a_side = np.exp(log_prefactor - (s_minus + shift) ** 2 * inv) + np.exp(
                log_prefactor - (s_minus - shift) ** 2 * inv
            )
            b_side = np.exp(log_prefactor - (s_plus + shift) ** 2 * inv) + np.exp(
                log_prefactor - (s_plus - shift) ** 2 * inv
            )
            total += float((a_side - b_side).sum())
    return total / math.sqrt(2.0 * math.pi * t)


def _check_density_args(sp: StripProblem, x: float, t: float) -> float:
    t = check_horizon(t)
    if math.isinf(t):
        raise DomainError("densities need a finite time")
    if not (-sp.a1 <= x <= sp.a2):
        raise DomainError(f"position {x} outside the strip [-{sp.a1}, {sp.a2}]")
    return t


def survival_detail(sp: StripProblem, t: float, tol: float = 1e-13) -> tuple[float, int, float]:
    """Survival probability with both representations cross-checked.

    Returns ``(value, terms_used, agreement)``; raises if the two closed-form
    integrals disagree by more than ten times the requested tolerance.
    """
    t = check_horizon(t)
    if math.isinf(t):
        return 0.0, 0, 0.0
    if not tol > 0.0:
        raise DomainError(f"tol must be positive, got {tol}")
    span = sp.span
    u_0 = (sp.x0 + sp.a1) / span

    n_f = _fourier_n(span, t, tol)
    n = np.arange(1, n_f + 1, 2, dtype=np.float64)  # only odd terms survive
    rate = math.pi * math.pi * t / (2.0 * span * span)
    with np.errstate(under="ignore"):
        sines = np.array([sinpi(k * u_0) for k in range(1, n_f + 1, 2)])
        fourier = float((4.0 / (n * math.pi) * sines * np.exp(-rate * n * n)).sum())

    sqrt_t = math.sqrt(t)
    n_i = _image_n(span, t, tol, reach=2.0 * span + abs(sp.x0))
    k = np.arange(-n_i, n_i + 1, dtype=np.float64)
    shift = 2.0 * k * span
    lo1 = (-sp.a1 - sp.x0 + shift) / sqrt_t
    hi1 = (sp.a2 - sp.x0 + shift) / sqrt_t
    lo2 = (sp.a1 + sp.x0 + shift) / sqrt_t
    hi2 = (2.0 * sp.a1 + sp.a2 + sp.x0 + shift) / sqrt_t
    images = float((gauss_mass(lo1, hi1) - gauss_mass(lo2, hi2)).sum())

    gap = abs(fourier - images)
    if gap > 10.0 * tol:
        raise InternalConsistencyError(
            f"strip survival representations disagree: fourier={fourier!r} images={images!r}"
        )
    # Return the representation that converged in fewer terms.
    if t / (span * span) >= 0.25:
        value, terms = fourier, (n_f + 1) // 2
    else:
        value, terms = images, 2 * n_i + 1
    return min(1.0, max(0.0, value)), terms, gap


def survival(sp: StripProblem, t: float, tol: float = 1e-13) -> float:
    """Probability the motion stays strictly between the walls up to ``t``."""
    return survival_detail(sp, t, tol)[0]


def wedge_density(
    problem: WedgeProblem, x0: float, x: float, t: float, tol: float = 1e-13
) -> float:
    """Killed density of the moving-boundary problem at time ``t``.

    The change of variables sends position ``x`` to
    ``(a_plus*x - d)/(a_plus*t + b_plus)``, the start to
    ``(a_plus*x0 - d)/b_plus``, and time to
    ``a_plus^2*t / (b_plus*(a_plus*t + b_plus))``; walls land at the two
    slopes.  The Gaussian prefactor is applied inside each term's exponent.
    """
    t = check_horizon(t)
    if math.isinf(t):
        raise DomainError("densities need a finite time")
    a_plus = 0.5 * (problem.a1 + problem.a2)
    b_plus = 0.5 * (problem.b1 + problem.b2)
    if a_plus <= 0.0:
        raise DomainError("wedge density needs a_plus > 0; use the strip density directly")
    if not (-problem.b1 < x0 < problem.b2):
        raise DomainError(f"start {x0} outside (-{problem.b1}, {problem.b2})")
    lo = -problem.a1 * t - problem.b1
    hi = problem.a2 * t + problem.b2
    if not (lo <= x <= hi):
        raise DomainError(f"position {x} outside the wedge [{lo}, {hi}] at t={t}")
    d = 0.5 * (problem.a1 * problem.b2 - problem.a2 * problem.b1)
    denom = a_plus * t + b_plus
    x_s = (a_plus * x - d) / denom
    x0_s = (a_plus * x0 - d) / b_plus
    tau = a_plus * a_plus * t / (b_plus * denom)
    pref = (a_plus * x0 + d) ** 2 / (2.0 * a_plus * b_plus) - (a_plus * x - d) ** 2 / (
        2.0 * a_plus * denom
    )
    jac = a_plus / (math.sqrt(b_plus) * math.sqrt(denom))
    sp = StripProblem(x0_s, problem.a1, problem.a2)
    x_s = min(max(x_s, -problem.a1), problem.a2)  # rounding can poke past a wall
    span = sp.span
    if tau / (span * span) >= 0.25:
        value = density_fourier(sp, x_s, tau, _fourier_n(span, tau, tol), log_prefactor=pref)
    else:
        value = density_images(sp, x_s, tau, _image_n(span, tau, tol, reach=2.0 * span), log_prefactor=pref)
    return max(0.0, jac * value)
