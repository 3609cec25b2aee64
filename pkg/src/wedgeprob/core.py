"""Domain types, parameter derivation, and stable Gaussian-mass evaluation.

Every probability in this package is assembled from terms of the form
``exp(rate) * mass(lo, hi)``, where ``mass`` is standard normal probability
mass over an interval and ``rate`` is an exponential weight that may under-
or overflow on its own.  ``scaled_gauss_mass`` keeps those products finite by
folding the weight into the exponent of the scaled complementary error
function before anything is exponentiated.

All functions here accept floats or numpy arrays and are pure; the engine's
batch path reuses them unchanged, so a batch evaluation is arithmetically
identical to a loop of scalar evaluations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import special as sp

SQRT2 = math.sqrt(2.0)

# Hard ceiling on series terms.  Both series need at most 8 terms in their
# selection regions; needing more than this signals misuse, not a long loop.
N_CAP = 64


class WedgeError(Exception):
    """Base class for every error raised by this package."""


class DomainError(WedgeError, ValueError):
    """Input outside the supported domain."""


class PlanningError(WedgeError):
    """No admissible term count reaches the requested tolerance."""


class InternalConsistencyError(WedgeError):
    """Two supposedly equivalent computations disagreed beyond slack."""


class Method(Enum):
    """Which evaluation route produced a result."""

    ANDERSON = "anderson"
    ALTERNATIVE = "alternative"
    STRIP = "strip"
    DOOB = "doob"


@dataclass(frozen=True, slots=True)
class WedgeProblem:
    """Boundary parameters: lower line ``-a1*t - b1``, upper line ``a2*t + b2``.

    The start point 0 must be strictly inside the wedge at t = 0 (b1, b2 > 0),
    and slopes must be nonnegative; negative slopes are rejected.
    """

    a1: float
    b1: float
    a2: float
    b2: float

    def __post_init__(self) -> None:
        for name in ("a1", "b1", "a2", "b2"):
            v = float(getattr(self, name))
            object.__setattr__(self, name, v)
            if not math.isfinite(v):
                raise DomainError(f"{name} must be finite, got {v!r}")
        if self.b1 <= 0.0:
            raise DomainError(f"invalid: b1 must be positive, got {self.b1}")
        if self.b2 <= 0.0:
            raise DomainError(f"invalid: b2 must be positive, got {self.b2}")
        if self.a1 < 0.0:
            raise DomainError(f"invalid: a1 must be >= 0 (negative slopes unsupported), got {self.a1}")
        if self.a2 < 0.0:
            raise DomainError(f"invalid: a2 must be >= 0 (negative slopes unsupported), got {self.a2}")

    def swapped(self) -> "WedgeProblem":
        """The reflected problem with the two boundaries exchanged."""
        return WedgeProblem(self.a2, self.b2, self.a1, self.b1)


@dataclass(frozen=True, slots=True)
class DerivedParams:
    """Reduced quantities every series and every truncation bound depends on.

    ``alpha = a_plus*b_plus`` and ``beta = b_plus**2/T`` are the two
    dimensionless convergence drivers; ``beta`` is 0 for an infinite horizon
    so the bound formulas specialize continuously.
    """

    a_plus: float
    b_plus: float
    d: float
    c: float
    alpha: float
    beta: float


@dataclass(frozen=True, slots=True)
class TruncationPlan:
    """A method plus term count whose remainder bound meets the tolerance."""

    method: Method
    n_terms: int
    bound: float
    tolerance: float

    def __post_init__(self) -> None:
        if self.n_terms < 1 or self.n_terms > N_CAP:
            raise DomainError(f"n_terms must be in [1, {N_CAP}], got {self.n_terms}")
        if self.bound > self.tolerance:
            raise InternalConsistencyError(
                f"plan bound {self.bound} exceeds tolerance {self.tolerance}"
            )


@dataclass(frozen=True, slots=True)
class EvalResult:
    """A probability with the plan that produced it.

    ``excursion`` records how far the raw series value fell outside [0, 1]
    before clamping; anything beyond 1e-12 is treated as an internal error
    upstream, so here it is a diagnostic only.
    """

    value: float
    method: Method
    terms: int
    bound: float
    excursion: float = 0.0


def check_horizon(t: float) -> float:
    """Validate a time horizon: strictly positive, ``math.inf`` allowed."""
    t = float(t)
    if math.isnan(t) or t <= 0.0:
        raise DomainError(f"invalid: T must be positive (or inf), got {t}")
    return t


def derive_params(problem: WedgeProblem, t: float) -> DerivedParams:
    """Reduce a problem and horizon to the shared derived quantities."""
    t = check_horizon(t)
    a_plus = 0.5 * (problem.a1 + problem.a2)
    b_plus = 0.5 * (problem.b1 + problem.b2)
    d = 0.5 * (problem.a1 * problem.b2 - problem.a2 * problem.b1)
    c = 0.5 * (problem.a1 * problem.b1 - problem.a2 * problem.b2)
    alpha = a_plus * b_plus
    beta = b_plus * b_plus / t  # 0.0 when t is inf
    return DerivedParams(a_plus, b_plus, d, c, alpha, beta)


def sinpi(x: float) -> float:
    """sin(pi*x) with exact zeros at integers and exact +-1 at half-integers."""
    r = math.remainder(x, 2.0)
    if r == 0.0 or r == 1.0 or r == -1.0:
        return 0.0
    if r == 0.5:
        return 1.0
    if r == -0.5:
        return -1.0
    if r > 0.5:
        r = 1.0 - r
    elif r < -0.5:
        r = -1.0 - r
    return math.sin(math.pi * r)


def cospi(x: float) -> float:
    """cos(pi*x) with exact values on the half-integer lattice."""
    r = abs(math.remainder(x, 2.0))
    if r == 0.5:
        return 0.0
    if r == 0.0:
        return 1.0
    if r == 1.0:
        return -1.0
    if r > 0.5:
        return -math.cos(math.pi * (1.0 - r))
    return math.cos(math.pi * r)


def _validate_ordered(lo: np.ndarray, hi: np.ndarray) -> None:
    # NaNs fail the comparison and are rejected alongside reversed bounds.
    ok = lo <= hi
    if not np.all(ok):
        raise DomainError("gauss_mass requires lo <= hi (and no NaNs)")


def gauss_mass(lo, hi):
    """Standard normal probability mass of [lo, hi]; bounds may be +-inf.

    Same-sign bounds are evaluated through the complementary error function
    so that far-tail masses keep full relative accuracy instead of cancelling
    in a difference of values near +-1.
    """
    lo_a = np.asarray(lo, dtype=np.float64)
    hi_a = np.asarray(hi, dtype=np.float64)
    lo_b, hi_b = np.broadcast_arrays(lo_a, hi_a)
    _validate_ordered(lo_b, hi_b)

    pos = lo_b >= 0.0
    neg = hi_b <= 0.0
    same = pos | neg
    # Reflect the all-negative case onto the all-positive one.
    low = np.where(neg, -hi_b, lo_b)
    high = np.where(neg, -lo_b, hi_b)
    low_s = np.where(same, low, 0.0)
    high_s = np.where(same, high, 0.0)
    with np.errstate(invalid="ignore"):
        tail = 0.5 * (sp.erfc(low_s / SQRT2) - sp.erfc(high_s / SQRT2))
        lo_m = np.where(same, -1.0, lo_b)
        hi_m = np.where(same, 1.0, hi_b)
        middle = 0.5 * (sp.erf(hi_m / SQRT2) - sp.erf(lo_m / SQRT2))
    out = np.where(same, tail, middle)
    if out.ndim == 0:
        return float(out)
    return out


def scaled_gauss_mass(log_scale, lo, hi):
    """``exp(log_scale) * gauss_mass(lo, hi)`` without intermediate overflow.

    For same-sign bounds the scale is combined with the Gaussian exponent of
    each scaled-erfc factor before exponentiating, so terms that pair a huge
    positive ``log_scale`` with a vanishing far-tail mass stay finite.
    Combined exponents below the representable range return exactly 0.
    """
    ls_a = np.asarray(log_scale, dtype=np.float64)
    lo_a = np.asarray(lo, dtype=np.float64)
    hi_a = np.asarray(hi, dtype=np.float64)
    ls_b, lo_b, hi_b = np.broadcast_arrays(ls_a, lo_a, hi_a)
    _validate_ordered(lo_b, hi_b)

    pos = lo_b >= 0.0
    neg = hi_b <= 0.0
    same = pos | neg
    low = np.where(neg, -hi_b, lo_b)
    high = np.where(neg, -lo_b, hi_b)
    low_s = np.where(same, low, 1.0)
    high_s = np.where(same, high, 2.0)
    with np.errstate(over="ignore", invalid="ignore", under="ignore"):
        # exp(ls - x^2/2) * erfcx(x/sqrt(2)); erfcx(inf) = 0 and the paired
        # exp underflows to 0, so infinite bounds drop out cleanly.
        e_lo = np.exp(ls_b - 0.5 * low_s * low_s) * sp.erfcx(low_s / SQRT2)
        e_hi = np.exp(ls_b - 0.5 * high_s * high_s) * sp.erfcx(high_s / SQRT2)
        tail = 0.5 * (e_lo - e_hi)

        lo_m = np.where(same, -1.0, lo_b)
        hi_m = np.where(same, 1.0, hi_b)
        middle = np.exp(ls_b) * (0.5 * (sp.erf(hi_m / SQRT2) - sp.erf(lo_m / SQRT2)))
    out = np.where(same, tail, middle)
    if out.ndim == 0:
        return float(out)
    return out
