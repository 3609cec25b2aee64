"""The dual series for the wedge probability, fast where the image series is slow.

Two printed forms of the same sum are implemented:

* ``partial_sum`` -- the production path: each term is a one-dimensional
  Gaussian-times-sine integral over the slope interval, evaluated by adaptive
  Simpson quadrature split at the Gaussian peak.
* ``partial_sum_erf`` -- a verification path expressing each term through the
  Faddeeva function ``w(z) = exp(-z^2) * erfc(-i*z)``.  All exponential
  factors (the global ``d^2/(2*alpha)`` weight, the per-term theta decay and
  the Gaussian scale hidden in complex erfc) are combined into one exponent
  per Faddeeva call, so nothing overflows even when individual factors would.

``faddeeva`` itself is self-contained: a Maclaurin series near the origin, a
pole-corrected midpoint rule for moderate arguments (accurate down to the
real axis), and the Laplace continued fraction far from the origin.
"""

from __future__ import annotations

import cmath
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
    WedgeError,
    WedgeProblem,
    check_horizon,
    derive_params,
    sinpi,
)

SQRT_PI = math.sqrt(math.pi)
_TINY = 1e-300
_LOG_FLOOR = -745.0  # below this a combined exponent underflows to exactly 0


class QuadratureError(WedgeError):
    """Adaptive refinement ran out of depth before reaching the tolerance."""

    def __init__(self, message: str, estimate: float, error_bound: float):
        super().__init__(message)
        self.estimate = estimate
        self.error_bound = error_bound


@dataclass(frozen=True, slots=True)
class QuadratureSpec:
    """Controls for the per-term integral: absolute tolerance, depth, peak."""

    abs_tol: float
    max_depth: int = 30
    split_point: float = 0.0

    def __post_init__(self) -> None:
        if not self.abs_tol > 0.0:
            raise DomainError(f"abs_tol must be positive, got {self.abs_tol}")
        if not 1 <= self.max_depth <= 40:
            raise DomainError(f"max_depth must be in [1, 40], got {self.max_depth}")


def default_quadrature_spec(problem: WedgeProblem, t: float) -> QuadratureSpec:
    """Tolerance scaled so quadrature error never dominates the 1e-16 budget."""
    a_plus = 0.5 * (problem.a1 + problem.a2)
    b_plus = 0.5 * (problem.b1 + problem.b2)
    s = t + b_plus / a_plus
    return QuadratureSpec(abs_tol=1e-18 * max(1.0, math.sqrt(s)), split_point=problem.a1)


# ---------------------------------------------------------------------------
# Faddeeva function
# ---------------------------------------------------------------------------

_SERIES_RADIUS2 = 4.0   # |z|^2 below which the Maclaurin split is safe
_QUAD_H = 0.4           # step of the pole-corrected midpoint rule
_QUAD_Y_MAX = 7.5       # correction form valid for Im z < pi/h ~ 7.85
_QUAD_T_MAX = 7.8       # exp(-t^2) below 3e-27 past here

# Gamma(k + 3/2) for the odd half of the Maclaurin series.
_GAMMA_HALF = []
_g = 0.5 * SQRT_PI
for _k in range(96):
    _GAMMA_HALF.append(_g)
    _g *= _k + 1.5
del _g, _k


def _w_series(z: complex) -> complex:
    # w(z) = exp(-z^2) + i*z * sum_k (-z^2)^k / Gamma(k + 3/2); the even part
    # is summed exactly by exp, which keeps cancellation mild for |z| <= 2.5.
    mz2 = -z * z
    total = 0.0j
    term = 1.0 + 0.0j
    for k in range(96):
        contrib = term / _GAMMA_HALF[k]
        total += contrib
        if abs(contrib) < 1e-20 * abs(total):
            break
        term *= mz2
    return cmath.exp(mz2) + 1j * z * total


def _w_quad(z: complex) -> complex:
    # Midpoint (or trapezoid) rule for (i/pi) * integral exp(-t^2)/(z-t) dt
    # plus the pole-crossing correction 2*exp(-z^2)/(1 +- exp(-2*pi*i*z/h)).
    # Of the two interleaved node lattices, pick the one farther from Re z so
    # the correction's tangent-like factor stays bounded near the real axis.
    h = _QUAD_H
    x = z.real
    d_trap = abs(x / h - round(x / h))
    d_mid = abs(x / h - 0.5 - round(x / h - 0.5))
    offset = 0.5 * h if d_mid >= d_trap else 0.0
    use_mid = offset != 0.0

    k_lo = math.ceil((-_QUAD_T_MAX - offset) / h)
    k_hi = math.floor((_QUAD_T_MAX - offset) / h)
    acc = 0.0j
    for k in range(k_lo, k_hi + 1):
        t = k * h + offset
        acc += math.exp(-t * t) / (z - t)
    base = (1j * h / math.pi) * acc

    q = cmath.exp(-2j * math.pi * z / h)
    denom = (1.0 + q) if use_mid else (1.0 - q)
    corr = 2.0 * cmath.exp(-z * z) / denom
    return base + corr


def _w_cf(z: complex) -> complex:
    # Laplace continued fraction, modified Lentz iteration.
    f = _TINY + 0.0j
    c = f
    d = 0.0j
    a = 1.0
    for j in range(1, 200):
        d = z + a * d
        if d == 0:
            d = _TINY
        c = z + a / c
        if c == 0:
            c = _TINY
        d = 1.0 / d
        delta = c * d
        f *= delta
        if abs(delta - 1.0) < 1e-17:
            break
        a = -0.5 * j
    return (1j / SQRT_PI) * f


def _w_upper(z: complex) -> complex:
    # Dispatch for Re z >= 0, Im z >= 0.
    r2 = z.real * z.real + z.imag * z.imag
    if r2 <= _SERIES_RADIUS2:
        return _w_series(z)
    if z.imag < _QUAD_Y_MAX:
        return _w_quad(z)
    return _w_cf(z)


def faddeeva(z: complex) -> complex:
    """Scaled complementary error function ``w(z) = exp(-z^2) * erfc(-i*z)``.

    Supported for any finite argument in the closed upper half-plane and for
    lower half-plane arguments whose reflected value is representable; the
    growth there is ``exp(y^2 - x^2)``, so arguments with
    ``Im(z)^2 - Re(z)^2 > 700`` raise a domain error rather than overflow.
    """
    z = complex(z)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise DomainError(f"faddeeva argument must be finite, got {z!r}")
    x, y = z.real, z.imag
    if y >= 0.0:
        if x >= 0.0:
            return _w_upper(z)
        # w(-conj(z)) = conj(w(z)) maps the second quadrant onto the first.
        return _w_upper(complex(-x, y)).conjugate()
    if y * y - x * x > 700.0:
        raise DomainError(
            f"faddeeva argument {z!r} is outside the representable lower half-plane"
        )
    return 2.0 * cmath.exp(-z * z) - faddeeva(-z)


# ---------------------------------------------------------------------------
# Per-term integral (production path)
# ---------------------------------------------------------------------------


_EPS = 2.220446049250313e-16


def _integrate(f_vec, points: list[float], abs_tol: float, max_depth: int) -> float:
    """Composite Simpson on a seeded grid, panels halved globally until the
    Richardson estimate passes ``abs_tol`` or sits at rounding noise.

    ``f_vec`` must accept a numpy array of abscissae.  The seeding already
    grades the mesh toward the Gaussian peak, so the uniform halving only has
    to polish; the returned value carries the Richardson correction.
    """
    edges = np.asarray(points, dtype=np.float64)
    f_edges = f_vec(edges)
    mids = 0.5 * (edges[:-1] + edges[1:])
    f_mids = f_vec(mids)
    prev = None
    for level in range(max_depth + 1):
        widths = np.diff(edges)
        panel = widths / 6.0 * (f_edges[:-1] + 4.0 * f_mids + f_edges[1:])
        current = float(panel.sum())
        noise = _EPS * float(
            (widths * (np.abs(f_edges[:-1]) + 4.0 * np.abs(f_mids) + np.abs(f_edges[1:]))).sum()
        )
        if prev is not None:
            delta = current - prev
            if abs(delta) <= 15.0 * abs_tol or abs(delta) <= noise:
                return current + delta / 15.0
        if level == max_depth:
            err = abs(current - prev) / 15.0 if prev is not None else math.inf
            raise QuadratureError(
                f"refinement exhausted at depth {max_depth} "
                f"(error bound {err:.3g} > tol {abs_tol:.3g})",
                estimate=current,
                error_bound=err,
            )
        prev = current
        # Interleave edges and midpoints, then evaluate the new midpoints.
        new_edges = np.empty(edges.size + mids.size)
        new_edges[0::2] = edges
        new_edges[1::2] = mids
        edges = new_edges
        new_f = np.empty_like(new_edges)
        new_f[0::2] = f_edges
        new_f[1::2] = f_mids
        f_edges = new_f
        mids = 0.5 * (edges[:-1] + edges[1:])
        f_mids = f_vec(mids)
    raise AssertionError("unreachable")


def _seed_points(length: float, peak: float, width: float, n_osc: int) -> list[float]:
    # Split at the Gaussian peak first, then bracket it at dyadic multiples of
    # its width so a spike far narrower than the interval cannot be missed,
    # and keep panels short enough to resolve the sine oscillation.
    pts = {0.0, length}
    if 0.0 < peak < length:
        pts.add(peak)
    scale = width
    while scale < length:
        for p in (peak - scale, peak + scale):
            if 0.0 < p < length:
                pts.add(p)
        scale *= 2.0
    panels = max(4, 2 * n_osc)
    for i in range(1, panels):
        pts.add(length * i / panels)
    return sorted(pts)


def term_integral(
    n: int, problem: WedgeProblem, t: float, spec: QuadratureSpec | None = None
) -> float:
    """Integral of ``sin(pi*n*phi/(2*a_plus)) * exp(-(phi-a1)^2*(t+b_plus/a_plus)/2)``
    over the slope interval ``[0, 2*a_plus]``."""
    if n < 1:
        raise DomainError(f"term index must be >= 1, got {n}")
    t = check_horizon(t)
    if math.isinf(t):
        raise DomainError("term integrals need a finite horizon")
    a_plus = 0.5 * (problem.a1 + problem.a2)
    if a_plus <= 0.0:
        raise DomainError("a_plus must be positive (strip problems are handled elsewhere)")
    if spec is None:
        spec = default_quadrature_spec(problem, t)
    b_plus = 0.5 * (problem.b1 + problem.b2)
    s = t + b_plus / a_plus
    length = 2.0 * a_plus
    freq = math.pi * n / length
    a1 = problem.a1

    def integrand(phi: np.ndarray) -> np.ndarray:
        u = phi - a1
        return np.sin(freq * phi) * np.exp(-0.5 * s * u * u)

    points = _seed_points(length, a1, 1.0 / math.sqrt(s), n)
    return _integrate(integrand, points, spec.abs_tol, spec.max_depth)


# ---------------------------------------------------------------------------
# Partial sums
# ---------------------------------------------------------------------------


def _series_frame(problem: WedgeProblem, t: float) -> tuple[DerivedParams, float, float]:
    t = check_horizon(t)
    if math.isinf(t):
        raise DomainError("the dual series needs a finite horizon; use the limit series for T=inf")
    p = derive_params(problem, t)
    if p.a_plus <= 0.0:
        raise DomainError("a_plus must be positive (strip problems are handled elsewhere)")
    s = t + p.b_plus / p.a_plus
    return p, t, s


def _term_exponent(p: DerivedParams, t: float, s: float, n: int) -> float:
    # d^2/(2*alpha) minus the theta decay; the decay rate is written through
    # the identity a_plus/b_plus - 1/s = a_plus^2 * t / (b_plus*(a_plus*t+b_plus))
    # which stays accurate for huge t.
    decay = (
        math.pi * math.pi * n * n / (8.0 * p.a_plus * p.a_plus)
        * (p.a_plus * p.a_plus * t / (p.b_plus * (p.a_plus * t + p.b_plus)))
    )
    return p.d * p.d / (2.0 * p.alpha) - decay


def partial_sum(
    problem: WedgeProblem,
    t: float,
    n_terms: int,
    spec: QuadratureSpec | None = None,
) -> float:
    """N-term partial sum of the dual series (quadrature form)."""
    if n_terms < 1:
        raise DomainError(f"n_terms must be >= 1, got {n_terms}")
    p, t, s = _series_frame(problem, t)
    if spec is None:
        spec = default_quadrature_spec(problem, t)
    total = 0.0
    for n in range(1, n_terms + 1):
        sine = sinpi(n * problem.b1 / (2.0 * p.b_plus))
        if sine == 0.0:
            continue
        exponent = _term_exponent(p, t, s, n)
        if exponent < _LOG_FLOOR:
            continue
        total += math.exp(exponent) * sine * term_integral(n, problem, t, spec)
    return math.sqrt(s) / math.sqrt(p.alpha) * total


def partial_sum_erf(problem: WedgeProblem, t: float, n_terms: int) -> float:
    """N-term partial sum through the Faddeeva function (verification form).

    Expanding the complex-erf closed form of each term integral and folding
    the unit phases analytically leaves three real-exponent pieces per term;
    the conjugate pairing makes the result exactly real, so no imaginary
    residue is left to discard.
    """
    if n_terms < 1:
        raise DomainError(f"n_terms must be >= 1, got {n_terms}")
    p, t, s = _series_frame(problem, t)
    a1, a2 = problem.a1, problem.a2
    sqrt_s = math.sqrt(s)
    alpha_beta = p.alpha + p.beta
    d2 = p.d * p.d / (2.0 * p.alpha)
    total = 0.0
    for n in range(1, n_terms + 1):
        sine_b = sinpi(n * problem.b1 / (2.0 * p.b_plus))
        if sine_b == 0.0:
            continue
        omega = math.pi * n / (2.0 * p.a_plus)
        x0 = d2 - math.pi * math.pi * n * n / (8.0 * p.alpha)
        decay = d2 - math.pi * math.pi * n * n / (8.0 * alpha_beta)
        contrib = 0.0
        if x0 >= _LOG_FLOOR:
            sine_a = sinpi(n * a1 / (2.0 * p.a_plus))
            if sine_a != 0.0:
                contrib += math.exp(x0) * sine_a
        x1 = decay - 0.5 * a1 * a1 * s
        if x1 >= _LOG_FLOOR:
            w1 = faddeeva(complex(-omega / sqrt_s, a1 * sqrt_s) / math.sqrt(2.0))
            contrib -= 0.5 * math.exp(x1) * w1.imag
        x2 = decay - 0.5 * a2 * a2 * s
        if x2 >= _LOG_FLOOR:
            w2 = faddeeva(complex(omega / sqrt_s, a2 * sqrt_s) / math.sqrt(2.0))
            sign = -1.0 if n % 2 else 1.0
            contrib -= 0.5 * sign * math.exp(x2) * w2.imag
        total += sine_b * contrib
    return math.sqrt(2.0 * math.pi / p.alpha) * total


def partial_sum_rearranged(
    problem: WedgeProblem,
    t: float,
    pair_count: int,
    spec: QuadratureSpec | None = None,
) -> float:
    """Pair-indexed assembly: ``pair_count`` pairs cover ``2*pair_count`` terms.

    With u = pi*n*phi/(2*a_plus) and v = pi*n*b1/(2*b_plus), the product
    sin(u)*sin(v) in each term equals (cos(u - v) - cos(u + v))/2, so the
    outer sine factor moves inside the integrand as a phase.  Terms whose
    phase makes the difference vanish identically (every even n when
    b1 = b2) are skipped without integrating, which is what halves the work
    relative to term-by-term assembly.
    """
    if pair_count < 1:
        raise DomainError(f"pair_count must be >= 1, got {pair_count}")
    p, t, s = _series_frame(problem, t)
    if spec is None:
        spec = default_quadrature_spec(problem, t)
    length = 2.0 * p.a_plus
    a1 = problem.a1
    total = 0.0
    for n in range(1, 2 * pair_count + 1):
        if sinpi(n * problem.b1 / (2.0 * p.b_plus)) == 0.0:
            continue
        exponent = _term_exponent(p, t, s, n)
        if exponent < _LOG_FLOOR:
            continue
        freq = math.pi * n / length
        shift = math.pi * n * problem.b1 / (2.0 * p.b_plus)

        def integrand(phi: np.ndarray, freq=freq, shift=shift) -> np.ndarray:
            u = phi - a1
            gauss = np.exp(-0.5 * s * u * u)
            return 0.5 * (np.cos(freq * phi - shift) - np.cos(freq * phi + shift)) * gauss

        points = _seed_points(length, a1, 1.0 / math.sqrt(s), n)
        integral = _integrate(integrand, points, spec.abs_tol, spec.max_depth)
        total += math.exp(exponent) * integral
    return math.sqrt(s) / math.sqrt(p.alpha) * total


# ---------------------------------------------------------------------------
# Truncation planning
# ---------------------------------------------------------------------------


def remainder_bound(alpha, beta, n):
    """Guaranteed bound on the dropped tail after ``n`` terms; array-aware."""
    alpha_a = np.asarray(alpha, dtype=np.float64)
    beta_a = np.asarray(beta, dtype=np.float64)
    n_a = np.asarray(n, dtype=np.float64)
    alpha_b, beta_b, n_b = np.broadcast_arrays(alpha_a, beta_a, n_a)
    ok = (n_b >= 2) & (alpha_b > 0.0)
    safe_alpha = np.where(alpha_b > 0.0, alpha_b, 1.0)
    ab = safe_alpha + beta_b
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        bound = (
            2.0 * (2.0 / np.pi) ** 1.5
            * ab / (n_b * np.sqrt(safe_alpha))
            * np.exp(2.0 * safe_alpha - np.pi * np.pi * n_b * n_b / (8.0 * ab))
        )
    out = np.where(ok, bound, np.inf)
    if out.ndim == 0:
        return float(out)
    return out


def min_terms(params: DerivedParams, tol: float) -> TruncationPlan:
    """Smallest ``n >= 2`` whose remainder bound drops below ``tol``."""
    if not tol >= 1e-16:
        raise DomainError(f"tolerance must be >= 1e-16, got {tol}")
    if params.alpha <= 0.0:
        raise PlanningError("the dual series needs a_plus > 0 (alpha > 0)")
    for n in range(2, N_CAP + 1):
        bound = remainder_bound(params.alpha, params.beta, n)
        if bound < tol:
            return TruncationPlan(Method.ALTERNATIVE, n, bound, tol)
    raise PlanningError(
        f"dual-series plan exceeds {N_CAP} terms at tol={tol} "
        f"(alpha={params.alpha:g}, beta={params.beta:g})"
    )
