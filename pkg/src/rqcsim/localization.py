"""Bayesian estimation of the relative angle between two symmetric sources.

Gauge: the first source is ``|0>`` and the second is ``|theta>`` in the XZ
right half-plane.  A singlet/triplet measurement on one pair from each
source yields "triplet" with probability ``q = (3 + cos theta)/4``, and
with ``theta`` drawn from ``sin(theta)/2`` the overlap parameter ``q`` is
uniform on ``[1/2, 1]``.  After ``n1`` triplets in ``M`` trials the
posterior on ``q`` is ``q^n1 (1-q)^(M-n1)`` normalised over ``[1/2, 1]``;
the normaliser is

    T(a, b) = int_{1/2}^{1} q^a (1-q)^b dq
            = a! b! / (a+b+1)! * 2^-(a+b+1) * sum_{j<=a} C(a+b+1, j).

``T`` and everything derived from it is exact (``Fraction``) while
``a + b <= EXACT_CAP``.  Beyond that, log-space floats and truncated-Beta
identities take over.

Useful closed forms for pure qubit states in this gauge:
``cos^2(theta/2) = 2q - 1`` and ``sin^2(theta/2) = 2 - 2q``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy import optimize, special

from .errors import CapacityError, DomainError, NumericalError
from .quadrature import adaptive_gauss_legendre

EXACT_CAP = 2000
INT64_MAX = 2**63 - 1
WINDOW_SIGMAS = 40.0
QUAD_TOL = 1e-10


@dataclass(frozen=True)
class OverlapParam:
    q: float

    def __post_init__(self):
        if not 0.5 <= self.q <= 1.0:
            raise DomainError(f"q={self.q!r} outside [1/2, 1]")

    @property
    def theta(self) -> float:
        return theta_from_q(self.q)


@dataclass(frozen=True)
class TrialCounts:
    M: int
    n1: int

    def __post_init__(self):
        if self.M < 0 or not 0 <= self.n1 <= self.M:
            raise DomainError(f"invalid counts M={self.M}, n1={self.n1}")


@dataclass(frozen=True)
class PosteriorSummary:
    """Moments of the posterior on ``q``.

    ``second_moment_exact`` is ``T(n1+2, .)/T(n1, .)``; ``variance_central``
    subtracts the squared mean.  The ``*_approx`` fields are the untruncated
    Beta expressions.  The ``*_fraction`` fields hold exact rationals when
    the exact path was used and ``None`` otherwise.
    """

    n1: int
    M: int
    mean_exact: float
    mean_approx: float
    second_moment_exact: float
    variance_central: float
    variance_approx: float
    exact: bool
    mean_fraction: Fraction | None = None
    second_moment_fraction: Fraction | None = None
    variance_fraction: Fraction | None = None

    @property
    def sigma(self) -> float:
        return math.sqrt(self.variance_central)


@dataclass(frozen=True)
class ErrorBudget:
    N: int
    M: int
    h: float
    bound: float
    bound_at_h: float


def _check_q(q):
    arr = np.asarray(q, dtype=float)
    if np.any(arr < 0.5) or np.any(arr > 1.0) or np.any(np.isnan(arr)):
        raise DomainError(f"q outside [1/2, 1]: {q!r}")
    return arr


def q_from_theta(theta: float) -> OverlapParam:
    """Triplet probability ``(3 + cos theta)/4`` for ``|0>|theta>``."""
    if not 0.0 <= theta <= math.pi:
        raise DomainError(f"theta={theta!r} outside [0, pi]")
    return OverlapParam(min(1.0, max(0.5, (3.0 + math.cos(theta)) / 4.0)))


def theta_from_q(q) -> float:
    if isinstance(q, OverlapParam):
        q = q.q
    _check_q(q)
    return math.acos(min(1.0, max(-1.0, 4.0 * q - 3.0)))


def theta_from_uniform(u: float) -> float:
    """Inverse CDF of the ``sin(theta)/2`` density on ``[0, pi]``."""
    return math.acos(1.0 - 2.0 * u)


def sample_theta(rng: np.random.Generator) -> float:
    return theta_from_uniform(rng.random())


def simulate_trials(theta: float, M: int, rng: np.random.Generator) -> TrialCounts:
    """Outcomes of ``M`` s/t measurements on ``|0>|theta>`` pairs, as a triplet count."""
    if M < 1:
        raise DomainError("M must be >= 1")
    q = q_from_theta(theta).q
    return TrialCounts(M, int(rng.binomial(M, q)))


# --- T(a, b) -------------------------------------------------------------


def _check_ab(a, b):
    if a < 0 or b < 0:
        raise DomainError(f"T(a, b) needs a, b >= 0, got ({a}, {b})")


@lru_cache(maxsize=200_000)
def t_integral(a: int, b: int) -> Fraction:
    """Exact ``T(a, b)`` from the binomial partial-sum closed form."""
    _check_ab(a, b)
    if a + b > EXACT_CAP:
        raise CapacityError(f"a+b={a + b} exceeds EXACT_CAP={EXACT_CAP}; use log_t_integral")
    n = a + b + 1
    partial = 0
    c = 1
    for j in range(a + 1):
        partial += c
        c = c * (n - j) // (j + 1)
    return Fraction(math.factorial(a) * math.factorial(b) * partial, math.factorial(n) << n)


def _log_fraction(x: Fraction) -> float:
    return math.log(x.numerator) - math.log(x.denominator)


def _log_t_closed_form(a: int, b: int) -> float:
    n = a + b + 1
    j = np.arange(a + 1)
    log_terms = special.gammaln(n + 1) - special.gammaln(j + 1) - special.gammaln(n - j + 1)
    return float(
        special.gammaln(a + 1)
        + special.gammaln(b + 1)
        - special.gammaln(n + 1)
        - n * math.log(2.0)
        + special.logsumexp(log_terms)
    )


def log_t_integral(a: int, b: int) -> float:
    """``log T(a, b)``: exact below the cap, log-space floats above it."""
    _check_ab(a, b)
    if a + b <= EXACT_CAP:
        return _log_fraction(t_integral(a, b))
    lb = float(special.betaln(a + 1, b + 1))
    if a >= b:
        return lb + math.log1p(-float(special.betainc(a + 1, b + 1, 0.5)))
    upper = float(special.betainc(b + 1, a + 1, 0.5))
    if upper > 0.0:
        return lb + math.log(upper)
    return _log_t_closed_form(a, b)


def log_t_integral_approx(a: int, b: int) -> float:
    if not a > (a + b) / 2:
        raise DomainError(f"approximation needs a > (a+b)/2, got a={a}, b={b}")
    return -float(special.gammaln(a + b + 1) - special.gammaln(a + 1) - special.gammaln(b + 1)) - math.log(a + b + 1)


def t_integral_approx(a: int, b: int) -> float:
    """``1 / (C(a+b, a) (a+b+1))``, the untruncated Beta integral."""
    return math.exp(log_t_integral_approx(a, b))


def marginal_pmf(n1: int, M: int) -> Fraction:
    """Probability of ``n1`` triplets in ``M`` trials under the uniform prior on ``q``."""
    if not 0 <= n1 <= M:
        raise DomainError(f"need 0 <= n1 <= M, got n1={n1}, M={M}")
    return 2 * math.comb(M, n1) * t_integral(n1, M - n1)


# --- posterior -----------------------------------------------------------


def _reference_point(a, b):
    if a + b == 0:
        return 0.75
    return min(1.0, max(0.5, a / (a + b)))


def _log1p_minus_x(x):
    """``log(1 + x) - x``, accurate for small ``|x|``."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 0.1
    xs = np.where(small, x, 0.0)
    series = np.zeros_like(xs)
    for k in range(18, 1, -1):
        series = xs * (((-1) ** (k + 1)) / k + series)
    series = xs * series
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = np.log1p(np.where(small, 0.0, x)) - np.where(small, 0.0, x)
    return np.where(small, series, direct)


def _log_weight(d, a, b, q_ref):
    """``log[q^a (1-q)^b] - log[q_ref^a (1-q_ref)^b]`` at ``q = q_ref + d``.

    Taking the offset ``d`` rather than ``q`` keeps resolution when the
    posterior is far narrower than the spacing of doubles near ``q_ref``.
    The linear parts of the two logarithms nearly cancel around the mode, so
    they are combined analytically and only the remainders are scaled by the
    (possibly enormous) counts.
    """
    d = np.asarray(d, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        if a and b:
            slope = (a - (a + b) * q_ref) / (q_ref * (1.0 - q_ref))
            return d * slope + a * _log1p_minus_x(d / q_ref) + b * _log1p_minus_x(-d / (1.0 - q_ref))
        if a:
            return a * np.log1p(d / q_ref)
        if b:
            return b * np.log1p(-d / (1.0 - q_ref))
    return np.zeros_like(d)


def posterior_pdf(q, n1: int, M: int):
    """Posterior density on ``[1/2, 1]``; accurate while ``log T`` is (roughly ``M < 1e7``)."""
    if not 0 <= n1 <= M:
        raise DomainError(f"need 0 <= n1 <= M, got n1={n1}, M={M}")
    arr = _check_q(q)
    a, b = n1, M - n1
    q_ref = _reference_point(a, b)
    log_ref = (a * math.log(q_ref) if a else 0.0) + (b * math.log1p(-q_ref) if b else 0.0)
    dens = np.exp(_log_weight(arr - q_ref, a, b, q_ref) + log_ref - log_t_integral(a, b))
    return float(dens) if np.ndim(q) == 0 else dens


def _summary_exact(n1, M):
    b = M - n1
    t0 = t_integral(n1, b)
    mean = t_integral(n1 + 1, b) / t0
    second = t_integral(n1 + 2, b) / t0
    var = second - mean * mean
    return mean, second, var


def _summary_float(n1, M):
    """Moments by quadrature in offsets from the mode; returns ``(mean, second, variance, mean - q_ref)``."""
    a, b = n1, M - n1
    q_ref = _reference_point(a, b)
    w = lambda d: np.exp(_log_weight(d, a, b, q_ref))
    lo, hi = _window(a, b, q_ref)
    scale = min(hi - lo, 2.5 * _beta_sd(a, b))
    quad = lambda f, tol: adaptive_gauss_legendre(f, lo, hi, tol=tol, initial_panels=16).value
    z = quad(w, 1e-14 * scale)
    if not z > 0:
        raise NumericalError("posterior normaliser vanished", {"n1": n1, "M": M, "window": (lo, hi)})
    off = quad(lambda d: d * w(d), 1e-14 * scale * z * max(scale, abs(q_ref))) / z
    var = quad(lambda d: (d - off) ** 2 * w(d), 1e-14 * z * scale**2) / z
    mean = q_ref + off
    return mean, var + mean * mean, var, off


def posterior_summary(n1: int, M: int) -> PosteriorSummary:
    if not 0 <= n1 <= M:
        raise DomainError(f"need 0 <= n1 <= M, got n1={n1}, M={M}")
    mean_approx = (n1 + 1) / (M + 2)
    var_approx = (n1 + 1) * (M + 1 - n1) / ((M + 2) ** 2 * (M + 3))
    if M + 2 <= EXACT_CAP:
        mean, second, var = _summary_exact(n1, M)
        if M >= 1 and not var < Fraction(1, M):
            raise NumericalError("central variance is not below 1/M", {"n1": n1, "M": M, "variance": var})
        return PosteriorSummary(
            n1, M, float(mean), mean_approx, float(second), float(var), var_approx, True, mean, second, var
        )
    mean, second, var, _ = _summary_float(n1, M)
    if not var < 1.0 / M:
        raise NumericalError("central variance is not below 1/M", {"n1": n1, "M": M, "variance": var})
    return PosteriorSummary(n1, M, mean, mean_approx, second, var, var_approx, False)


def _beta_sd(a, b):
    m = a + b
    return math.sqrt((a + 1) * (b + 1) / ((m + 2) ** 2 * (m + 3)))


def _window(a, b, q_ref, centre_offset=None):
    """Integration window ``[lo, hi]`` as offsets from ``q_ref``, clipped to ``[1/2, 1]``.

    When the untruncated mean falls below 1/2 the posterior decays away from
    the boundary at rate ``|2a - 2b|``, which can be much narrower than the
    Beta standard deviation.
    """
    if centre_offset is None:
        centre_offset = float(Fraction(a + 1, a + b + 2) - Fraction(q_ref))
    scale = _beta_sd(a, b)
    if (a + 1) / (a + b + 2) < 0.5 and a != b:
        scale = min(scale, 1.0 / abs(2 * a - 2 * b))
    centre = min(1.0 - q_ref, max(0.5 - q_ref, centre_offset))
    lo = max(0.5 - q_ref, centre - WINDOW_SIGMAS * scale)
    hi = min(1.0 - q_ref, centre + WINDOW_SIGMAS * scale)
    return lo, hi


# --- distances -----------------------------------------------------------


def _sin_half_gap(q1, q2):
    """``sin((theta2 - theta1)/2)`` for the XZ-plane states labelled by ``q1``, ``q2``.

    Uses the rationalised form ``2 (q2 - q1) / (...)`` so nearby ``q`` do
    not cancel.
    """
    q1 = np.asarray(q1, dtype=float)
    q2 = np.asarray(q2, dtype=float)
    denom = np.sqrt(2 - 2 * q1) * np.sqrt(2 * q2 - 1) + np.sqrt(2 * q1 - 1) * np.sqrt(2 - 2 * q2)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(denom > 0, 2 * (q2 - q1) / np.where(denom > 0, denom, 1.0), 0.0)
    return np.clip(s, -1.0, 1.0)


def overlap_squared(q1, q2):
    """``|<q1|q2>|^2 = cos^2((theta1 - theta2)/2)``."""
    s = _sin_half_gap(_check_q(q1), _check_q(q2))
    return 1.0 - s * s


def trace_distance_q(q1, q2):
    """``2 |sin((theta1 - theta2)/2)|`` for the pure states ``|q1>``, ``|q2>``."""
    out = 2.0 * np.abs(_sin_half_gap(_check_q(q1), _check_q(q2)))
    return float(out) if out.ndim == 0 else out


def trace_distance_bound(q1, q2):
    """``2 sqrt(8 |q1 - q2|)``."""
    out = 2.0 * np.sqrt(8.0 * np.abs(_check_q(q1) - _check_q(q2)))
    return float(out) if out.ndim == 0 else out


def tensor_distance_from_overlap(F, N):
    """``2 sqrt(1 - F^N)``, the trace distance between ``N``-fold copies of pure states with overlap ``F``."""
    F = np.asarray(F, dtype=float)
    with np.errstate(divide="ignore"):
        out = 2.0 * np.sqrt(-np.expm1(N * np.log1p(-(1.0 - F))))
    return out


def tensor_power_distance(q1, q2, N: int):
    if N < 1:
        raise DomainError("N must be >= 1")
    s = _sin_half_gap(_check_q(q1), _check_q(q2))
    with np.errstate(divide="ignore"):
        out = 2.0 * np.sqrt(-np.expm1(N * np.log1p(-s * s)))
    return float(out) if out.ndim == 0 else out


def sqrt_n_bound(F, N):
    """``sqrt(N) * 2 sqrt(1 - F)``, which always dominates the tensor-power distance."""
    return math.sqrt(N) * 2.0 * np.sqrt(1.0 - np.asarray(F, dtype=float))


def sqrt_n_minus_1_bound(F, N):
    return math.sqrt(N - 1) * 2.0 * np.sqrt(1.0 - np.asarray(F, dtype=float))


def sqrt_n_minus_1_violation_threshold(N: int) -> float:
    """Smallest overlap ``F`` above which ``2 sqrt(1-F^N) > sqrt(N-1) 2 sqrt(1-F)``.

    The violation set is the interval ``(threshold, 1)``.  Returns 0 when
    every ``F < 1`` violates (``N <= 2``).
    """
    if N < 1:
        raise DomainError("N must be >= 1")
    if N <= 2:
        return 0.0
    g = lambda F: 1.0 - F**N - (N - 1) * (1.0 - F)
    # g(0) < 0 and g < 0 ... > 0 just below 1; the root below 1 is unique
    return float(optimize.brentq(g, 0.0, 1.0 - 1e-12 / N, xtol=1e-15))


@dataclass(frozen=True)
class CoefficientReport:
    grid_points: int
    sqrt_n_violations: int
    sqrt_n_minus_1_violations: int
    thresholds: dict


def tensor_coefficient_report(F_values, N_values) -> CoefficientReport:
    """Check both coefficient variants of the tensor-power inequality on a grid."""
    F = np.asarray(F_values, dtype=float)
    bad_n = 0
    bad_nm1 = 0
    for N in N_values:
        exact = tensor_distance_from_overlap(F, N)
        bad_n += int(np.sum(exact > sqrt_n_bound(F, N) * (1 + 1e-12) + 1e-15))
        bad_nm1 += int(np.sum(exact > sqrt_n_minus_1_bound(F, N) * (1 + 1e-12) + 1e-15))
    thresholds = {int(N): sqrt_n_minus_1_violation_threshold(int(N)) for N in N_values}
    return CoefficientReport(F.size * len(list(N_values)), bad_n, bad_nm1, thresholds)


def _tensor_distance_offsets(q_ref, mu_off, d, N):
    """``N``-copy distance between ``|mu>`` and ``|q>`` with ``mu = q_ref + mu_off``, ``q = q_ref + d``."""
    mu = q_ref + mu_off
    q = q_ref + d
    one_minus_q = np.maximum((1.0 - q_ref) - d, 0.0)
    two_q_minus_1 = np.maximum(2.0 * (q_ref - 0.5) + 2.0 * d, 0.0)
    denom = math.sqrt(max(2.0 - 2.0 * mu, 0.0)) * np.sqrt(two_q_minus_1) + math.sqrt(max(2.0 * mu - 1.0, 0.0)) * np.sqrt(
        2.0 * one_minus_q
    )
    delta = d - mu_off
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(denom > 0, 2.0 * delta / np.where(denom > 0, denom, 1.0), 0.0)
        s = np.clip(s, -1.0, 1.0)
        return 2.0 * np.sqrt(-np.expm1(N * np.log1p(-s * s)))


def ensemble_error_exact(n1: int, M: int, N: int, tol: float = QUAD_TOL) -> float:
    """Posterior average of the ``N``-copy trace distance between ``|mu>`` and ``|q>``.

    Adaptive Gauss-Legendre in the offset from the posterior mode, over a
    window of ``WINDOW_SIGMAS`` standard deviations, split at ``mu`` where
    the distance has a kink, and normalised by the same quadrature.  When
    ``T`` is exact the numerical normaliser is checked against it.
    """
    if N < 1:
        raise DomainError("N must be >= 1")
    if not 0 <= n1 <= M:
        raise DomainError(f"need 0 <= n1 <= M, got n1={n1}, M={M}")
    a, b = n1, M - n1
    q_ref = _reference_point(a, b)
    if M + 2 <= EXACT_CAP:
        mu_off = float(_summary_exact(n1, M)[0] - Fraction(q_ref))
    else:
        mu_off = _summary_float(n1, M)[3]
    lo, hi = _window(a, b, q_ref, mu_off)
    lo, hi = min(lo, mu_off), max(hi, mu_off)
    w = lambda d: np.exp(_log_weight(d, a, b, q_ref))

    z_scale = min(hi - lo, 2.5 * _beta_sd(a, b))
    z = adaptive_gauss_legendre(w, lo, hi, tol=1e-12 * z_scale, initial_panels=8, breakpoints=(mu_off,))
    if z.value <= 0:
        raise NumericalError("posterior normaliser vanished", {"n1": n1, "M": M, "window": (lo, hi)})
    if a + b <= EXACT_CAP:
        log_ref = (a * math.log(q_ref) if a else 0.0) + (b * math.log1p(-q_ref) if b else 0.0)
        z_exact = math.exp(log_t_integral(a, b) - log_ref)
        if abs(z.value / z_exact - 1.0) > 1e-8:
            raise NumericalError(
                "quadrature normaliser disagrees with exact T",
                {"n1": n1, "M": M, "quadrature": z.value, "exact": z_exact},
            )
    f = lambda d: w(d) * _tensor_distance_offsets(q_ref, mu_off, d, N)
    num = adaptive_gauss_legendre(f, lo, hi, tol=tol * z.value, initial_panels=8, breakpoints=(mu_off,))
    return num.value / z.value


def ensemble_error_bound(N: int, M: int) -> float:
    """``2 sqrt(8 (N-1)) sqrt(2 / M^(1/3))``, the chain's closing bound."""
    if N < 1 or M < 1:
        raise DomainError("N and M must be >= 1")
    return 2.0 * math.sqrt(8.0 * (N - 1)) * math.sqrt(2.0 / float(np.cbrt(M)))


def chain_bound_at_h(N: int, M: int, h: float) -> float:
    """Chain bound before choosing ``h``: ``2 sqrt(8 (N-1)) sqrt(1/h^2 + h/sqrt(M))``."""
    return 2.0 * math.sqrt(8.0 * (N - 1)) * math.sqrt(1.0 / h**2 + h / math.sqrt(M))


def error_budget(N: int, M: int, h: float | None = None) -> ErrorBudget:
    if h is None:
        h = float(M) ** (1.0 / 6.0)
    return ErrorBudget(N, M, h, ensemble_error_bound(N, M), chain_bound_at_h(N, M, h))


def log_required_M(N: int, epsilon: float) -> float:
    """``log`` of the real-valued inversion ``(64 (N-1) / eps^2)^3``."""
    if N < 2 or not epsilon > 0:
        raise DomainError("need N >= 2 and epsilon > 0")
    return 3.0 * (math.log(64 * (N - 1)) - 2.0 * math.log(epsilon))


def required_M(N: int, epsilon: float) -> int:
    """Smallest ``M`` with ``ensemble_error_bound(N, M) <= epsilon``.

    From ``8 sqrt((N-1) / M^(1/3)) <= eps`` we get ``M >= (64 (N-1)/eps^2)^3``;
    the ceiling is taken in exact arithmetic on the binary value of ``eps``.
    """
    if N < 2 or not epsilon > 0:
        raise DomainError("need N >= 2 and epsilon > 0")
    logm = log_required_M(N, epsilon)
    if logm > math.log(INT64_MAX) + 1.0:
        raise CapacityError(f"required M exceeds 2^63-1 (log M = {logm:.6g})")
    eps = Fraction(epsilon)
    exact = Fraction(64 * (N - 1)) ** 3 / eps**6
    m = math.ceil(exact)
    # float rounding in the bound may disagree by one at an exact boundary
    while m > 1 and ensemble_error_bound(N, m - 1) <= epsilon:
        m -= 1
    while ensemble_error_bound(N, m) > epsilon:
        m += 1
    if m > INT64_MAX:
        raise CapacityError(f"required M exceeds 2^63-1 (log M = {logm:.6g})")
    return m
