"""Special functions: regularized incomplete gamma, chi-square quantile,
and the log of the modified Bessel function of the first kind.
"""
import math
import sys
from statistics import NormalDist

from scipy import special as _sp

from .errors import NumericalError, ParameterError

_EPS = sys.float_info.epsilon
_TINY = 1e-300


def _gamma_series(a, x, max_iter):
    ap = a
    term = total = 1.0 / a
    for _ in range(max_iter):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            return total * math.exp(-x + a * math.log(x) - math.lgamma(a))
    raise NumericalError(f"incomplete gamma series did not converge (a={a}, x={x})")


def _gamma_continued_fraction(a, x, max_iter):
    # Modified Lentz evaluation of the upper tail Q(a, x).
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, max_iter + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h
    raise NumericalError(f"incomplete gamma continued fraction did not converge (a={a}, x={x})")


def gamma_p(a, x, max_iter=10_000):
    """Regularized lower incomplete gamma function P(a, x)."""
    if a <= 0:
        raise ParameterError(f"gamma_p needs a > 0, got {a}")
    if x < 0:
        raise ParameterError(f"gamma_p needs x >= 0, got {x}")
    if x == 0:
        return 0.0
    if x < a + 1.0:
        return _gamma_series(a, x, max_iter)
    return 1.0 - _gamma_continued_fraction(a, x, max_iter)


def chi2_cdf(x, df):
    return gamma_p(df / 2.0, x / 2.0) if x > 0 else 0.0


def chi2_quantile(p, df, rtol=1e-13):
    """Quantile of the chi-square distribution with ``df`` degrees of freedom.

    Starts from the Wilson-Hilferty cube approximation, brackets the root,
    then bisects on the incomplete gamma CDF.
    """
    if not 0.0 < p < 1.0:
        raise ParameterError(f"probability must lie in (0, 1), got {p}")
    if df <= 0:
        raise ParameterError(f"degrees of freedom must be positive, got {df}")
    z = NormalDist().inv_cdf(p)
    h = 2.0 / (9.0 * df)
    guess = df * max(1.0 - h + z * math.sqrt(h), 1e-3) ** 3

    lo, hi = guess, guess
    while chi2_cdf(lo, df) > p:
        lo *= 0.5
    while chi2_cdf(hi, df) < p:
        hi *= 2.0
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if chi2_cdf(mid, df) < p:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rtol * hi:
            break
    return 0.5 * (lo + hi)


def _log_iv_series(v, x):
    # I_v(x) = (x/2)^v sum_k (x^2/4)^k / (k! Gamma(v + k + 1)), summed with rescaling.
    q = 0.25 * x * x
    term = total = 1.0
    log_offset = 0.0
    for k in range(1, 100_000):
        term *= q / (k * (v + k))
        total += term
        if total > 1e250:
            total *= 1e-250
            term *= 1e-250
            log_offset += 250.0 * math.log(10.0)
        if term < total * _EPS * 0.5:
            break
    else:
        raise NumericalError(f"Bessel series did not converge (v={v}, x={x})")
    return v * math.log(0.5 * x) - math.lgamma(v + 1.0) + math.log(total) + log_offset


def _log_iv_debye(v, x):
    # Uniform asymptotic expansion in the order v, four correction terms.
    z = x / v
    root = math.sqrt(1.0 + z * z)
    t = 1.0 / root
    eta = root + math.log(z / (1.0 + root))
    t2 = t * t
    u1 = t * (3.0 - 5.0 * t2) / 24.0
    u2 = t2 * (81.0 - 462.0 * t2 + 385.0 * t2 * t2) / 1152.0
    u3 = t * t2 * (30375.0 - 369603.0 * t2 + 765765.0 * t2**2 - 425425.0 * t2**3) / 414720.0
    u4 = t2 * t2 * (
        4465125.0 - 94121676.0 * t2 + 349922430.0 * t2**2
        - 446185740.0 * t2**3 + 185910725.0 * t2**4
    ) / 39813120.0
    corr = 1.0 + u1 / v + u2 / v**2 + u3 / v**3 + u4 / v**4
    return v * eta - 0.5 * math.log(2.0 * math.pi * v) - 0.5 * math.log(root) + math.log(corr)


def log_bessel_iv(v, x):
    """log I_v(x) for order v >= 0 and argument x >= 0.

    Power series while x^2/4 is moderate relative to v, the uniform
    asymptotic expansion for large orders, and the exponentially scaled
    library routine for small orders at large arguments.
    """
    if v < 0 or x < 0:
        raise ParameterError(f"log_bessel_iv needs v >= 0 and x >= 0, got v={v}, x={x}")
    if x == 0:
        return 0.0 if v == 0 else -math.inf
    if 0.25 * x * x <= 25.0 * (v + 1.0):
        return _log_iv_series(v, x)
    if v >= 50.0:
        return _log_iv_debye(v, x)
    scaled = float(_sp.ive(v, x))
    if not (scaled > 0.0 and math.isfinite(scaled)):
        raise NumericalError(f"scaled Bessel evaluation failed (v={v}, x={x})")
    return math.log(scaled) + x
