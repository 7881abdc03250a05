"""von Mises-Fisher density, sampling, concentration estimation and
confidence-cone apex angles.
"""
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import DegenerateInputError, NumericalError, ParameterError, ShapeError
from .special import chi2_quantile, log_bessel_iv
from .sphere import normalize

KAPPA_MIN = 1e-3
KAPPA_MAX = 1e6
R_BAR_CLAMP = 1e-6


def clamp_kappa(kappa):
    return float(min(max(kappa, KAPPA_MIN), KAPPA_MAX))


@dataclass(frozen=True)
class VmfParams:
    mu: np.ndarray
    kappa: float

    def __post_init__(self):
        mu = normalize(self.mu)
        mu.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        if not KAPPA_MIN <= self.kappa <= KAPPA_MAX:
            raise ParameterError(
                f"kappa={self.kappa} outside [{KAPPA_MIN}, {KAPPA_MAX}]; clamp it first"
            )

    @property
    def d(self):
        return self.mu.shape[0]


@dataclass(frozen=True)
class ConfidenceCone:
    axis: np.ndarray
    apex_angle: float
    confidence: float


def log_normalizer(kappa, d):
    """log C_d(kappa), the vMF normalizing constant on S^{d-1}."""
    nu = 0.5 * d - 1.0
    return nu * math.log(kappa) - 0.5 * d * math.log(2.0 * math.pi) - log_bessel_iv(nu, kappa)


def vmf_log_density(x, params):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != params.d:
        raise ShapeError(f"point has dimension {x.shape[-1]}, distribution has {params.d}")
    return log_normalizer(params.kappa, params.d) + params.kappa * (x @ params.mu)


def sample_vmf(params, n, rng):
    """Draw ``n`` samples (``n x d``) with Wood's rejection sampler."""
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    mu, kappa, d = params.mu, params.kappa, params.d
    m = d - 1
    b = m / (2.0 * kappa + math.sqrt(4.0 * kappa**2 + m**2))
    x0 = (1.0 - b) / (1.0 + b)
    c = kappa * x0 + m * math.log(1.0 - x0**2)

    w = np.empty(n)
    filled = 0
    while filled < n:
        want = n - filled
        z = rng.beta(0.5 * m, 0.5 * m, size=want)
        cand = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z)
        u = rng.uniform(size=want)
        ok = kappa * cand + m * np.log(1.0 - x0 * cand) - c >= np.log(u)
        got = cand[ok]
        w[filled:filled + got.size] = got
        filled += got.size

    v = rng.standard_normal((n, d))
    v -= np.outer(v @ mu, mu)
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    out = w[:, None] * mu[None, :] + np.sqrt(np.clip(1.0 - w**2, 0.0, None))[:, None] * v
    return out / np.linalg.norm(out, axis=1, keepdims=True)


def mean_resultant_length(rows):
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[0] == 0:
        raise DegenerateInputError("need at least one row to compute a mean resultant")
    return float(np.linalg.norm(rows.mean(axis=0)))


def banerjee_kappa(r_bar, d):
    r = min(max(r_bar, R_BAR_CLAMP), 1.0 - R_BAR_CLAMP)
    return clamp_kappa(r * (d - r * r) / (1.0 - r * r))


def estimate_kappa(rows, d=None):
    """Mean direction and Banerjee concentration estimate of unit ``rows``.

    Returns ``(mu, kappa)``; kappa is clamped to [KAPPA_MIN, KAPPA_MAX].
    """
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[0] == 0:
        raise DegenerateInputError("cannot estimate kappa from an empty batch")
    d = rows.shape[1] if d is None else d
    mean = rows.mean(axis=0)
    r_bar = float(np.linalg.norm(mean))
    if r_bar == 0.0:
        mu = np.zeros(rows.shape[1])
        mu[0] = 1.0
    else:
        mu = mean / r_bar
    return mu, banerjee_kappa(r_bar, d)


def bessel_ratio(kappa, d):
    """A_d(kappa) = I_{d/2}(kappa) / I_{d/2-1}(kappa), the expected resultant length."""
    nu = 0.5 * d - 1.0
    return math.exp(log_bessel_iv(nu + 1.0, kappa) - log_bessel_iv(nu, kappa))


def apex_angle_approx(kappa, d, alpha=0.95):
    """Tangent-space Gaussian approximation sqrt(chi2_alpha(d-1) / kappa), capped at pi."""
    if kappa <= 0:
        raise ParameterError(f"kappa must be positive, got {kappa}")
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")
    return min(math.sqrt(chi2_quantile(alpha, d - 1) / kappa), math.pi)


def _log_angle_density(kappa, d):
    # log of (sin t)^{d-2} exp(kappa cos t), shifted so its maximum is 0.
    if d == 2:
        peak = kappa
        return lambda t: kappa * np.cos(t) - peak, 0.0
    c = (-(d - 2) + math.sqrt((d - 2) ** 2 + 4.0 * kappa**2)) / (2.0 * kappa)
    mode = math.acos(min(max(c, -1.0), 1.0))
    peak = (d - 2) * math.log(math.sin(mode)) + kappa * math.cos(mode)

    def f(t):
        with np.errstate(divide="ignore"):
            return (d - 2) * np.log(np.sin(t)) + kappa * np.cos(t) - peak

    return f, mode


def _quad(f, a, b, points):
    pts = [p for p in points if a < p < b] or None
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(f, a, b, points=pts, limit=500, epsabs=0.0, epsrel=1e-12)
        except integrate.IntegrationWarning as exc:
            raise NumericalError(f"quadrature failed on [{a}, {b}]: {exc}") from exc
    return val


def angle_cdf(kappa, d):
    """Marginal CDF of the angle to the mean direction, as a callable."""
    logf, mode = _log_angle_density(kappa, d)
    f = lambda t: math.exp(logf(t))  # noqa: E731
    width = 1.0 / math.sqrt(kappa + d)
    points = sorted({mode, max(mode - 3 * width, 0.0), min(mode + 3 * width, math.pi)})
    total = _quad(f, 0.0, math.pi, points)
    if not total > 0.0:
        raise NumericalError(f"zero normalizer for kappa={kappa}, d={d}")

    def cdf(theta):
        if theta <= 0.0:
            return 0.0
        if theta >= math.pi:
            return 1.0
        return _quad(f, 0.0, theta, points) / total

    return cdf


def apex_angle_exact(kappa, d, alpha=0.95, tol=1e-8):
    """Invert the marginal angle CDF by bisection on adaptive quadrature."""
    if kappa <= 0:
        raise ParameterError(f"kappa must be positive, got {kappa}")
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")
    cdf = angle_cdf(kappa, d)
    lo, hi = 0.0, math.pi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if cdf(mid) < alpha:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def confidence_cone(params, alpha=0.95):
    return ConfidenceCone(params.mu, apex_angle_approx(params.kappa, params.d, alpha), alpha)
