import math

import mpmath
import numpy as np
import pytest
from scipy import optimize

from hypermargin.errors import DegenerateInputError, ParameterError
from hypermargin.sphere import angular_distance, normalize, sample_uniform_sphere
from hypermargin.vmf import (
    KAPPA_MAX, KAPPA_MIN, VmfParams, angle_cdf, apex_angle_approx, apex_angle_exact,
    banerjee_kappa, bessel_ratio, confidence_cone, estimate_kappa, log_normalizer, sample_vmf,
    vmf_log_density,
)


def e1(d):
    v = np.zeros(d)
    v[0] = 1.0
    return v


def test_uniform_limit_density_on_s2(rng):
    p = VmfParams(e1(3), KAPPA_MIN)
    for x in sample_uniform_sphere(3, rng, size=5):
        assert vmf_log_density(x, p) == pytest.approx(-math.log(4 * math.pi), abs=1e-3)


def test_mode_at_mean(rng):
    p = VmfParams(normalize(np.array([1.0, 2.0, -1.0, 0.5])), 7.0)
    at_mu = vmf_log_density(p.mu, p)
    others = sample_uniform_sphere(4, rng, size=1000)
    assert all(vmf_log_density(x, p) <= at_mu for x in others)


def test_closed_form_d3():
    # C_3(k) = k / (4 pi sinh k); log C_3(2) = -3.12624
    ref = math.log(2 / (4 * math.pi * math.sinh(2)))
    assert log_normalizer(2.0, 3) == pytest.approx(ref, abs=1e-12)
    assert ref == pytest.approx(-3.12624, abs=1e-5)
    assert vmf_log_density(e1(3), VmfParams(e1(3), 2.0)) == pytest.approx(ref + 2, abs=1e-12)


def test_density_integrates_to_one_on_circle():
    k = 3.0
    p = VmfParams(e1(2), k)
    val, _ = mpmath.quad(lambda t: math.exp(vmf_log_density(np.array([math.cos(t), math.sin(t)]), p)),
                         [0, math.pi, 2 * math.pi]), None
    assert float(val) == pytest.approx(1.0, abs=1e-10)


def test_params_reject_bad_kappa():
    with pytest.raises(ParameterError):
        VmfParams(e1(3), 0.0)
    with pytest.raises(ParameterError):
        VmfParams(e1(3), 2e6)


def test_sampler_near_uniform(rng):
    x = sample_vmf(VmfParams(e1(8), KAPPA_MIN), 10_000, rng)
    assert x.shape == (10_000, 8)
    assert np.allclose(np.linalg.norm(x, axis=1), 1)
    assert np.linalg.norm(x.mean(axis=0)) < 0.05


def test_sampler_mean_resultant_matches_cubic_solution(rng):
    d, k = 64, 200.0
    mu = normalize(rng.standard_normal(d))
    x = sample_vmf(VmfParams(mu, k), 20_000, rng)
    r_bar = np.linalg.norm(x.mean(axis=0))
    r_star = optimize.brentq(lambda r: r * (d - r * r) / (1 - r * r) - k, 1e-9, 1 - 1e-12)
    assert r_bar == pytest.approx(r_star, rel=0.01)
    assert r_bar == pytest.approx(bessel_ratio(k, d), rel=0.01)
    assert angular_distance(normalize(x.mean(axis=0)), mu) < 0.05


def test_sampler_is_seeded():
    p = VmfParams(e1(5), 10.0)
    a = sample_vmf(p, 50, np.random.default_rng(3))
    b = sample_vmf(p, 50, np.random.default_rng(3))
    assert np.array_equal(a, b)


def test_banerjee_direct_values():
    assert banerjee_kappa(0.5, 3) == pytest.approx(1.833333333, rel=1e-9)
    assert banerjee_kappa(0.9, 768) == pytest.approx(0.9 * (768 - 0.81) / 0.19, rel=1e-12)
    assert banerjee_kappa(0.9, 768) == pytest.approx(3634.06, abs=0.01)


def test_banerjee_cross_check_bessel_inversion():
    # Banerjee is an approximation to the ML inverse of A_d; close in high d.
    k = banerjee_kappa(0.9, 768)
    assert bessel_ratio(k, 768) == pytest.approx(0.9, rel=2e-3)


def test_identical_rows_clamp():
    rows = np.tile(e1(4), (10, 1))
    mu, k = estimate_kappa(rows, 4)
    assert np.allclose(mu, e1(4))
    assert k == KAPPA_MAX


def test_empty_batch():
    with pytest.raises(DegenerateInputError):
        estimate_kappa(np.empty((0, 3)), 3)


def test_kappa_monotone_in_r_bar():
    ks = [banerjee_kappa(r, 16) for r in np.linspace(0.01, 0.99, 60)]
    assert all(b > a for a, b in zip(ks, ks[1:]))


@pytest.mark.parametrize("k", [50.0, 200.0, 1000.0])
def test_round_trip(k, rng):
    mu = normalize(rng.standard_normal(64))
    _, est = estimate_kappa(sample_vmf(VmfParams(mu, k), 20_000, rng), 64)
    assert est == pytest.approx(k, rel=0.05)


def test_apex_approx_examples():
    assert apex_angle_approx(100, 3, 0.95) == pytest.approx(0.24477, abs=1e-5)
    assert apex_angle_approx(1000, 64, 0.95) == pytest.approx(0.28729, abs=1e-4)
    assert apex_angle_approx(KAPPA_MIN, 64) == math.pi


def test_apex_approx_monotonicity():
    # Strict below the pi cap (kappa > chi2_0.95(31)/pi^2 ~ 4.6), flat on it.
    ks = np.geomspace(5, 1e5, 40)
    th = [apex_angle_approx(k, 32) for k in ks]
    assert all(b < a for a, b in zip(th, th[1:]))
    capped = [apex_angle_approx(k, 32) for k in np.geomspace(1e-3, 5, 20)]
    assert all(b <= a for a, b in zip(capped, capped[1:]))
    al = [apex_angle_approx(300, 32, a) for a in np.linspace(0.05, 0.99, 30)]
    assert all(b >= a for a, b in zip(al, al[1:]))


def test_exact_round_trip_cdf():
    theta = apex_angle_exact(50, 16, 0.95)
    assert angle_cdf(50, 16)(theta) == pytest.approx(0.95, abs=1e-6)


def test_exact_uniform_circle():
    assert apex_angle_exact(1e-9, 2, 0.5) == pytest.approx(math.pi / 2, abs=1e-8)
    # At KAPPA_MIN the median angle sits about 2k/pi below pi/2.
    assert apex_angle_exact(KAPPA_MIN, 2, 0.5) == pytest.approx(math.pi / 2, abs=2e-3)


def test_exact_matches_mpmath_quadrature():
    d, k, alpha = 64, 100.0, 0.95
    theta = apex_angle_exact(k, d, alpha)
    with mpmath.workdps(30):
        f = lambda t: mpmath.sin(t) ** (d - 2) * mpmath.exp(k * (mpmath.cos(t) - 1))
        total = mpmath.quad(f, [0, 0.5, 1, mpmath.pi])
        part = mpmath.quad(f, [0, theta])
    assert float(part / total) == pytest.approx(alpha, abs=1e-7)


@pytest.mark.parametrize("d,k", [(16, 1000), (64, 1000), (16, 500), (32, 320)])
def test_approx_agrees_in_high_concentration_regime(d, k):
    a, x = apex_angle_approx(k, d), apex_angle_exact(k, d)
    assert abs(a - x) / x < 0.05


def test_confidence_cone():
    cone = confidence_cone(VmfParams(e1(16), 400.0), 0.9)
    assert cone.confidence == 0.9
    assert 0 < cone.apex_angle <= math.pi
