import math

import mpmath as mp
import numpy as np
import pytest
from scipy import integrate

from tlme.bath import (
    MINUS,
    PLUS,
    BathSpec,
    bath_decay_time,
    bose_occupation,
    complex_spectrum,
    correlation_time_domain,
    spectral_density,
    spectrum,
    spectrum_derivative,
    spectrum_taylor_coefficients,
)

SPEC = BathSpec()


def mp_spectrum(w, branch, beta=10, wc=10):
    J = w / (1 + (w / wc) ** 2)
    n = 1 / (mp.exp(beta * w) - 1)
    return J * (n + 1 if branch == PLUS else n)


def test_spectral_density_values():
    assert spectral_density(SPEC, 1.0) == pytest.approx(1 / 1.01)
    assert spectral_density(SPEC, 10.0) == pytest.approx(5.0)
    assert spectral_density(SPEC, 0.0) == 0.0


def test_occupation_and_detailed_balance():
    n_minus = bose_occupation(SPEC, 1.0, MINUS)
    assert n_minus == pytest.approx(1 / math.expm1(10))
    assert bose_occupation(SPEC, 1.0, PLUS) == pytest.approx(n_minus + 1)
    ratio = spectrum(SPEC, 1.0, MINUS) / spectrum(SPEC, 1.0, PLUS)
    assert ratio == pytest.approx(math.exp(-10), rel=1e-12)


def test_spectrum_at_zero_is_temperature():
    assert spectrum(SPEC, 0.0, PLUS) == pytest.approx(0.1)
    assert spectrum(SPEC, 0.0, MINUS) == pytest.approx(0.1)
    cold = BathSpec(beta=math.inf)
    assert spectrum(cold, 0.0, PLUS) == 0.0
    assert spectrum(cold, 2.0, MINUS) == 0.0
    assert spectrum(cold, 2.0, PLUS) == pytest.approx(spectral_density(cold, 2.0))


def test_invalid_inputs():
    with pytest.raises(ValueError):
        BathSpec(beta=-1)
    with pytest.raises(ValueError):
        BathSpec(omega_c=0)
    with pytest.raises(ValueError):
        spectrum(SPEC, -1.0, PLUS)
    with pytest.raises(ValueError):
        spectrum(SPEC, 1.0, "sideways")
    with pytest.raises(ValueError):
        spectrum_derivative(SPEC, 1.0, PLUS, 5)


def test_complex_spectrum_matches_real_axis():
    w = np.array([0.3, 1.0, 7.0])
    for branch in (PLUS, MINUS):
        np.testing.assert_allclose(complex_spectrum(SPEC, w, branch).real, spectrum(SPEC, w, branch), rtol=1e-13)
    # large rotated frequencies must not overflow
    far = complex_spectrum(SPEC, 1e8 * np.exp(-1j * math.pi / 4), MINUS)
    assert np.isfinite(far)


@pytest.mark.parametrize("branch", [PLUS, MINUS])
@pytest.mark.parametrize("k", range(5))
@pytest.mark.parametrize("w", [0.2, 1.0, 3.5])
def test_derivatives_against_mpmath(branch, k, w):
    mp.mp.dps = 40
    expected = float(mp.diff(lambda x: mp_spectrum(x, branch), mp.mpf(w), k))
    got = spectrum_derivative(SPEC, w, branch, k)
    assert got == pytest.approx(expected, rel=1e-11, abs=1e-13)


@pytest.mark.parametrize("branch", [PLUS, MINUS])
def test_taylor_coefficients_against_mpmath(branch):
    mp.mp.dps = 40
    coeffs = spectrum_taylor_coefficients(SPEC, branch, 8)
    f = lambda x: mp_spectrum(x, branch) if x != 0 else mp.mpf(1) / 10
    expected = mp.taylor(f, mp.mpf("1e-30"), 8)
    np.testing.assert_allclose(coeffs, [float(c) for c in expected], rtol=1e-9, atol=1e-12)


@pytest.mark.parametrize("tau", [0.3, 1.0, 4.0])
def test_minus_correlation_against_fourier_quadrature(tau):
    f = lambda w: spectrum(SPEC, w, MINUS) if w > 0 else 0.1
    re = integrate.quad(f, 0, np.inf, weight="cos", wvar=tau)[0]
    im = integrate.quad(f, 0, np.inf, weight="sin", wvar=tau)[0]
    got = correlation_time_domain(SPEC, tau, MINUS)
    assert got == pytest.approx(re + 1j * im, rel=1e-8, abs=1e-12)


def test_plus_correlation_truncated_against_quadrature():
    tau, top = 0.8, 60.0
    f = lambda w: spectrum(SPEC, w, PLUS)
    re = integrate.quad(lambda w: f(w) * math.cos(w * tau), 0, top, limit=400)[0]
    im = -integrate.quad(lambda w: f(w) * math.sin(w * tau), 0, top, limit=400)[0]
    got = correlation_time_domain(SPEC, tau, PLUS, omega_max=top)
    assert got == pytest.approx(re + 1j * im, rel=1e-8)


def test_plus_correlation_full_integral_against_quadrature():
    tau = 1.3
    f = lambda w: spectrum(SPEC, w, PLUS) if w > 0 else 0.1
    re = integrate.quad(f, 0, np.inf, weight="cos", wvar=tau)[0]
    im = -integrate.quad(f, 0, np.inf, weight="sin", wvar=tau)[0]
    assert correlation_time_domain(SPEC, tau, PLUS) == pytest.approx(re + 1j * im, rel=1e-8)


def test_correlation_conjugation_symmetry():
    tau = np.array([0.5, 2.0])
    for branch in (PLUS, MINUS):
        np.testing.assert_allclose(
            correlation_time_domain(SPEC, -tau, branch), np.conj(correlation_time_domain(SPEC, tau, branch)), rtol=1e-13
        )


def test_plus_correlation_diverges_at_zero_without_cutoff():
    assert np.isinf(correlation_time_domain(SPEC, 0.0, PLUS))
    # finite cutoff: the Drude integral is logarithmic
    c0 = correlation_time_domain(SPEC, 0.0, PLUS, omega_max=200.0)
    f = lambda w: spectrum(SPEC, w, PLUS) if w > 0 else 0.1
    assert c0.real == pytest.approx(integrate.quad(f, 0, 200.0, limit=400)[0], rel=1e-9)


def test_bath_decay_time():
    # frozen; the answer is resolved only to the scan step
    assert bath_decay_time(SPEC) == pytest.approx(0.35)
    assert bath_decay_time(SPEC, step=0.01) == pytest.approx(0.31)
