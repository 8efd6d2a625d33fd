import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from atomchip_sta.errors import InsufficientSamples, PolesInDomain
from atomchip_sta.pade import fit_pade, fit_pade_auto, invert


def test_exact_rational_recovered():
    z = np.linspace(1e-3, 2e-3, 40)
    f = (1 + 300 * z) / (1 + 900 * z + 2e5 * z ** 2)
    fit = fit_pade(z, f, 1, 2)
    assert fit.max_residual < 1e-10
    assert fit.orders == (1, 2)
    zz = np.linspace(1e-3, 2e-3, 333)
    want = (1 + 300 * zz) / (1 + 900 * zz + 2e5 * zz ** 2)
    np.testing.assert_allclose(fit(zz), want, rtol=1e-9)


def test_samples_reproduced_within_max_residual():
    z = np.linspace(0.4e-3, 1.7e-3, 60)
    f = np.exp(-z / 1e-3) * (1 + np.sin(2e3 * z) / 5)
    fit = fit_pade_auto(z, f, tolerance=1e-4)
    rel = np.abs(fit(z) - f) / np.max(np.abs(f))
    assert np.max(rel) <= fit.max_residual * (1 + 1e-9)
    assert fit.max_residual < 1e-4


def test_auto_prefers_lowest_order():
    z = np.linspace(1.0, 2.0, 30)
    fit = fit_pade_auto(z, 3.0 / (1 + 0.5 * z + 0.1 * z ** 2))
    assert fit.orders == (1, 2)


def test_derivative_matches_finite_difference():
    z = np.linspace(1.0, 2.0, 30)
    fit = fit_pade(z, (2 + z) / (1 + 0.3 * z ** 2), 1, 2)
    h = 1e-6
    x = np.array([1.2, 1.5, 1.9])
    fd = (fit(x + h) - fit(x - h)) / (2 * h)
    np.testing.assert_allclose(fit.derivative(x), fd, rtol=1e-7)


def test_too_few_samples():
    with pytest.raises(InsufficientSamples):
        fit_pade(np.linspace(0, 1, 3), np.ones(3), 2, 2)


def test_pole_inside_domain_rejected():
    z = np.linspace(-1, 1, 50)
    # 1/(z - 0.05) has its pole inside the sampled interval
    with pytest.raises(PolesInDomain):
        fit_pade(z[np.abs(z - 0.05) > 0.03], 1 / (z[np.abs(z - 0.05) > 0.03] - 0.05), 0, 1)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.3, 2.5))
def test_invert_round_trip(target):
    z = np.linspace(0.0, 3.0, 40)
    fit = fit_pade(z, (1 + 2 * z) / (1 + 0.1 * z), 1, 1)
    zi = invert(fit, fit(target), guess=1.5)
    assert abs(zi - target) < 1e-10
