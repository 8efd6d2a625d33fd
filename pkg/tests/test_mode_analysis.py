import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from atomchip_sta.errors import SeriesTooShort
from atomchip_sta.mode_analysis import (analyze_series, cylindrical_parameters, mode_frequencies, out_of_phase,
                                        phase_difference, relative_excursion)

RATE = 2000.0


@settings(max_examples=60, deadline=None)
@given(st.floats(0.01, 2.0))
def test_plus_branch_above_minus(eta):
    m = mode_frequencies(eta, 1.0)
    assert m.frequencies["Q1"] >= m.frequencies["M"]


def test_branches_continuous_in_eta():
    etas = np.linspace(0.005, 2.0, 4000)
    for label in ("Q1", "M"):
        f = np.array([mode_frequencies(e, 1.0).frequencies[label] for e in etas])
        assert np.max(np.abs(np.diff(f))) < 5e-3


def test_known_limits():
    # elongated limit: M -> sqrt(5/2) eta w_perp, Q1 -> 2 w_perp
    m = mode_frequencies(1e-3, 1.0)
    assert m.frequencies["M"] == pytest.approx(np.sqrt(2.5) * 1e-3, rel=1e-4)
    assert m.frequencies["Q1"] == pytest.approx(2.0, rel=1e-5)
    # spherical trap: monopole sqrt(5), quadrupole sqrt(2)
    s = mode_frequencies(1.0, 1.0)
    assert s.frequencies["Q1"] == pytest.approx(np.sqrt(5))
    assert s.frequencies["M"] == pytest.approx(np.sqrt(2))
    with pytest.raises(ValueError):
        mode_frequencies(0.0, 1.0)


def test_cylindrical_parameters():
    eta, wp = cylindrical_parameters([1.0, 4.0, 6.0])
    assert wp == 5.0 and eta == pytest.approx(0.2)


@pytest.mark.parametrize("offset", [0.0, 0.5])
def test_sidelobes_three_bins_away(offset):
    n = 1000
    f0 = (100 + offset) * RATE / n
    x = np.sin(2 * np.pi * f0 * np.arange(n) / RATE)
    sp = analyze_series(x, RATE)
    far = np.abs(sp.frequencies - f0) >= 3 * RATE / n
    assert np.max(sp.magnitude[far]) < 0.01 * np.max(sp.magnitude)


@settings(max_examples=30, deadline=None)
@given(st.floats(20.0, 200.0), st.floats(0.1, 3.0))
def test_peak_refined_to_tone(f0, amp):
    n = 1000
    x = 5 + amp * np.cos(2 * np.pi * f0 * np.arange(n) / RATE)
    sp = analyze_series(x, RATE)
    assert abs(sp.dominant.frequency - f0) < 0.25 * RATE / n
    assert sp.dominant.magnitude == pytest.approx(amp, rel=0.02)
    assert sp.parseval_error < 1e-10


def test_peaks_labeled_with_nearby_mode():
    modes = mode_frequencies(0.25, 2 * np.pi * 50)
    fq = modes.hz("Q1")
    t = np.arange(2000) / RATE
    sp = analyze_series(np.cos(2 * np.pi * fq * t), RATE, modes)
    assert sp.dominant.label == "Q1"


def test_too_short():
    with pytest.raises(SeriesTooShort):
        analyze_series(np.ones(8), RATE)
    modes = mode_frequencies(0.1, 2 * np.pi * 50)
    with pytest.raises(SeriesTooShort):
        analyze_series(np.ones(200), RATE, modes)


def test_phase_relation():
    t = np.arange(2000) / RATE
    f = 30.0
    a = 1 + 0.01 * np.cos(2 * np.pi * f * t)
    b = 1 - 0.02 * np.cos(2 * np.pi * f * t)
    assert out_of_phase(a, b, f, RATE)
    assert not out_of_phase(a, 2 - b, f, RATE)
    assert abs(abs(phase_difference(a, b, f, RATE)) - np.pi) < 1e-6


def test_relative_excursion():
    assert relative_excursion([2.0, 2.2, 1.9]) == pytest.approx(0.1)


def test_spectrum_of_scaling_oscillation(ctx):
    from atomchip_sta.reproduce import mode_study
    st_ = mode_study(ctx, 75e-3, hold=0.5)
    # fast transport: large shape oscillation in the weak axis, opposite to the tight axes
    assert st_.excursion[0] > 0.3
    assert st_.weak_vs_strong
    labels = {p.label for p in st_.spectra[0].peaks}
    assert labels & {"Q1", "M"}
