from dataclasses import replace

import numpy as np
import pytest

from atomchip_sta import presets
from atomchip_sta.constants import MS, PK
from atomchip_sta.errors import LensBeforeExpansion, NoOscillation
from atomchip_sta.sequence import LensSpec, optimize_hold_and_lens, release_timing_hint, run_sequence


@pytest.fixture(scope="module")
def plan(ctx):
    return presets.dkc_plan(ctx.tables, ctx.defaults)


@pytest.fixture(scope="module")
def report(ctx, plan):
    return run_sequence(plan, ctx.species, ctx.tables)


def test_timeline_contiguous(plan):
    tl = plan.timeline()
    assert [s[0] for s in tl] == ["transport", "hold", "free1", "lens", "free2"]
    for (_, _, end), (_, start, _) in zip(tl[:-1], tl[1:]):
        assert end == start


def test_lens_changes_velocity_not_size(report):
    _, a, b = next(s for s in report.timeline if s[0] == "lens")
    i0 = np.searchsorted(report.times, a - 1e-12)
    i1 = np.searchsorted(report.times, b - 1e-12)
    lam, ld = report.lam, report.lam_dot
    # lambda is continuous across both switches while lambda_dot is reshaped
    for i in (i0, i1):
        assert np.max(np.abs(lam[i + 1] - lam[i]) / lam[i]) < 1e-3
    assert np.all(np.abs(ld[i1, 1:]) < 0.05 * np.abs(ld[i0, 1:]))
    # the short lens reshapes velocities while the size barely moves
    assert np.max(np.abs(lam[i1] / lam[i0] - 1)) < 0.05
    np.testing.assert_array_less(np.abs(lam[i1] - lam[i0]), np.abs(ld[i0]) * (b - a) + 1e-12)


def test_collimation_reduces_temperature(ctx, plan, report):
    no_lens = run_sequence(replace(plan, lens=replace(plan.lens, duration=0.0)), ctx.species, ctx.tables)
    assert report.temperature < 0.01 * no_lens.temperature


def test_hold_has_interior_minimum(ctx, plan):
    holds = np.arange(20.0, 45.01, 0.5) * MS
    _, T = optimize_hold_and_lens(plan, ctx.species, ctx.tables, holds, [plan.lens.duration])
    k = int(np.argmin(T[:, 0]))
    assert 0 < k < len(holds) - 1


def test_optimizer_matches_direct_run(ctx, plan):
    holds = np.array([31.0, 31.4, 32.0]) * MS
    lenses = np.array([4.6, 4.84, 5.0]) * MS
    best, T = optimize_hold_and_lens(plan, ctx.species, ctx.tables, holds, lenses)
    i, j = np.unravel_index(np.argmin(T), T.shape)
    assert best.hold == holds[i] and best.lens.duration == lenses[j]
    direct = run_sequence(best, ctx.species, ctx.tables)
    assert direct.temperature == pytest.approx(T[i, j], rel=1e-3)


def test_optimizer_workers_and_order(ctx, plan):
    holds = np.array([32.0, 30.0, 31.0]) * MS
    lenses = np.array([4.5, 5.0]) * MS
    b1, T1 = optimize_hold_and_lens(plan, ctx.species, ctx.tables, holds, lenses)
    b2, T2 = optimize_hold_and_lens(plan, ctx.species, ctx.tables, holds, lenses, workers=2)
    np.testing.assert_array_equal(T1, T2)
    assert (b1.hold, b1.lens.duration) == (b2.hold, b2.lens.duration)
    _, T3 = optimize_hold_and_lens(plan, ctx.species, ctx.tables, np.sort(holds), lenses)
    np.testing.assert_allclose(T1[np.argsort(holds)], T3, rtol=1e-12)


def test_adiabatic_weak_axis_is_hot(ctx, plan, report):
    adi = run_sequence(replace(plan, adiabatic_weak_axis=True), ctx.species, ctx.tables)
    assert adi.temperature > 10 * report.temperature
    assert adi.temperature_1d[0] > adi.temperature_1d[1]


def test_early_lens_warns(ctx, plan):
    with pytest.warns(LensBeforeExpansion):
        run_sequence(replace(plan, free1=5 * MS, free2=50 * MS), ctx.species, ctx.tables)


def test_invalid_plans(plan):
    with pytest.raises(ValueError):
        replace(plan, hold=-1.0)
    with pytest.raises(ValueError):
        LensSpec(frequencies=(1.0, 0.0, 2.0))


def test_release_hint_after_maxima():
    t = np.linspace(0, 0.2, 2001)
    f = 16.0
    s = 1 + 0.1 * np.cos(2 * np.pi * f * (t - 0.01))
    hint = release_timing_hint(t, s)
    expect = 0.01 + np.arange(len(hint)) / f + 0.02 / f
    np.testing.assert_allclose(hint, expect, atol=1e-5)
    with pytest.raises(NoOscillation):
        release_timing_hint(t, np.ones_like(t))


def test_temperatures_positive(report):
    assert report.temperature > 0
    assert report.temperature / PK < 1e3
    np.testing.assert_allclose(report.widths, report.lam * report.R0 / np.sqrt(7))


@pytest.fixture(scope="module")
def gpe_report(ctx, plan):
    return run_sequence(replace(plan, engine="gpe"), ctx.species, ctx.tables)


# At the collimation point the weak-axis rate is a small remainder of a
# ~2 mm/s breathing velocity.  The GPE (with kinetic energy and finite-size
# corrections) releases that axis at a slightly different breathing phase,
# so T_x, which goes as the square of the remainder, is not reproduced.
@pytest.mark.xfail(strict=True, reason="T at the collimation point is a near-cancellation of the weak-axis rate")
def test_engines_agree_on_temperature(report, gpe_report):
    assert abs(gpe_report.temperature / report.temperature - 1) <= 0.3


def _width_deviation(report, gpe_report):
    ws = np.column_stack([np.interp(gpe_report.times, report.times, report.widths[:, k]) for k in range(3)])
    return gpe_report.widths / ws - 1


def test_engines_agree_on_widths_in_trap(report, gpe_report):
    rel = _width_deviation(report, gpe_report)
    held = gpe_report.times <= report.timeline[1][2]
    assert np.max(np.abs(rel[held])) < 0.05


# The strong axes start 3.6% above the Thomas-Fermi width (finite-size
# ground state).  A few ms after release the density drops fast and the
# kinetic pressure the scaling equations leave out adds ~1.5% on top, so the
# peak reaches 5.1% before both engines settle at 3.2 to 3.9%.
@pytest.mark.xfail(strict=True, reason="transient kinetic-pressure excess right after release")
def test_engines_agree_on_strong_axis_widths(report, gpe_report):
    rel = _width_deviation(report, gpe_report)
    assert np.max(np.abs(rel[:, 1:])) < 0.05
