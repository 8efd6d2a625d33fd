import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from atomchip_sta.classical_sim import Model, integrate
from atomchip_sta.constants import MM, MS
from atomchip_sta.errors import OutOfDomain
from atomchip_sta.pade import fit_pade
from atomchip_sta.sta_design import (AnsatzKind, TrajectoryAnsatz, chirp_is_monotone, evaluate_trajectory,
                                     optimize_chirp, reverse_engineer, static_schedule)

Z_I, Z_F, T_F = 0.45 * MM, 1.65 * MM, 75 * MS


def _bc_scale(a, n):
    return abs(a.z_f - a.z_i) / a.t_f ** n


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([AnsatzKind.POLYNOMIAL9, AnsatzKind.CHIRPED]), st.floats(20e-3, 500e-3),
       st.floats(-1.6, 0.0), st.floats(0.2, 1.2))
def test_ten_boundary_conditions(kind, t_f, a, b):
    if kind is AnsatzKind.CHIRPED and not chirp_is_monotone(a, b):
        return
    an = TrajectoryAnsatz(kind, Z_I, Z_F, t_f, a, b)
    for t, z_end in ((0.0, Z_I), (t_f, Z_F)):
        d = evaluate_trajectory(an, t)
        assert abs(d[0] - z_end) < 1e-10 * abs(Z_F - Z_I)
        for n in range(1, 5):
            assert abs(d[n]) < 1e-10 * _bc_scale(an, n), (n, t)


def test_derivatives_consistent():
    an = TrajectoryAnsatz(AnsatzKind.CHIRPED, Z_I, Z_F, T_F)
    t = np.linspace(0.01, 0.07, 7)
    h = 1e-6
    for n in range(4):
        fd = (evaluate_trajectory(an, t + h)[n] - evaluate_trajectory(an, t - h)[n]) / (2 * h)
        np.testing.assert_allclose(fd, evaluate_trajectory(an, t)[n + 1], rtol=1e-5,
                                   atol=1e-9 * _bc_scale(an, n + 1))


def test_time_outside_domain():
    an = TrajectoryAnsatz(AnsatzKind.POLYNOMIAL9, Z_I, Z_F, T_F)
    with pytest.raises(OutOfDomain):
        evaluate_trajectory(an, T_F * 1.01)


def test_invalid_ansatz():
    with pytest.raises(ValueError):
        TrajectoryAnsatz(AnsatzKind.CHIRPED, Z_I, Z_F, T_F, chirp_a=-1.5, chirp_b=0.5)
    with pytest.raises(ValueError):
        TrajectoryAnsatz(AnsatzKind.POLYNOMIAL9, Z_I, Z_I, T_F)
    with pytest.raises(ValueError):
        TrajectoryAnsatz(AnsatzKind.POLYNOMIAL9, Z_I, Z_F, 0.0)


@pytest.mark.parametrize("kind", [AnsatzKind.POLYNOMIAL9, AnsatzKind.CHIRPED])
def test_round_trip_through_newton(ctx, tables, kind):
    s = ctx.schedule(kind)
    traj = integrate(s, Model.HARMONIC, hold_time=0.0)
    z_a = np.interp(traj.times, s.times, s.z_a)
    assert np.max(np.abs(traj.z - z_a)) < 10e-9


def test_root_continuity(ctx):
    s = ctx.schedule()
    zdot = np.gradient(s.z_t, s.times)
    assert np.max(np.abs(np.diff(s.z_t))) < 5 * np.max(np.abs(zdot)) * s.dt


def test_linear_ansatz_moves_trap_directly(ctx):
    s = ctx.schedule(AnsatzKind.LINEAR)
    np.testing.assert_allclose(np.diff(s.z_t), (s.z_f - s.z_i) / (len(s.times) - 1), rtol=1e-9)
    np.testing.assert_array_equal(s.z_a, s.z_t)


def test_quadratic_and_newton_roots_agree():
    z = np.linspace(0.3 * MM, 2.0 * MM, 40)
    w2 = (2 * np.pi * 400) ** 2 / (1 + (z / (0.6 * MM)) ** 2)
    w2_fit = fit_pade(z, w2, 1, 2)
    b_fit = fit_pade(z, 30e-4 / (1 + z / (0.8 * MM)), 1, 1)
    an = TrajectoryAnsatz(AnsatzKind.CHIRPED, 0.5 * MM, 1.6 * MM, 60 * MS)
    q = reverse_engineer(an, w2_fit, b_fit, method="quadratic")
    n = reverse_engineer(an, w2_fit, b_fit, method="newton")
    np.testing.assert_allclose(q.z_t, n.z_t, rtol=0, atol=1e-12)
    assert np.max(q.newton_residual()) < 1e-8 * np.max(np.abs(q.z_a_ddot))


def test_static_schedule(tables):
    f = tables.fits
    s = static_schedule(1e-3, f["omega_z2"], f["bias"], 10 * MS, L3_fit=f["L3"])
    assert s.chi_max == 0.0
    assert np.all(s.z_t == 1e-3)


def test_chi_decreases_with_chirp(ctx):
    chirped = ctx.schedule(AnsatzKind.CHIRPED)
    plain = ctx.schedule(AnsatzKind.CHIRPED, chirp_a=0.0, chirp_b=0.0)
    assert chirped.chi_max < plain.chi_max


def test_bias_schedule_endpoints(ctx):
    s = ctx.schedule()
    assert s.bias[0] == pytest.approx(ctx.defaults.bias_start, rel=1e-9)
    assert s.bias[-1] == pytest.approx(ctx.defaults.bias_end, rel=1e-9)


def test_chirp_optimizer_deterministic(ctx, tables):
    f = tables.fits
    tmpl = ctx.schedule().ansatz
    a_vals, b_vals = [-1.4, -1.37, -1.3], [0.75, 0.78, 0.8]
    r1 = optimize_chirp(tmpl, f["omega_z2"], f["bias"], f["L3"], a_vals, b_vals)
    r2 = optimize_chirp(tmpl, f["omega_z2"], f["bias"], f["L3"], a_vals, b_vals, workers=2)
    assert r1[:3] == r2[:3]
    np.testing.assert_array_equal(r1[3], r2[3])
    assert r1[2] == np.min(r1[3])
