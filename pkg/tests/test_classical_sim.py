import numpy as np
import pytest

from atomchip_sta.classical_sim import (ENERGY_DRIFT_LIMIT, Model, choose_substeps, frozen_trap_drift, integrate,
                                        perturbation_response, ramp_time_scan)
from atomchip_sta.constants import MILLIGAUSS, MS, UM
from atomchip_sta.errors import StepTooLarge
from atomchip_sta.sta_design import static_schedule


def test_frozen_trap_energy_conserved(tables):
    f = tables.fits
    z = tables.z_t[len(tables.z_t) // 2]
    s = static_schedule(z, f["omega_z2"], f["bias"], 50 * MS)
    omega = float(s.omega_z[0])
    traj = integrate(s, Model.HARMONIC, hold_time=0.0, z0=z + 5 * UM)
    E = 0.5 * traj.v ** 2 + 0.5 * omega ** 2 * (traj.z - z) ** 2
    periods = traj.times[-1] * omega / (2 * np.pi)
    assert np.max(np.abs(E / E[0] - 1)) / periods < ENERGY_DRIFT_LIMIT


def test_free_oscillation_matches_cosine(tables):
    f = tables.fits
    z = tables.z_t[10]
    s = static_schedule(z, f["omega_z2"], f["bias"], 20 * MS)
    w = float(s.omega_z[0])
    traj = integrate(s, Model.HARMONIC, hold_time=0.0, z0=z + 1 * UM)
    np.testing.assert_allclose(traj.z - z, 1 * UM * np.cos(w * traj.times), atol=1e-13)


def test_substep_selection():
    w = 2 * np.pi * 600
    s = choose_substeps(w, 10e-6)
    assert frozen_trap_drift(w, 10e-6 / s) <= ENERGY_DRIFT_LIMIT
    if s > 1:
        assert frozen_trap_drift(w, 10e-6 / (s - 1)) > ENERGY_DRIFT_LIMIT
    with pytest.raises(StepTooLarge):
        choose_substeps(2 * np.pi * 5000, 100e-6, substeps=1)


def test_harmonic_sta_is_exact(ctx):
    s = ctx.schedule()
    traj = integrate(s, Model.HARMONIC, hold_time=0.1)
    assert traj.metrics.residual_amplitude < 10e-9


def test_anharmonic_needs_L3(ctx):
    with pytest.raises(ValueError):
        integrate(ctx.schedule(), Model.ANHARMONIC)


def test_anharmonic_oscillates_after_ramp(ctx, tables):
    s = ctx.schedule()
    traj = integrate(s, Model.ANHARMONIC, L3_fit=tables.fits["L3"])
    m = traj.metrics
    assert m.residual_amplitude > 0.1 * UM
    assert m.oscillation_amplitude <= m.residual_amplitude
    assert m.max_offset > m.residual_amplitude


def test_perturbation_is_linear(ctx, tables):
    s = ctx.schedule()
    r1 = perturbation_response(s, tables, delta_bias=0.5 * MILLIGAUSS).residual
    r2 = perturbation_response(s, tables, delta_bias=1.0 * MILLIGAUSS).residual
    assert 1.8 <= r2 / r1 <= 2.2


def test_perturbation_sign_symmetric(ctx, tables):
    s = ctx.schedule()
    rp = perturbation_response(s, tables, delta_bias=1.0 * MILLIGAUSS)
    rm = perturbation_response(s, tables, delta_bias=-1.0 * MILLIGAUSS)
    # fits are differenced at B +- dB, so symmetry holds to second order only
    np.testing.assert_allclose(rp.epsilon, -rm.epsilon, rtol=0, atol=1e-3 * np.max(np.abs(rp.epsilon)))


def test_zero_perturbation(ctx, tables):
    r = perturbation_response(ctx.schedule(), tables)
    assert r.residual == 0.0


def test_perturbation_limits(ctx, tables):
    s = ctx.schedule()
    with pytest.raises(ValueError):
        perturbation_response(s, tables, delta_bias=60 * MILLIGAUSS)
    with pytest.raises(ValueError):
        perturbation_response(s, tables, delta_tf=6 * MS)


def test_scan_order_and_workers(ctx, tables):
    tmpl = ctx.schedule().ansatz
    tfs = [0.1, 0.05, 0.075]
    a = ramp_time_scan(tmpl, tfs, tables)
    b = ramp_time_scan(tmpl, tfs, tables, workers=2)
    assert [m.ramp_tf for m in a] == tfs
    assert [m.residual_amplitude for m in a] == [m.residual_amplitude for m in b]
    with pytest.raises(ValueError):
        ramp_time_scan(tmpl, [5e-3], tables)
