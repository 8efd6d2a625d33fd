import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from atomchip_sta.chip_model import (RB87, ChipConfig, WireSegment, characterize_trap, field_at, hessian,
                                     potential_at, segment_field, trap_tables, z_wire)
from atomchip_sta.constants import GAUSS, MM, MU_0, UM
from atomchip_sta.errors import InsufficientSamples, NoTrapFound, PointOnWire


def test_long_wire_matches_infinite_wire():
    seg = WireSegment((-1e3, 0, 0), (1e3, 0, 0), 2.0)
    r = 1e-3
    B = segment_field(seg, np.array([0.0, 0.0, r]))
    assert B[1] == pytest.approx(-MU_0 * 2.0 / (2 * np.pi * r), rel=1e-9)
    assert abs(B[0]) < 1e-20 and abs(B[2]) < 1e-20


def test_semi_infinite_end_is_half():
    seg = WireSegment((0, 0, 0), (1e4, 0, 0), 1.0)
    r = 1e-3
    B = segment_field(seg, np.array([0.0, 0.0, r]))
    assert np.linalg.norm(B) == pytest.approx(MU_0 / (4 * np.pi * r), rel=1e-6)


@settings(max_examples=25, deadline=None)
@given(st.floats(-3e-3, 3e-3), st.floats(-3e-3, 3e-3), st.floats(0.05e-3, 3e-3))
def test_superposition_segmentwise(x, y, z):
    cfg = z_wire()
    p = np.array([x, y, z])
    total = field_at(cfg, p) - cfg.bias_vector
    parts = sum(segment_field(s, p) for s in cfg.segments)
    assert np.max(np.abs(total - parts)) <= 1e-14 * np.max(np.abs(parts))


def test_point_on_wire_rejected():
    cfg = z_wire()
    with pytest.raises(PointOnWire):
        field_at(cfg, np.array([0.0, 0.0, 0.0]))


def test_disconnected_segments_rejected():
    a = WireSegment((0, 0, 0), (1, 0, 0), 1.0)
    b = WireSegment((2, 0, 0), (3, 0, 0), 1.0)
    with pytest.raises(ValueError):
        ChipConfig((a, b), (0, 1, 0), 1e-4)


def test_hessian_symmetric():
    cfg = z_wire()
    trap = characterize_trap(cfg)
    H = hessian(cfg, RB87, trap.position)
    assert np.max(np.abs(H - H.T)) < 1e-8 * np.linalg.norm(H)


# At 21.5 G the radial trap is so tight that a 10 um ball leaves the harmonic
# region: the leftover is the radial quartic term (see the next test), which
# the harmonic + cubic form has no room for.
@pytest.mark.parametrize("bias_G", [
    pytest.param(21.5, marks=pytest.mark.xfail(strict=True, reason="radial quartic term ~5% at 10 um")),
    12.0, 4.5])
def test_harmonic_plus_cubic_reproduces_potential(bias_G):
    cfg = z_wire(bias=bias_G * GAUSS)
    tr = characterize_trap(cfg)
    m = RB87.mass
    w = tr.omega
    rng = np.random.default_rng(1)
    d = rng.normal(size=(400, 3))
    d *= (10 * UM * rng.random(400) ** (1 / 3) / np.linalg.norm(d, axis=1))[:, None]
    lab = tr.position + d @ tr.axes
    V = potential_at(cfg, RB87, lab) - potential_at(cfg, RB87, tr.position)
    model = 0.5 * m * np.sum(w ** 2 * d ** 2, axis=1) + m * w[2] ** 2 * d[:, 2] ** 3 / (3 * tr.L3)
    big = V > 0.05 * np.max(V)
    assert np.max(np.abs(model[big] / V[big] - 1)) < 0.02


def test_initial_trap_residual_is_quartic():
    cfg = z_wire(bias=21.5 * GAUSS)
    tr = characterize_trap(cfg)
    w = tr.omega
    V0 = potential_at(cfg, RB87, tr.position)
    excess = []
    for s in (2.5 * UM, 5 * UM):
        V = potential_at(cfg, RB87, tr.position + s * tr.axes[1]) - V0
        excess.append(V - 0.5 * RB87.mass * w[1] ** 2 * s ** 2)
    assert excess[1] / excess[0] == pytest.approx(16, rel=0.05)


def test_L3_is_mm_scale(tables):
    ratio = np.abs(tables.L3) / tables.z_t
    assert np.all((ratio > 0.1) & (ratio < 10))
    # sign fixed by the outward z eigenvector: the potential stiffens toward the chip
    assert np.all(tables.L3 < 0)


def test_trap_moves_away_as_bias_drops(tables):
    assert np.all(np.diff(tables.z_t) > 0)
    assert np.all(np.diff(tables.bias) < 0)
    zs = np.linspace(*tables.domain, 200)
    assert np.all(np.diff(tables.bias_at(zs)) < 0)


def test_fit_tolerance_and_inversion(tables):
    for name, fit in tables.fits.items():
        assert fit.max_residual < 1e-4, name
    z = tables.z_at_bias(10 * GAUSS)
    assert tables.bias_at(z) == pytest.approx(10 * GAUSS, rel=1e-12)


def test_tables_independent_of_workers(ctx, tables):
    d = ctx.defaults
    t2 = trap_tables(ctx.chip, ctx.species, d.table_bias_range, d.table_samples, d.table_tolerance, workers=2)
    np.testing.assert_array_equal(t2.rows(), tables.rows())


def test_needs_twenty_samples():
    with pytest.raises(InsufficientSamples):
        trap_tables(z_wire(), n_samples=10)


def test_no_trap_without_bias():
    with pytest.raises(NoTrapFound):
        characterize_trap(z_wire(bias=0.0))


def test_rows_in_interface_units(tables):
    r = tables.rows()
    assert r.shape == (len(tables.z_t), 7)
    assert r[0, 0] == pytest.approx(tables.bias[0] / GAUSS)
    assert r[0, 1] == pytest.approx(tables.z_t[0] / MM)
