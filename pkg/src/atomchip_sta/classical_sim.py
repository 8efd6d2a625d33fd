"""Classical center-of-mass dynamics along the transport axis.

Equation of motion in the (possibly anharmonic) moving trap:

    z'' = -omega_z^2(t) (z - z_t) (1 + (z - z_t) / L3)

with L3 -> infinity for the harmonic model.  A single RK4 kernel also
integrates the linearized error equation used for robustness estimates.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import PerturbationTooLarge, StepTooLarge
from .sta_design import reverse_engineer

ENERGY_DRIFT_LIMIT = 1e-9
MAX_SUBSTEPS = 64
DEFAULT_HOLD = 0.15


class Model(str, Enum):
    HARMONIC = "harmonic"
    ANHARMONIC = "anharmonic"


@dataclass(frozen=True)
class ClassicalState:
    t: float
    z: float
    v: float

    def __post_init__(self):
        if not all(np.isfinite([self.t, self.z, self.v])):
            raise ValueError("classical state must be finite")


@dataclass(frozen=True)
class TransportMetrics:
    max_offset: float
    residual_amplitude: float
    anharmonicity_pct: float
    ramp_tf: float
    oscillation_amplitude: float = float("nan")

    def __post_init__(self):
        if self.residual_amplitude < 0 or self.max_offset < 0:
            raise ValueError("amplitudes are nonnegative")


@dataclass(frozen=True, eq=False)
class ClassicalTrajectory:
    times: np.ndarray
    z: np.ndarray
    v: np.ndarray
    z_t: np.ndarray
    metrics: TransportMetrics
    substeps: int

    def state(self, k):
        return ClassicalState(float(self.times[k]), float(self.z[k]), float(self.v[k]))

    @property
    def acceleration(self):
        return np.gradient(self.v, self.times)


def _rk4_drive(x0, v0, h, w2, c, k, s, n_steps, every):
    """RK4 for x'' = -w2 (x - c)(1 + (x - c) k) + s.

    Coefficient arrays are sampled on the half-step lattice (length
    2 n_steps + 1).  Returns positions/velocities every ``every`` steps.
    """
    w2 = w2.tolist()
    c = c.tolist()
    k = k.tolist()
    s = s.tolist()
    x, v = float(x0), float(v0)
    xs, vs = [x], [v]
    h2 = 0.5 * h
    h6 = h / 6.0
    for i in range(n_steps):
        j = 2 * i
        wa, ca, ka, sa = w2[j], c[j], k[j], s[j]
        wm, cm, km, sm = w2[j + 1], c[j + 1], k[j + 1], s[j + 1]
        wb, cb, kb, sb = w2[j + 2], c[j + 2], k[j + 2], s[j + 2]
        d = x - ca
        a1 = sa - wa * d * (1.0 + d * ka)
        x2 = x + h2 * v
        v2 = v + h2 * a1
        d = x2 - cm
        a2 = sm - wm * d * (1.0 + d * km)
        x3 = x + h2 * v2
        v3 = v + h2 * a2
        d = x3 - cm
        a3 = sm - wm * d * (1.0 + d * km)
        x4 = x + h * v3
        v4 = v + h * a3
        d = x4 - cb
        a4 = sb - wb * d * (1.0 + d * kb)
        x = x + h6 * (v + 2.0 * v2 + 2.0 * v3 + v4)
        v = v + h6 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        if (i + 1) % every == 0:
            xs.append(x)
            vs.append(v)
    return np.array(xs), np.array(vs)


def frozen_trap_drift(omega, h):
    """Relative energy drift over one period for RK4 with step ``h``."""
    period = 2 * np.pi / omega
    n = int(np.ceil(period / h))
    arr = np.full(2 * n + 1, omega * omega)
    zero = np.zeros(2 * n + 1)
    x, v = _rk4_drive(1.0, 0.0, h, arr, zero, zero, zero, n, n)
    e0 = 0.5 * omega ** 2
    e1 = 0.5 * v[-1] ** 2 + 0.5 * omega ** 2 * x[-1] ** 2
    return abs(e1 - e0) / e0


def choose_substeps(omega_max, dt, substeps=None):
    """Smallest substep count meeting the frozen-trap drift bound."""
    if substeps is not None:
        drift = frozen_trap_drift(omega_max, dt / substeps)
        if drift > ENERGY_DRIFT_LIMIT:
            raise StepTooLarge(f"energy drift {drift:.2e} per period with {substeps} substeps")
        return int(substeps)
    for s in range(1, MAX_SUBSTEPS + 1):
        if frozen_trap_drift(omega_max, dt / s) <= ENERGY_DRIFT_LIMIT:
            return s
    raise StepTooLarge("could not meet the energy drift bound")


def _half_lattice(t_end, dt, substeps):
    n_grid = int(round(t_end / dt))
    n_steps = n_grid * substeps
    h = t_end / n_steps
    return np.linspace(0.0, t_end, 2 * n_steps + 1), h, n_steps


class _ScheduleInterp:
    """Cubic-spline view of a schedule, frozen at its final values after t_f."""

    def __init__(self, schedule):
        t = schedule.times
        self.t_f = schedule.t_f
        self.zt = CubicSpline(t, schedule.z_t)
        self.za = CubicSpline(t, schedule.z_a)
        self.w2 = CubicSpline(t, schedule.omega_z ** 2)
        self.zt_end = float(schedule.z_t[-1])
        self.za_end = float(schedule.z_a[-1])
        self.w2_end = float(schedule.omega_z[-1] ** 2)

    def _eval(self, spl, end, t):
        t = np.asarray(t, dtype=float)
        out = np.full(t.shape, end)
        m = t <= self.t_f
        out[m] = spl(t[m])
        return out

    def z_t(self, t):
        return self._eval(self.zt, self.zt_end, t)

    def z_a(self, t):
        return self._eval(self.za, self.za_end, t)

    def omega2(self, t):
        return self._eval(self.w2, self.w2_end, t)


def _inv_L3(L3_fit, z):
    if L3_fit is None:
        return np.zeros_like(z)
    return 1.0 / L3_fit(z)


def _metrics(times, z, zt, t_f, L3_fit, z_f):
    tr = times <= t_f * (1 + 1e-12)
    d = z[tr] - zt[tr]
    max_offset = float(np.max(np.abs(d)))
    anh = float(np.max(np.abs(d / L3_fit(zt[tr])))) * 100 if L3_fit is not None else 0.0
    hold = times >= t_f * (1 - 1e-12)
    zh = z[hold] - z_f
    residual = float(np.max(np.abs(zh)))
    osc = 0.5 * float(np.max(zh) - np.min(zh))
    return TransportMetrics(max_offset=max_offset, residual_amplitude=residual,
                            anharmonicity_pct=anh, ramp_tf=t_f, oscillation_amplitude=osc)


def integrate(schedule, model=Model.ANHARMONIC, hold_time=DEFAULT_HOLD, L3_fit=None, substeps=None,
              z0=None, v0=0.0):
    """Integrate the center of mass through the ramp and a frozen-trap hold.

    The cloud starts at rest at z_t(0) unless ``z0`` is given.  Output is
    sampled on the schedule grid.  ``L3_fit`` is needed for the anharmonic
    model and for the anharmonicity metric.
    """
    model = Model(model)
    if hold_time < 0:
        raise ValueError("hold_time must be nonnegative")
    if model is Model.ANHARMONIC and L3_fit is None:
        raise ValueError("the anharmonic model needs an L3 fit")
    dt = schedule.dt
    t_f = schedule.t_f
    n_hold = int(round(hold_time / dt))
    t_end = t_f + n_hold * dt
    s = choose_substeps(float(np.max(schedule.omega_z)), dt, substeps)
    tl, h, n_steps = _half_lattice(t_end, dt, s)
    interp = _ScheduleInterp(schedule)
    zt = interp.z_t(tl)
    w2 = interp.omega2(tl)
    k = _inv_L3(L3_fit, zt) if model is Model.ANHARMONIC else np.zeros_like(tl)
    zero = np.zeros_like(tl)
    start = schedule.z_t[0] if z0 is None else z0
    z, v = _rk4_drive(start, v0, h, w2, zt, k, zero, n_steps, s)
    times = tl[::2 * s]
    zt_out = zt[::2 * s]
    metrics = _metrics(times, z, zt_out, t_f, L3_fit, schedule.z_f)
    return ClassicalTrajectory(times=times, z=z, v=v, z_t=zt_out, metrics=metrics, substeps=s)


def _scan_one(args):
    ansatz, tables, model, hold_time = args
    fits = tables.fits
    sched = reverse_engineer(ansatz, fits["omega_z2"], fits["bias"], L3_fit=fits["L3"])
    return integrate(sched, model, hold_time, fits["L3"]).metrics


def ramp_time_scan(template, tf_values, tables, model=Model.ANHARMONIC, hold_time=DEFAULT_HOLD,
                   workers=1):
    """Transport metrics for each ramp duration, in the order given."""
    tf_values = [float(t) for t in tf_values]
    if any(t < 10e-3 for t in tf_values):
        raise ValueError("ramp durations must be at least 10 ms")
    jobs = [(template.with_duration(t), tables, Model(model), hold_time) for t in tf_values]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(_scan_one, jobs))
    return [_scan_one(j) for j in jobs]


@dataclass(frozen=True, eq=False)
class PerturbationResult:
    times: np.ndarray
    epsilon: np.ndarray
    residual: float
    delta_z_final: float
    t_end_ramp: float


def perturbation_response(schedule, tables, delta_bias=0.0, delta_tf=0.0, model=Model.HARMONIC,
                          hold_time=DEFAULT_HOLD, substeps=None):
    """First-order response of the cloud position to a bias or timing error.

    Integrates

        e'' + w2 (e - dz_t) + dw2 (z_a0 - z_t) + (w2 / L3)(z_a0 - z_t)^2 = 0

    where dz_t and dw2 come from re-evaluating the fits at the perturbed
    bias, or from replaying the schedule stretched to t_f + delta_tf.  The
    last term is kept only for the anharmonic model.  Returns the maximum
    |e| after the perturbed ramp has ended.
    """
    model = Model(model)
    if abs(delta_bias) > 50e-7:
        raise ValueError("|delta_bias| must not exceed 50 mG")
    if abs(delta_tf) > 5e-3:
        raise ValueError("|delta_tf| must not exceed 5 ms")
    dt = schedule.dt
    t_f = schedule.t_f
    t_ramp = t_f + delta_tf
    n_hold = int(round(hold_time / dt))
    n_total = int(np.ceil(max(t_f, t_ramp) / dt - 1e-9)) + n_hold
    t_end = n_total * dt
    s = choose_substeps(float(np.max(schedule.omega_z)), dt, substeps)
    tl, h, n_steps = _half_lattice(t_end, dt, s)
    interp = _ScheduleInterp(schedule)
    omega2 = tables.fits["omega_z2"]

    zt0 = interp.z_t(tl)
    za0 = interp.z_a(tl)
    w2 = omega2(zt0)
    if delta_tf != 0.0:
        zt1 = interp.z_t(tl * (t_f / t_ramp))
    else:
        zt1 = zt0
    if delta_bias != 0.0:
        b0 = tables.bias_at(zt1)
        zt1 = tables.z_at_bias(b0 + delta_bias, guess=zt1)
    dzt = zt1 - zt0
    dw2 = omega2(zt1) - w2
    d0 = za0 - zt0
    src = w2 * dzt - dw2 * d0
    if model is Model.ANHARMONIC:
        src = src - w2 * d0 ** 2 / tables.L3_at(zt0)
    zero = np.zeros_like(tl)
    eps, _ = _rk4_drive(0.0, 0.0, h, w2, zero, zero, src, n_steps, s)
    times = tl[::2 * s]
    after = times >= max(t_f, t_ramp) * (1 - 1e-12)
    peak = float(np.max(np.abs(eps)))
    if peak > 0.1 * abs(schedule.z_f - schedule.z_i):
        raise PerturbationTooLarge(f"|epsilon| reached {peak:.3g} m, first-order treatment invalid")
    return PerturbationResult(times=times, epsilon=eps, residual=float(np.max(np.abs(eps[after]))),
                              delta_z_final=float(dzt[-1]), t_end_ramp=t_ramp)
