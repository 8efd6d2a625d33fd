"""Scaling-law (Castin-Dum) dynamics of a Thomas-Fermi condensate.

The cloud shape is R_a(t) = lambda_a(t) R_a(0) with

    lambda_a'' + omega_a(t)^2 lambda_a = omega_a(0)^2 / (lambda_a lambda_x lambda_y lambda_z)

Trap schedules are chained segments (ramp, hold, free flight, lens...).  A
segment switch is an instantaneous frequency step; RK4 never straddles one.
"""
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .constants import HBAR, K_B
from .errors import CollapseDetected, NonPositiveFrequency, ThomasFermiWarning

DT_TRAP = 5e-6
DT_FREE = 50e-6
RATE_WINDOW = 20e-3
_COLLAPSE = 1e-6


@dataclass(frozen=True, eq=False)
class TrapSegment:
    """One piece of a frequency schedule, in local time [0, duration].

    ``omega`` is either a constant 3-vector or an (n, 3) series sampled at
    ``times`` (local), interpolated by cubic splines.
    """
    duration: float
    omega: np.ndarray
    times: np.ndarray = None
    label: str = ""

    def __post_init__(self):
        if self.duration < 0:
            raise ValueError("segment duration must be nonnegative")
        om = np.asarray(self.omega, dtype=float)
        if np.any(om < 0):
            raise ValueError("trap frequencies must be nonnegative")
        object.__setattr__(self, "omega", om)
        if om.ndim == 2:
            t = np.asarray(self.times, dtype=float)
            if t.shape[0] != om.shape[0]:
                raise ValueError("times and omega series differ in length")
            object.__setattr__(self, "times", t)
            object.__setattr__(self, "_spline", CubicSpline(t, om ** 2, axis=0))

    @property
    def is_free(self):
        return self.omega.ndim == 1 and not np.any(self.omega)

    @property
    def constant(self):
        return self.omega.ndim == 1

    def omega2_at(self, t):
        """Squared frequencies at local times ``t`` -> (len(t), 3)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if self.constant:
            return np.broadcast_to(self.omega ** 2, (len(t), 3)).copy()
        return np.maximum(self._spline(np.clip(t, 0, self.times[-1])), 0.0)

    def start_omega(self):
        return np.sqrt(self.omega2_at([0.0])[0])

    def end_omega(self):
        return np.sqrt(self.omega2_at([self.duration])[0])


@dataclass(frozen=True, eq=False)
class TrapFrequencySchedule:
    segments: tuple

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))

    @classmethod
    def constant(cls, omega, duration, label="hold"):
        return cls((TrapSegment(float(duration), np.asarray(omega, dtype=float), label=label),))

    @classmethod
    def free(cls, duration, label="free"):
        return cls((TrapSegment(float(duration), np.zeros(3), label=label),))

    @classmethod
    def sampled(cls, times, omega, label="ramp"):
        times = np.asarray(times, dtype=float)
        return cls((TrapSegment(float(times[-1] - times[0]), omega, times - times[0], label=label),))

    def then(self, other):
        return TrapFrequencySchedule(self.segments + other.segments)

    @property
    def duration(self):
        return float(sum(s.duration for s in self.segments))

    @property
    def switch_times(self):
        return np.cumsum([0.0] + [s.duration for s in self.segments])

    @property
    def omega0(self):
        return self.segments[0].start_omega()

    def axes_permuted(self, perm):
        segs = []
        for s in self.segments:
            om = s.omega[..., list(perm)]
            segs.append(TrapSegment(s.duration, om, s.times, s.label))
        return TrapFrequencySchedule(segs)


def ramp_frequency_schedule(schedule, tables, label="ramp"):
    """Eigenfrequencies of the trap along a transport schedule."""
    return TrapFrequencySchedule.sampled(schedule.times, tables.omegas(schedule.z_t), label=label)


@dataclass(frozen=True, eq=False)
class ScalingState:
    t: float
    lam: np.ndarray
    lam_dot: np.ndarray

    def __post_init__(self):
        if np.any(np.asarray(self.lam) <= 0):
            raise CollapseDetected("scaling factors must stay positive")


@dataclass(frozen=True, eq=False)
class ScalingSeries:
    times: np.ndarray
    lam: np.ndarray        # (n, 3)
    lam_dot: np.ndarray    # (n, 3)
    switch_times: np.ndarray
    omega0: np.ndarray

    def state(self, k):
        return ScalingState(float(self.times[k]), self.lam[k].copy(), self.lam_dot[k].copy())

    @property
    def final(self):
        return self.state(-1)

    def segment_mask(self, index):
        lo, hi = self.switch_times[index], self.switch_times[index + 1]
        return (self.times >= lo - 1e-12) & (self.times <= hi + 1e-12)


def _rk4_single(state, w0sq, om2, h, n):
    """Pure-Python RK4 for one trajectory; om2 on the half-step lattice (2n+1, 3)."""
    lx, ly, lz, vx, vy, vz = (float(s) for s in state)
    ax0, ay0, az0 = (float(w) for w in w0sq)
    o = om2.tolist()
    out = np.empty((n + 1, 6))
    out[0] = (lx, ly, lz, vx, vy, vz)
    h2, h6 = 0.5 * h, h / 6.0

    def acc(lx, ly, lz, w):
        p = lx * ly * lz
        return (ax0 / (lx * p) - w[0] * lx, ay0 / (ly * p) - w[1] * ly, az0 / (lz * p) - w[2] * lz)

    rows = []
    for i in range(n):
        j = 2 * i
        k1 = acc(lx, ly, lz, o[j])
        x2 = (lx + h2 * vx, ly + h2 * vy, lz + h2 * vz)
        u2 = (vx + h2 * k1[0], vy + h2 * k1[1], vz + h2 * k1[2])
        k2 = acc(x2[0], x2[1], x2[2], o[j + 1])
        x3 = (lx + h2 * u2[0], ly + h2 * u2[1], lz + h2 * u2[2])
        u3 = (vx + h2 * k2[0], vy + h2 * k2[1], vz + h2 * k2[2])
        k3 = acc(x3[0], x3[1], x3[2], o[j + 1])
        x4 = (lx + h * u3[0], ly + h * u3[1], lz + h * u3[2])
        u4 = (vx + h * k3[0], vy + h * k3[1], vz + h * k3[2])
        k4 = acc(x4[0], x4[1], x4[2], o[j + 2])
        lx += h6 * (vx + 2 * u2[0] + 2 * u3[0] + u4[0])
        ly += h6 * (vy + 2 * u2[1] + 2 * u3[1] + u4[1])
        lz += h6 * (vz + 2 * u2[2] + 2 * u3[2] + u4[2])
        vx += h6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        vy += h6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        vz += h6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
        if lx < _COLLAPSE or ly < _COLLAPSE or lz < _COLLAPSE:
            raise CollapseDetected("a scaling factor fell below 1e-6")
        rows.append((lx, ly, lz, vx, vy, vz))
    if rows:
        out[1:] = rows
    return out


def _acc_batch(lam, w0sq, om2):
    p = np.prod(lam, axis=-1, keepdims=True)
    return w0sq / (lam * p) - om2 * lam


def rk4_batch(state, w0sq, om2_fn, t0, h, n):
    """Vectorized RK4 over a batch of trajectories.

    ``state`` has shape (..., 6); ``h`` may be a scalar or broadcastable to
    the batch shape (per-trajectory step, e.g. different lens durations);
    ``om2_fn(t)`` returns squared frequencies broadcastable to (..., 3).
    Returns the final state only.
    """
    y = np.array(state, dtype=float)
    h = np.asarray(h, dtype=float)
    hh = h[..., None] if h.ndim else h
    t = np.asarray(t0, dtype=float)
    for _ in range(n):
        lam, v = y[..., :3], y[..., 3:]
        k1 = _acc_batch(lam, w0sq, om2_fn(t))
        om_mid = om2_fn(t + 0.5 * h)
        l2, v2 = lam + 0.5 * hh * v, v + 0.5 * hh * k1
        k2 = _acc_batch(l2, w0sq, om_mid)
        l3, v3 = lam + 0.5 * hh * v2, v + 0.5 * hh * k2
        k3 = _acc_batch(l3, w0sq, om_mid)
        l4, v4 = lam + hh * v3, v + hh * k3
        k4 = _acc_batch(l4, w0sq, om2_fn(t + h))
        lam = lam + hh / 6 * (v + 2 * v2 + 2 * v3 + v4)
        v = v + hh / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if np.any(lam < _COLLAPSE):
            raise CollapseDetected("a scaling factor fell below 1e-6")
        y = np.concatenate([lam, v], axis=-1)
        t = t + h
    return y


def integrate_scaling(schedule, omega0=None, state0=None, dt_trap=DT_TRAP, dt_free=DT_FREE,
                      t_span=None):
    """Integrate the scaling equations through every segment of ``schedule``.

    ``omega0`` sets the reference frequencies on the right-hand side; it
    defaults to the schedule's initial trap.  ``state0`` is
    (lambda, lambda_dot) and defaults to the equilibrium (1, 1, 1, 0, 0, 0).
    ``t_span`` optionally stops integration early.
    """
    w0 = schedule.omega0 if omega0 is None else np.asarray(omega0, dtype=float)
    if np.any(w0 <= 0):
        raise NonPositiveFrequency("initial trap frequencies must be positive")
    w0sq = w0 ** 2
    y = np.array([1.0, 1.0, 1.0, 0.0, 0.0, 0.0]) if state0 is None else np.asarray(state0, dtype=float).copy()
    t_stop = schedule.duration if t_span is None else float(t_span)
    times, states = [np.array([0.0])], [y[None, :]]
    t0 = 0.0
    for seg in schedule.segments:
        if t0 >= t_stop - 1e-15:
            break
        dur = min(seg.duration, t_stop - t0)
        if dur <= 0:
            continue
        dt = dt_free if seg.is_free else dt_trap
        n = max(int(np.ceil(dur / dt - 1e-9)), 1)
        h = dur / n
        tl = np.linspace(0.0, dur, 2 * n + 1)
        om2 = seg.omega2_at(tl)
        block = _rk4_single(y, w0sq, om2, h, n)
        times.append(t0 + tl[2::2])
        states.append(block[1:])
        y = block[-1]
        t0 += dur
    t = np.concatenate(times)
    s = np.concatenate(states)
    return ScalingSeries(times=t, lam=s[:, :3], lam_dot=s[:, 3:], switch_times=schedule.switch_times,
                         omega0=w0)


def geometric_mean(omega):
    return float(np.prod(omega) ** (1.0 / 3.0))


def thomas_fermi_parameter(species, omega0):
    wbar = geometric_mean(omega0)
    a_osc = np.sqrt(HBAR / (species.mass * wbar))
    return species.atom_number * species.a_s / a_osc


def initial_tf_radii(species, omega0):
    """Thomas-Fermi radii a_osc (15 N a_s / a_osc)^(1/5) wbar / omega_a."""
    omega0 = np.asarray(omega0, dtype=float)
    if np.any(omega0 <= 0):
        raise NonPositiveFrequency("trap frequencies must be positive")
    wbar = geometric_mean(omega0)
    a_osc = np.sqrt(HBAR / (species.mass * wbar))
    chi = species.atom_number * species.a_s / a_osc
    if chi < 100:
        warnings.warn(f"N a_s / a_osc = {chi:.3g} is small for the Thomas-Fermi limit", ThomasFermiWarning,
                      stacklevel=2)
    return a_osc * (15 * chi) ** 0.2 * wbar / omega0


def chemical_potential(species, omega0):
    """Thomas-Fermi chemical potential (1/2) m omega_a^2 R_a^2 [J]."""
    R = initial_tf_radii(species, omega0)
    return 0.5 * species.mass * float(omega0[0]) ** 2 * float(R[0]) ** 2


def widths_from_radii(R):
    return np.asarray(R) / np.sqrt(7.0)


def expansion_temperature(rates, mass):
    """Expansion temperature from asymptotic width rates d(Delta_a)/dt.

    (3/2) k_B T = (m/2) sum rate_a^2 and, per axis, k_B T_a = m rate_a^2.
    Returns (T_3d, T_1d).
    """
    r = np.asarray(rates, dtype=float)
    t1 = mass * r ** 2 / K_B
    t3 = mass * np.sum(r ** 2, axis=-1) / (3 * K_B)
    return (float(t3) if np.ndim(t3) == 0 else t3), t1


def temperature_from_radius_rates(radius_rates, mass):
    """Same temperature written with Thomas-Fermi radius rates: k_B T = m/21 sum (dR/dt)^2."""
    r = np.asarray(radius_rates, dtype=float)
    return mass / 21.0 * np.sum(r ** 2, axis=-1) / K_B


def asymptotic_rates(times, widths, window=RATE_WINDOW):
    """Slopes of a linear fit of each width over the last ``window`` seconds.

    Returns (rates, rms_residual) with one entry per axis.
    """
    times = np.asarray(times, dtype=float)
    widths = np.asarray(widths, dtype=float)
    m = times >= times[-1] - window * (1 + 1e-9)
    if np.count_nonzero(m) < 3:
        raise ValueError("rate window holds fewer than three samples")
    tt = times[m] - times[m].mean()
    A = np.column_stack([tt, np.ones_like(tt)])
    coef, *_ = np.linalg.lstsq(A, widths[m], rcond=None)
    resid = widths[m] - A @ coef
    return coef[0], np.sqrt(np.mean(resid ** 2, axis=0))


@dataclass(frozen=True, eq=False)
class CloudObservables:
    R_TF: np.ndarray
    widths: np.ndarray
    expansion_rates: np.ndarray
    temperature: float
    temperature_1d: np.ndarray
    rate_residual: np.ndarray = None


def cloud_observables(series, R0, mass, window=RATE_WINDOW):
    """Radii, widths, rates and temperatures at the end of a scaling run."""
    R = series.lam * R0
    widths = widths_from_radii(R)
    rates, resid = asymptotic_rates(series.times, widths, window)
    T, T1 = expansion_temperature(rates, mass)
    return CloudObservables(R_TF=R[-1], widths=widths[-1], expansion_rates=rates, temperature=T,
                            temperature_1d=T1, rate_residual=resid)


def equilibrium_lambda(omega, omega0, lam_other, axis):
    """lambda_axis at rest in trap ``omega`` given the other two factors."""
    return (omega0[axis] ** 2 / (omega[axis] ** 2 * lam_other)) ** (1.0 / 3.0)
