"""Transport, hold, release and delta-kick collimation sequences.

The scaling engine treats the whole sequence as one chained frequency
schedule: ramp -> hold -> free flight -> lens -> free flight.  The GPE
engine runs the same chain through ``gpe_sim``.
"""
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from scipy.signal import find_peaks

from .constants import GAUSS
from .errors import LensBeforeExpansion, NoOscillation
from .scaling_sim import (DT_FREE, DT_TRAP, RATE_WINDOW, TrapFrequencySchedule, _rk4_single,
                          asymptotic_rates, equilibrium_lambda, expansion_temperature,
                          initial_tf_radii, ramp_frequency_schedule, rk4_batch, widths_from_radii)

LENS_FREQUENCIES = (1.7, 7.2, 7.2)
LENS_DURATION = 4.84e-3
FREE1 = 100e-3
FREE2 = 300e-3
HINT_DELAY_FRACTION = 0.02


class Engine(str, Enum):
    SCALING = "scaling"
    GPE = "gpe"


@dataclass(frozen=True)
class LensSpec:
    frequencies: tuple = LENS_FREQUENCIES   # Hz
    duration: float = LENS_DURATION
    wire_current: float = 0.1
    bias: float = 0.12 * GAUSS

    def __post_init__(self):
        f = tuple(float(x) for x in self.frequencies)
        if len(f) != 3 or min(f) <= 0:
            raise ValueError("lens frequencies must be three positive values")
        if self.duration < 0:
            raise ValueError("lens duration must be nonnegative")
        object.__setattr__(self, "frequencies", f)

    @property
    def omega(self):
        return 2 * np.pi * np.array(self.frequencies)


@dataclass(frozen=True, eq=False)
class SequencePlan:
    transport: object            # RampSchedule
    hold: float
    free1: float = FREE1
    lens: LensSpec = field(default_factory=LensSpec)
    free2: float = FREE2
    engine: Engine = Engine.SCALING
    adiabatic_weak_axis: bool = False

    def __post_init__(self):
        object.__setattr__(self, "engine", Engine(self.engine))
        for name in ("hold", "free1", "free2"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    def timeline(self):
        """(label, start, end) for each segment, contiguous by construction."""
        out, t = [], 0.0
        for label, d in (("transport", self.transport.t_f), ("hold", self.hold), ("free1", self.free1),
                         ("lens", self.lens.duration), ("free2", self.free2)):
            out.append((label, t, t + d))
            t += d
        return out

    def frequency_schedule(self, tables):
        final = tables.omegas(self.transport.z_f)
        sched = ramp_frequency_schedule(self.transport, tables, label="transport")
        sched = sched.then(TrapFrequencySchedule.constant(final, self.hold, "hold"))
        sched = sched.then(TrapFrequencySchedule.free(self.free1, "free1"))
        sched = sched.then(TrapFrequencySchedule.constant(self.lens.omega, self.lens.duration, "lens"))
        return sched.then(TrapFrequencySchedule.free(self.free2, "free2"))


@dataclass(frozen=True, eq=False)
class SequenceReport:
    times: np.ndarray
    widths: np.ndarray          # (n, 3) standard deviations [m]
    lam: np.ndarray
    lam_dot: np.ndarray
    R0: np.ndarray
    rates: np.ndarray
    rate_residual: np.ndarray
    temperature: float
    temperature_1d: np.ndarray
    timeline: list
    engine: Engine = Engine.SCALING

    def segment(self, label):
        for name, a, b in self.timeline:
            if name == label:
                m = (self.times >= a - 1e-12) & (self.times <= b + 1e-12)
                return self.times[m], self.widths[m]
        raise KeyError(label)


def _run_segments(schedule, w0, y, segments):
    times, states = [np.array([0.0])], [y[None, :]]
    t0 = 0.0
    for seg in segments:
        if seg.duration <= 0:
            continue
        dt = DT_FREE if seg.is_free else DT_TRAP
        n = max(int(np.ceil(seg.duration / dt - 1e-9)), 1)
        tl = np.linspace(0.0, seg.duration, 2 * n + 1)
        block = _rk4_single(y, w0 ** 2, seg.omega2_at(tl), seg.duration / n, n)
        times.append(t0 + tl[2::2])
        states.append(block[1:])
        y = block[-1]
        t0 += seg.duration
    return np.concatenate(times), np.concatenate(states)


def _scaling_sequence(plan, species, tables, rate_window):
    sched = plan.frequency_schedule(tables)
    w0 = sched.omega0
    y = np.array([1.0, 1.0, 1.0, 0.0, 0.0, 0.0])
    segs = sched.segments
    if plan.adiabatic_weak_axis:
        t_a, s_a = _run_segments(sched, w0, y, segs[:2])
        y = s_a[-1].copy()
        final = tables.omegas(plan.transport.z_f)
        y[0] = equilibrium_lambda(final, w0, y[1] * y[2], 0)
        y[3] = 0.0
        t_b, s_b = _run_segments(sched, w0, y, segs[2:])
        times = np.concatenate([t_a, t_a[-1] + t_b[1:]])
        states = np.concatenate([s_a, s_b[1:]])
    else:
        times, states = _run_segments(sched, w0, y, segs)
    R0 = initial_tf_radii(species, w0)
    widths = widths_from_radii(states[:, :3] * R0)
    rates, resid = asymptotic_rates(times, widths, rate_window)
    T, T1 = expansion_temperature(rates, species.mass)
    return SequenceReport(times=times, widths=widths, lam=states[:, :3], lam_dot=states[:, 3:], R0=R0,
                          rates=rates, rate_residual=resid, temperature=T, temperature_1d=T1,
                          timeline=plan.timeline(), engine=Engine.SCALING)


def run_sequence(plan, species, tables, rate_window=RATE_WINDOW, gpe_options=None):
    """Simulate the full sequence and return sizes, rates and temperatures."""
    if plan.free1 < 10e-3 and plan.lens.duration > 0:
        warnings.warn("lens applied less than 10 ms after release", LensBeforeExpansion, stacklevel=2)
    if plan.engine is Engine.GPE:
        from .gpe_sim import run_sequence_gpe
        return run_sequence_gpe(plan, species, tables, rate_window=rate_window, **(gpe_options or {}))
    return _scaling_sequence(plan, species, tables, rate_window)


def _hold_states(schedule_end_state, w0, final, holds):
    """States after each requested hold time (sorted ascending)."""
    out = np.empty((len(holds), 6))
    y = schedule_end_state
    t = 0.0
    w2 = final ** 2
    for i, th in enumerate(holds):
        d = th - t
        if d > 0:
            n = max(int(np.ceil(d / DT_TRAP - 1e-9)), 1)
            om2 = np.broadcast_to(w2, (2 * n + 1, 3))
            y = _rk4_single(y, w0 ** 2, np.asarray(om2), d / n, n)[-1]
            t = th
        out[i] = y
    return out


def _batch_free(y, w0sq, duration):
    if duration <= 0:
        return y
    n = max(int(np.ceil(duration / DT_FREE - 1e-9)), 1)
    return rk4_batch(y, w0sq, lambda t: 0.0, 0.0, duration / n, n)


def _scan_rows(args):
    y_hold, w0, lens_omega, lens_values, free1, free2, R0, mass, window = args
    w0sq = w0 ** 2
    y = _batch_free(y_hold, w0sq, free1)                      # (nh, 6)
    nl = len(lens_values)
    y = np.repeat(y[:, None, :], nl, axis=1)                   # (nh, nl, 6)
    lens_values = np.asarray(lens_values, dtype=float)
    n_lens = max(int(np.ceil(np.max(lens_values) / DT_TRAP - 1e-9)), 1)
    h = np.broadcast_to(lens_values / n_lens, y.shape[:2])
    lw2 = lens_omega ** 2
    y = rk4_batch(y, w0sq, lambda t: lw2, 0.0, h, n_lens)
    # free2 up to the rate window, then sample the window
    n2 = max(int(np.ceil(free2 / DT_FREE - 1e-9)), 1)
    h2 = free2 / n2
    n_win = min(int(round(window / h2)), n2)
    y = rk4_batch(y, w0sq, lambda t: 0.0, 0.0, h2, n2 - n_win)
    samples = [y]
    for _ in range(n_win):
        y = rk4_batch(y, w0sq, lambda t: 0.0, 0.0, h2, 1)
        samples.append(y)
    lam = np.stack([s[..., :3] for s in samples], axis=0)     # (nt, nh, nl, 3)
    widths = widths_from_radii(lam * R0)
    tt = np.arange(len(samples)) * h2
    tt = tt - tt.mean()
    rates = np.tensordot(tt, widths - widths.mean(axis=0), axes=(0, 0)) / np.sum(tt ** 2)
    T, _ = expansion_temperature(rates, mass)
    return T


def optimize_hold_and_lens(plan, species, tables, hold_values, lens_values, workers=1,
                           rate_window=RATE_WINDOW):
    """Scan hold and lens durations with the scaling engine.

    Returns (best_plan, T_map) with T_map[i_hold, i_lens] in kelvin.  Ties
    in temperature go to the shorter hold + lens, then to the smaller hold.
    """
    holds = np.asarray(hold_values, dtype=float)
    lenses = np.asarray(lens_values, dtype=float)
    if np.any(holds < 0) or np.any(lenses < 0):
        raise ValueError("durations must be nonnegative")
    order = np.argsort(holds, kind="stable")
    ramp = ramp_frequency_schedule(plan.transport, tables)
    w0 = ramp.omega0
    t_end, s_end = _run_segments(ramp, w0, np.array([1.0, 1.0, 1.0, 0, 0, 0]), ramp.segments)
    final = tables.omegas(plan.transport.z_f)
    y_sorted = _hold_states(s_end[-1], w0, final, holds[order])
    y_hold = np.empty_like(y_sorted)
    y_hold[order] = y_sorted
    R0 = initial_tf_radii(species, w0)
    args = (plan.lens.omega, lenses, plan.free1, plan.free2, R0, species.mass, rate_window)
    if workers > 1 and len(holds) > 1:
        chunks = np.array_split(np.arange(len(holds)), min(workers, len(holds)))
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_scan_rows, [(y_hold[c], w0) + args for c in chunks]))
        T = np.concatenate(parts, axis=0)
    else:
        T = _scan_rows((y_hold, w0) + args)
    best = None
    for i, th in enumerate(holds):
        for j, tl in enumerate(lenses):
            key = (T[i, j], th + tl, th, tl)
            if best is None or key < best[0]:
                best = (key, i, j)
    _, i, j = best
    best_plan = replace(plan, hold=float(holds[i]), lens=replace(plan.lens, duration=float(lenses[j])))
    return best_plan, T


def release_timing_hint(times, size, delay_fraction=HINT_DELAY_FRACTION, min_relative_amplitude=1e-4):
    """Candidate release times just after each maximum of the weak-axis size.

    Maxima are located by a parabola through the three samples around each
    local maximum; the hint adds ``delay_fraction`` of the oscillation
    period estimated from consecutive extrema.
    """
    t = np.asarray(times, dtype=float)
    s = np.asarray(size, dtype=float)
    span = np.max(s) - np.min(s)
    if span <= min_relative_amplitude * np.mean(np.abs(s)):
        raise NoOscillation("size series shows no oscillation")
    imax, _ = find_peaks(s, prominence=0.2 * span)
    imin, _ = find_peaks(-s, prominence=0.2 * span)
    if len(imax) == 0 or len(imax) + len(imin) < 2:
        raise NoOscillation("fewer than one full oscillation in the series")
    dt = t[1] - t[0]
    peaks = []
    for k in imax:
        a, b, c = s[k - 1], s[k], s[k + 1]
        den = a - 2 * b + c
        off = 0.5 * (a - c) / den if den != 0 else 0.0
        peaks.append(t[k] + off * dt)
    peaks = np.array(peaks)
    if len(peaks) >= 2:
        period = float(np.mean(np.diff(peaks)))
    else:
        ext = np.sort(np.concatenate([t[imax], t[imin]]))
        period = 2 * float(np.mean(np.diff(ext)))
    return peaks + delay_fraction * period
