"""End-to-end studies shared by the CLI, the figure bundles and the acceptance suite."""
from dataclasses import dataclass, field, replace

import numpy as np

from . import presets
from .classical_sim import Model, integrate, perturbation_response, ramp_time_scan
from .constants import MS
from .mode_analysis import (analyze_series, cylindrical_parameters, mode_frequencies, out_of_phase,
                            relative_excursion)
from .scaling_sim import (TrapFrequencySchedule, initial_tf_radii, integrate_scaling, ramp_frequency_schedule,
                          widths_from_radii)
from .sequence import optimize_hold_and_lens, run_sequence
from .sta_design import AnsatzKind

SPECTRUM_DT = 0.5e-3
MODE_HOLD = 0.5


def frange(spec):
    """'a:b:step' (inclusive of b up to rounding) or 'a,b,c' -> float array."""
    spec = str(spec).strip()
    if ":" in spec:
        a, b, step = (float(v) for v in spec.split(":"))
        if step <= 0 or b < a:
            raise ValueError(f"bad range {spec!r}")
        n = int(np.floor((b - a) / step + 1e-9)) + 1
        return np.round(a + step * np.arange(n), 12)
    return np.array([float(v) for v in spec.split(",") if v.strip()])


@dataclass
class Context:
    """Chip, species, defaults and lazily built trap tables."""
    chip: object
    species: object
    defaults: object
    workers: int = 1
    _tables: object = field(default=None, repr=False)

    @classmethod
    def load(cls, path=None, workers=1):
        chip, species, defaults = presets.load(path)
        return cls(chip, species, defaults, workers)

    @property
    def tables(self):
        if self._tables is None:
            self._tables = presets.tables_for(self.chip, self.species, self.defaults, self.workers)
        return self._tables

    def schedule(self, kind=AnsatzKind.CHIRPED, **kw):
        return presets.transport(self.tables, self.defaults, kind=kind, **kw)


def transport_run(ctx, kind=AnsatzKind.CHIRPED, model=Model.ANHARMONIC, hold=0.15, **kw):
    sched = ctx.schedule(kind, **kw)
    traj = integrate(sched, model, hold_time=hold, L3_fit=ctx.tables.fits["L3"])
    return sched, traj


def ramp_scan(ctx, tf_values, kind=AnsatzKind.CHIRPED, model=Model.ANHARMONIC, hold=0.15):
    template = ctx.schedule(kind).ansatz
    return ramp_time_scan(template, tf_values, ctx.tables, model, hold, workers=ctx.workers)


def robustness(ctx, delta_bias=0.0, delta_tf=0.0, model=Model.HARMONIC, hold=0.15):
    sched = ctx.schedule()
    return perturbation_response(sched, ctx.tables, delta_bias, delta_tf, model, hold)


@dataclass(frozen=True, eq=False)
class ModeStudy:
    t_f: float
    times: np.ndarray          # hold-phase times (from end of ramp), decimated
    lam: np.ndarray            # (n, 3) scale factors during the hold
    series: object             # full ScalingSeries
    modes: object              # ModeTable of the final trap
    spectra: tuple             # Spectrum per axis
    excursion: np.ndarray      # max |lambda/lambda(t_f) - 1| per axis over the hold
    weak_vs_strong: bool       # x out of phase with y at the dominant weak-axis frequency


def mode_study(ctx, t_f, hold=MODE_HOLD, kind=AnsatzKind.CHIRPED, sample_dt=SPECTRUM_DT):
    """Scaling-law shape oscillations after a transport of duration ``t_f``."""
    sched = ctx.schedule(kind, t_f=t_f)
    final = ctx.tables.omegas(sched.z_f)
    fs = ramp_frequency_schedule(sched, ctx.tables).then(TrapFrequencySchedule.constant(final, hold))
    series = integrate_scaling(fs)
    t0 = sched.t_f
    th = t0 + np.arange(int(round(hold / sample_dt)) + 1) * sample_dt
    th = th[th <= series.times[-1] + 1e-12]
    lam = np.column_stack([np.interp(th, series.times, series.lam[:, k]) for k in range(3)])
    eta, wp = cylindrical_parameters(final)
    modes = mode_frequencies(eta, wp)
    rate = 1.0 / sample_dt
    spectra = tuple(analyze_series(lam[:, k], rate, modes) for k in range(3))
    excursion = np.array([relative_excursion(lam[:, k]) for k in range(3)])
    dom = spectra[0].dominant
    opp = bool(out_of_phase(lam[:, 0], lam[:, 1], dom.frequency, rate)) if dom else False
    return ModeStudy(t_f=t_f, times=th - t0, lam=lam, series=series, modes=modes, spectra=spectra,
                     excursion=excursion, weak_vs_strong=opp)


@dataclass(frozen=True, eq=False)
class GPEComparison:
    run: object                 # gpe_sim.TransportRun
    newton: object              # harmonic classical trajectory
    z_deviation: float          # max |<Z>_GPE - z_Newton| [m]
    grid_spacing_z: float       # lab-frame grid spacing along Z at t = 0 [m]
    norm_drift: float
    scaling_widths: np.ndarray  # (n, 3) lambda R_TF / sqrt(7) at the GPE output times
    width_rms: np.ndarray       # per-axis RMS of (GPE / scaling - 1)


def gpe_comparison(ctx, grid=(64, 64, 64), hold=0.0, dt=4e-6, mode="harmonic", extent_factor=8.0,
                   snapshot_times=()):
    """Harmonic GPE transport against the Newton and scaling-law oracles."""
    from .gpe_sim import run_gpe_transport
    sched = ctx.schedule()
    run = run_gpe_transport(sched, ctx.tables, ctx.species, mode=mode, grid_n=grid, hold=hold, dt=dt,
                            extent_factor=extent_factor, snapshot_times=snapshot_times)
    res = run.result
    newton = integrate(sched, Model.HARMONIC, hold_time=hold)
    z_n = np.interp(res.times, newton.times, newton.z)
    dev = float(np.max(np.abs(res.com[:, 2] - z_n)))
    spacing = run.ground.psi.grid.spacing[2] * float(run.dilation(0.0)[2])
    lam = np.array([run.dilation(t) for t in res.times])
    ws = lam * widths_from_radii(run.radii)
    rms = np.sqrt(np.mean((res.widths / ws - 1.0) ** 2, axis=0))
    drift = float(np.max(np.abs(res.norm / res.norm[0] - 1.0)))
    return GPEComparison(run=run, newton=newton, z_deviation=dev, grid_spacing_z=spacing, norm_drift=drift,
                         scaling_widths=ws, width_rms=rms)


@dataclass(frozen=True, eq=False)
class DKCStudy:
    preset: object              # SequenceReport at the configured hold and lens
    adiabatic: object           # SequenceReport with the weak axis at rest at release
    best_plan: object
    best: object                # SequenceReport at the optimum
    holds: np.ndarray
    lenses: np.ndarray
    T_map: np.ndarray
    neighborhood_max: float     # max T over cells within 0.5 ms of the optimum


def dkc_study(ctx, hold_values=None, lens_values=None, engine="scaling"):
    holds = frange("28:35:0.1") * MS if hold_values is None else np.asarray(hold_values, dtype=float)
    lenses = frange("3:7:0.1") * MS if lens_values is None else np.asarray(lens_values, dtype=float)
    plan = presets.dkc_plan(ctx.tables, ctx.defaults)
    rep = run_sequence(plan, ctx.species, ctx.tables)
    adi = run_sequence(replace(plan, adiabatic_weak_axis=True), ctx.species, ctx.tables)
    best_plan, T = optimize_hold_and_lens(plan, ctx.species, ctx.tables, holds, lenses, workers=ctx.workers)
    best = run_sequence(replace(best_plan, engine=engine), ctx.species, ctx.tables)
    near = (np.abs(holds - best_plan.hold)[:, None] <= 0.5 * MS + 1e-12) & \
           (np.abs(lenses - best_plan.lens.duration)[None, :] <= 0.5 * MS + 1e-12)
    return DKCStudy(preset=rep, adiabatic=adi, best_plan=best_plan, best=best, holds=holds, lenses=lenses,
                    T_map=T, neighborhood_max=float(np.max(T[near])))


def trap_summary(ctx, bias):
    """Characterization of the configured chip at one bias value [T]."""
    from .chip_model import characterize_trap
    return characterize_trap(ctx.chip.with_bias(bias), ctx.species)


def tf_radii(ctx, z):
    return initial_tf_radii(ctx.species, ctx.tables.omegas(z))

