"""atomchip-sta command line: one subcommand per study, CSV/JSON/PNG outputs and a run manifest.

Exit status: 0 on success (and all acceptance checks passing, where a
subcommand runs any), 1 if a check failed, 2 on usage or configuration
errors, 3 on a numerical failure inside a module.
"""
import argparse
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import acceptance as acc
from . import plotting
from . import reproduce as rp
from .classical_sim import Model, integrate, perturbation_response
from .config import resolve_config_path
from .constants import GAUSS, MILLIGAUSS, MM, MS, PK, UM, US
from .errors import AtomChipError, ParseError, UsageError, ValidationError
from .io import RunManifest, file_hash, write_csv, write_json
from .sta_design import AnsatzKind

FIGURES = ("fig3", "fig4", "fig5", "fig6", "fig7", "fig8")

# flag dest -> (SI name, factor)
_SI = {
    "tf_ms": ("t_f_s", MS), "zi_mm": ("z_i_m", MM), "zf_mm": ("z_f_m", MM), "hold_ms": ("hold_s", MS),
    "delta_bias_mG": ("delta_bias_T", MILLIGAUSS), "delta_tf_ms": ("delta_tf_s", MS), "dt_us": ("dt_s", US),
    "bias_min_G": ("bias_min_T", GAUSS), "bias_max_G": ("bias_max_T", GAUSS),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _ms_list(value):
    try:
        return rp.frange(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _grid(value):
    try:
        n = tuple(int(v) for v in value.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("grid must be NX,NY,NZ") from None
    if len(n) != 3:
        raise argparse.ArgumentTypeError("grid must be NX,NY,NZ")
    return n


def build_parser():
    p = _Parser(prog="atomchip-sta", description="Atom-chip transport, condensate dynamics and lensing studies.")
    p.add_argument("--config", help="configuration file (default: $ATOMCHIP_STA_CONFIG or the shipped preset)")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--workers", type=int, default=1, help="parallel sweep width; 1 is bitwise reproducible")
    p.add_argument("--no-plots", action="store_true", help="skip PNG figures")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("trap-tables", help="trap position, frequencies, L3 and tilt versus bias")
    s.add_argument("--bias-min-G", type=float)
    s.add_argument("--bias-max-G", type=float)
    s.add_argument("--samples", type=int)

    def ramp_flags(s, tf=True):
        s.add_argument("--ansatz", choices=[k.value for k in AnsatzKind], default="chirped")
        if tf:
            s.add_argument("--tf-ms", type=float)
        s.add_argument("--a", type=float, help="chirp parameter a")
        s.add_argument("--b", type=float, help="chirp parameter b")

    s = sub.add_parser("design-ramp", help="reverse-engineer a transport schedule")
    ramp_flags(s)
    s.add_argument("--zi-mm", type=float)
    s.add_argument("--zf-mm", type=float)
    s.add_argument("--steps", type=int)

    s = sub.add_parser("simulate-classical", help="center-of-mass transport")
    ramp_flags(s)
    s.add_argument("--model", choices=[m.value for m in Model], default="anharmonic")
    s.add_argument("--hold-ms", type=float, default=150.0)
    s.add_argument("--scan-tf", type=_ms_list, help="ramp durations in ms, a:b:step or comma list")
    s.add_argument("--delta-bias-mG", type=float, default=0.0)
    s.add_argument("--delta-tf-ms", type=float, default=0.0)

    s = sub.add_parser("simulate-scaling", help="scaling-law widths through transport and hold, or the lens sequence")
    ramp_flags(s)
    s.add_argument("--hold-ms", type=float, default=500.0)
    s.add_argument("--scenario", choices=["transport", "dkc"], default="transport")

    s = sub.add_parser("simulate-gpe", help="3D Gross-Pitaevskii transport")
    s.add_argument("--mode", choices=["harmonic", "anharmonic", "rotating"], default="harmonic")
    s.add_argument("--grid", type=_grid, default=(64, 32, 32))
    s.add_argument("--dt-us", type=float, default=4.0)
    s.add_argument("--hold-ms", type=float, default=0.0)
    s.add_argument("--snapshots", type=_ms_list, default=None, help="snapshot times in ms")
    s.add_argument("--tf-ms", type=float)

    s = sub.add_parser("analyze-modes", help="spectrum of the shape oscillation after transport")
    s.add_argument("--tf-ms", type=float, default=750.0)
    s.add_argument("--hold-ms", type=float, default=500.0)
    s.add_argument("--axis", choices=["x", "y", "z"], default="x")

    s = sub.add_parser("dkc-optimize", help="scan hold and lens durations of the lensing sequence")
    s.add_argument("--hold-range-ms", type=_ms_list, default=rp.frange("28:35:0.1"))
    s.add_argument("--lens-range-ms", type=_ms_list, default=rp.frange("3:7:0.1"))
    s.add_argument("--engine", choices=["scaling", "gpe"], default="scaling")

    s = sub.add_parser("reproduce-figure", help="emit the data behind one figure and check its headline numbers")
    s.add_argument("figure", help="one of " + ", ".join(FIGURES))
    s.add_argument("--grid", type=_grid, default=(64, 32, 32), help="GPE grid for fig6")
    return p


def _inputs_si(args):
    out = {}
    for key, value in vars(args).items():
        if value is None or key in ("command", "out", "config", "no_plots"):
            continue
        if key in _SI:
            name, f = _SI[key]
            out[name] = value * f
        elif key.endswith("_range_ms") or key in ("scan_tf", "snapshots"):
            out[key.replace("_ms", "") + "_s" if key.endswith("_ms") else key + "_s"] = np.asarray(value) * MS
        else:
            out[key] = value
    return out


class Run:
    def __init__(self, args, ctx, config_path):
        self.args = args
        self.ctx = ctx
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.checks = []
        self.manifest = RunManifest(subcommand=args.command, flags=_flags(args), inputs_si=_inputs_si(args),
                                    config_path=str(config_path), config_hash=file_hash(config_path))

    def csv(self, name, header, columns):
        return self.manifest.add(write_csv(self.out / name, header, columns))

    def json(self, name, obj):
        return self.manifest.add(write_json(self.out / name, obj))

    def plot(self, fn, name, *a, **kw):
        if self.args.no_plots:
            return None
        return self.manifest.add(fn(self.out / name, *a, **kw))

    def check(self, checks):
        for c in checks:
            print(c.line())
        self.checks.extend(checks)

    def finish(self):
        self.manifest.checks = [asdict(c) for c in self.checks]
        self.manifest.write(self.out)
        return 0 if all(c.passed for c in self.checks) else 1


def _flags(args):
    return {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in vars(args).items()}


def _schedule(run, t_f=None):
    a = run.args
    kw = {}
    tf = t_f if t_f is not None else getattr(a, "tf_ms", None)
    if tf is not None:
        kw["t_f"] = tf * MS
    if getattr(a, "a", None) is not None:
        kw["chirp_a"] = a.a
    if getattr(a, "b", None) is not None:
        kw["chirp_b"] = a.b
    return run.ctx.schedule(AnsatzKind(getattr(a, "ansatz", "chirped")), **kw)


def cmd_trap_tables(run):
    from .chip_model import trap_tables
    a, ctx = run.args, run.ctx
    lo, hi = ctx.defaults.table_bias_range
    lo = lo if a.bias_min_G is None else a.bias_min_G * GAUSS
    hi = hi if a.bias_max_G is None else a.bias_max_G * GAUSS
    n = a.samples or ctx.defaults.table_samples
    T = trap_tables(ctx.chip, ctx.species, (lo, hi), n, ctx.defaults.table_tolerance, workers=a.workers)
    rows = T.rows()
    run.csv("trap_tables.csv", ["B_bias_G", "z_t_mm", "nu_x_Hz", "nu_y_Hz", "nu_z_Hz", "L3_mm", "theta_deg"],
            rows.T)
    run.json("trap_tables.json", {name: {"orders": list(f.orders), "max_residual": f.max_residual,
                                         "domain_m": list(f.domain)} for name, f in T.fits.items()})
    z = rows[:, 1]
    run.plot(plotting.panels, "trap_tables.png", z, [
        ("frequency [Hz]", {"nu_x": rows[:, 2], "nu_y": rows[:, 3], "nu_z": rows[:, 4]}),
        ("L3 [mm]", {"L3": rows[:, 5]}), ("theta [deg]", {"theta": rows[:, 6]}),
        ("bias [G]", {"bias": rows[:, 0]})], "z_t [mm]")


def cmd_design_ramp(run):
    a, ctx = run.args, run.ctx
    kw = {}
    if a.tf_ms is not None:
        kw["t_f"] = a.tf_ms * MS
    for flag, key, f in (("a", "chirp_a", 1.0), ("b", "chirp_b", 1.0), ("zi_mm", "z_i", MM), ("zf_mm", "z_f", MM)):
        if getattr(a, flag) is not None:
            kw[key] = getattr(a, flag) * f
    if a.steps is not None:
        kw["n_steps"] = a.steps
    s = ctx.schedule(AnsatzKind(a.ansatz), **kw)
    run.csv("ramp.csv", ["t_s", "z_a_m", "z_t_m", "omega_z_rad_s", "B_bias_G", "chi"],
            [s.times, s.z_a, s.z_t, s.omega_z, s.bias / GAUSS, s.chi])
    run.json("ramp.json", {"chi_max": s.chi_max, "bias_start_G": s.bias[0] / GAUSS, "bias_end_G": s.bias[-1] / GAUSS,
                           "z_i_m": s.z_i, "z_f_m": s.z_f, "t_f_s": s.t_f})
    run.plot(plotting.panels, "ramp.png", s.times * 1e3, [
        ("position [mm]", {"z_a": s.z_a / MM, "z_t": s.z_t / MM}), ("bias [G]", {"bias": s.bias / GAUSS}),
        ("chi", {"chi": s.chi})], "t [ms]")
    print(f"chi_max = {s.chi_max:.4g}, bias {s.bias[0] / GAUSS:.4g} -> {s.bias[-1] / GAUSS:.4g} G")


def cmd_simulate_classical(run):
    a, ctx = run.args, run.ctx
    s = _schedule(run)
    model = Model(a.model)
    hold = a.hold_ms * MS
    traj = integrate(s, model, hold_time=hold, L3_fit=ctx.tables.fits["L3"])
    m = traj.metrics
    summary = {"residual_amplitude_m": m.residual_amplitude, "max_offset_m": m.max_offset,
               "anharmonicity_pct": m.anharmonicity_pct, "oscillation_amplitude_m": m.oscillation_amplitude,
               "t_f_s": s.t_f, "substeps": traj.substeps}
    z = traj.z
    if a.delta_bias_mG or a.delta_tf_ms:
        pr = perturbation_response(s, ctx.tables, a.delta_bias_mG * MILLIGAUSS, a.delta_tf_ms * MS, model, hold)
        summary.update({"perturbation_residual_m": pr.residual, "delta_z_final_m": pr.delta_z_final})
        eps = np.interp(traj.times, pr.times, pr.epsilon)
        z = traj.z + eps
        print(f"perturbation residual = {pr.residual / UM:.4g} um")
    run.csv("classical.csv", ["t_s", "z_m", "v_m_s", "z_t_m"], [traj.times, z, traj.v, traj.z_t])
    if a.scan_tf is not None and len(a.scan_tf):
        metrics = rp.ramp_scan(run.ctx, a.scan_tf * MS, AnsatzKind(a.ansatz), model, hold)
        res = np.array([mm.residual_amplitude for mm in metrics])
        off = np.array([mm.max_offset for mm in metrics])
        run.csv("classical_scan.csv", ["t_f_ms", "residual_m", "max_offset_m"], [a.scan_tf, res, off])
        summary["scan"] = {"t_f_ms": a.scan_tf, "residual_m": res}
        run.plot(plotting.line_plot, "classical_scan.png", a.scan_tf, {"residual": res / UM}, "t_f [ms]",
                 "residual [um]", logy=True, markers=True)
    run.json("classical.json", summary)
    run.plot(plotting.panels, "classical.png", traj.times * 1e3, [
        ("z [mm]", {"atoms": z / MM, "trap": traj.z_t / MM}), ("z - z_t [um]", {"offset": (z - traj.z_t) / UM})],
        "t [ms]")
    print(f"residual = {m.residual_amplitude / UM:.4g} um, max offset = {m.max_offset / UM:.4g} um")


def cmd_simulate_scaling(run):
    from .scaling_sim import (TrapFrequencySchedule, asymptotic_rates, expansion_temperature, initial_tf_radii,
                              integrate_scaling, ramp_frequency_schedule, widths_from_radii)
    from .sequence import run_sequence
    a, ctx = run.args, run.ctx
    if a.scenario == "dkc":
        from .presets import dkc_plan
        plan = dkc_plan(ctx.tables, ctx.defaults)
        rep = run_sequence(plan, ctx.species, ctx.tables)
        times, lam, R0 = rep.times, rep.lam, rep.R0
        rates, T, T1 = rep.rates, rep.temperature, rep.temperature_1d
    else:
        s = _schedule(run)
        fs = ramp_frequency_schedule(s, ctx.tables).then(
            TrapFrequencySchedule.constant(ctx.tables.omegas(s.z_f), a.hold_ms * MS))
        ser = integrate_scaling(fs)
        times, lam = ser.times, ser.lam
        R0 = initial_tf_radii(ctx.species, fs.omega0)
        rates, _ = asymptotic_rates(times, widths_from_radii(lam * R0))
        T, T1 = expansion_temperature(rates, ctx.species.mass)
    R = lam * R0
    run.csv("scaling.csv", ["t_s", "lambda_x", "lambda_y", "lambda_z", "Rx_m", "Ry_m", "Rz_m"],
            [times, *lam.T, *R.T])
    run.json("scaling.json", {"T_pK": T / PK, "T1d_pK": np.asarray(T1) / PK, "rates_um_s": np.asarray(rates) / UM,
                              "R0_m": R0, "scenario": a.scenario})
    run.plot(plotting.line_plot, "scaling.png", times * 1e3, {"x": R[:, 0] / UM, "y": R[:, 1] / UM,
                                                              "z": R[:, 2] / UM}, "t [ms]", "R_TF [um]", logy=True)
    print(f"T_3d = {T / PK:.4g} pK")


def cmd_simulate_gpe(run):
    from .gpe_sim import write_snapshot
    a, ctx = run.args, run.ctx
    t_f = (a.tf_ms if a.tf_ms is not None else ctx.defaults.ramp_time / MS)
    snaps = tuple(a.snapshots * MS) if a.snapshots is not None else ()
    old = ctx.defaults
    if a.tf_ms is not None:
        from dataclasses import replace
        ctx.defaults = replace(old, ramp_time=t_f * MS)
    try:
        cmp = rp.gpe_comparison(ctx, grid=a.grid, hold=a.hold_ms * MS, dt=a.dt_us * US, mode=a.mode,
                                snapshot_times=snaps)
    finally:
        ctx.defaults = old
    r = cmp.run.result
    run.csv("gpe.csv", ["t_s", "Za_m", "dX_m", "dY_m", "dZ_m", "dx_m", "dy_m", "dz_m", "norm", "energy_J"],
            [r.times, r.com[:, 2], *r.widths.T, *r.rotated.T, r.norm, r.energy])
    for k, (t, psi) in enumerate(r.snapshots):
        path = run.out / f"snapshot_{k:03d}.bin"
        write_snapshot(path, psi, t)
        run.manifest.add(path)
    run.json("gpe.json", {"max_z_deviation_m": cmp.z_deviation, "grid_spacing_z_m": cmp.grid_spacing_z,
                          "norm_drift": cmp.norm_drift, "width_rms_vs_scaling": cmp.width_rms,
                          "ground_state_mu_J": cmp.run.ground.mu, "steps": r.steps, "mode": a.mode,
                          "grid": list(a.grid)})
    run.plot(plotting.panels, "gpe.png", r.times * 1e3, [
        ("<Z> - z_N [nm]", {"GPE - Newton": (r.com[:, 2] - np.interp(r.times, cmp.newton.times, cmp.newton.z)) / 1e-9}),
        ("width [um]", {"X": r.widths[:, 0] / UM, "X scaling": cmp.scaling_widths[:, 0] / UM}),
        ("width [um]", {"Y": r.widths[:, 1] / UM, "Z": r.widths[:, 2] / UM, "Y scaling": cmp.scaling_widths[:, 1] / UM})],
        "t [ms]")
    print(f"max |<Z> - z_Newton| = {cmp.z_deviation / 1e-9:.4g} nm (grid {cmp.grid_spacing_z / 1e-9:.4g} nm), "
          f"norm drift {cmp.norm_drift:.2e}")


def cmd_analyze_modes(run):
    a = run.args
    st = rp.mode_study(run.ctx, a.tf_ms * MS, a.hold_ms * MS)
    k = "xyz".index(a.axis)
    sp = st.spectra[k]
    run.csv("modes.csv", ["freq_Hz", "log_magnitude"], [sp.frequencies, sp.log_magnitude])
    run.json("modes.json", {
        "axis": a.axis, "peaks": [{"frequency_Hz": p.frequency, "magnitude": p.magnitude, "label": p.label}
                                  for p in sp.peaks],
        "dominant_Hz": sp.dominant.frequency if sp.dominant else None,
        "modes_Hz": {n: st.modes.hz(n) for n in st.modes.frequencies}, "eta": st.modes.eta,
        "excursion": st.excursion, "weak_strong_out_of_phase": st.weak_vs_strong})
    run.plot(plotting.spectrum_plot, "modes.png", sp.frequencies, sp.log_magnitude, sp.peaks, st.modes, fmax=100)
    if sp.dominant:
        print(f"dominant {sp.dominant.frequency:.4g} Hz ({sp.dominant.label}); excursion {100 * st.excursion[k]:.3g}%")


def cmd_dkc_optimize(run):
    from .presets import dkc_plan
    from .sequence import optimize_hold_and_lens, run_sequence
    a, ctx = run.args, run.ctx
    plan = dkc_plan(ctx.tables, ctx.defaults)
    holds, lenses = np.asarray(a.hold_range_ms) * MS, np.asarray(a.lens_range_ms) * MS
    best_plan, T = optimize_hold_and_lens(plan, ctx.species, ctx.tables, holds, lenses, workers=a.workers)
    H, L = np.meshgrid(a.hold_range_ms, a.lens_range_ms, indexing="ij")
    run.csv("dkc_map.csv", ["hold_ms", "lens_ms", "T_pK"], [H, L, T / PK])
    best = run_sequence(best_plan, ctx.species, ctx.tables)
    summary = {"hold_ms": best_plan.hold / MS, "lens_ms": best_plan.lens.duration / MS, "T_pK": best.temperature / PK,
               "T1d_pK": best.temperature_1d / PK, "rates_um_s": best.rates / UM, "engine": a.engine}
    if a.engine == "gpe":
        from dataclasses import replace
        g = run_sequence(replace(best_plan, engine="gpe"), ctx.species, ctx.tables)
        summary["gpe"] = {"T_pK": g.temperature / PK, "T1d_pK": g.temperature_1d / PK, "rates_um_s": g.rates / UM}
    run.json("dkc_best.json", summary)
    run.plot(plotting.heatmap, "dkc_map.png", a.hold_range_ms, a.lens_range_ms, T / PK, "hold [ms]", "lens [ms]", "T [pK]")
    print(f"best hold {best_plan.hold / MS:.4g} ms, lens {best_plan.lens.duration / MS:.4g} ms, T {best.temperature / PK:.4g} pK")


def _fig3(run):
    ctx = run.ctx
    s, anh = rp.transport_run(ctx, AnsatzKind.CHIRPED, Model.ANHARMONIC)
    _, har = rp.transport_run(ctx, AnsatzKind.CHIRPED, Model.HARMONIC)
    run.csv("fig3_trajectory.csv", ["t_s", "z_anharmonic_m", "z_harmonic_m", "z_t_m"], [anh.times, anh.z, har.z, anh.z_t])
    run.plot(plotting.panels, "fig3.png", anh.times * 1e3, [
        ("z [mm]", {"anharmonic": anh.z / MM, "trap": anh.z_t / MM}),
        ("z - z_t [um]", {"anharmonic": (anh.z - anh.z_t) / UM, "harmonic": (har.z - har.z_t) / UM})], "t [ms]")
    run.check([c for c in acc.criterion_3(ctx) if c.name in ("anharmonic residual", "max offset")])
    run.check(acc.criterion_10(ctx))


def _fig4(run):
    ctx = run.ctx
    tfs = rp.frange("20:300:10") * MS
    chirp = rp.ramp_scan(ctx, tfs)
    lin = rp.ramp_scan(ctx, tfs, AnsatzKind.LINEAR)
    rc = np.array([m.residual_amplitude for m in chirp])
    rl = np.array([m.residual_amplitude for m in lin])
    run.csv("fig4_scan.csv", ["t_f_ms", "residual_chirped_m", "residual_linear_m"], [tfs / MS, rc, rl])
    run.plot(plotting.line_plot, "fig4.png", tfs / MS, {"chirped": rc / UM, "linear": rl / UM}, "t_f [ms]",
             "residual [um]", logy=True, markers=True)
    run.check([c for c in acc.criterion_3(ctx) if c.name in ("no-chirp residual", "linear-ramp residual")])


def _fig5(run):
    ctx = run.ctx
    db = np.array([-5, -4, -3, -2, -1, 1, 2, 3, 4, 5], dtype=float)
    dt = np.array([-5, -4, -3, -2, -1, 1, 2, 3, 4, 5], dtype=float)
    rb = np.array([rp.robustness(ctx, delta_bias=v * MILLIGAUSS).residual for v in db])
    rt = np.array([rp.robustness(ctx, delta_tf=v * MS).residual for v in dt])
    run.csv("fig5_bias.csv", ["delta_bias_mG", "residual_m"], [db, rb])
    run.csv("fig5_time.csv", ["delta_tf_ms", "residual_m"], [dt, rt])
    run.plot(plotting.line_plot, "fig5.png", db, {"bias [mG]": rb / UM, "t_f [ms]": rt / UM}, "perturbation",
             "residual [um]", markers=True)
    run.check([c for c in acc.criterion_4(ctx) if c.name != "runtime"])


def _fig6(run):
    ctx = run.ctx
    cmp = rp.gpe_comparison(ctx, grid=run.args.grid, hold=100 * MS)
    r = cmp.run.result
    run.csv("fig6_widths.csv", ["t_s", "dX_gpe_m", "dY_gpe_m", "dZ_gpe_m", "dX_scaling_m", "dY_scaling_m",
                                "dZ_scaling_m"], [r.times, *r.widths.T, *cmp.scaling_widths.T])
    run.plot(plotting.panels, "fig6.png", r.times * 1e3, [
        (f"d{ax} [um]", {"GPE": r.widths[:, k] / UM, "scaling": cmp.scaling_widths[:, k] / UM})
        for k, ax in enumerate("XYZ")], "t [ms]")
    run.check(acc.criterion_6(ctx, comparison=cmp) + acc.criterion_5(ctx, comparison=cmp))


def _fig7(run):
    ctx = run.ctx
    slow, fast = rp.mode_study(ctx, 750 * MS), rp.mode_study(ctx, 75 * MS)
    for tag, st in (("750ms", slow), ("75ms", fast)):
        run.csv(f"fig7_sizes_{tag}.csv", ["t_s", "lambda_x", "lambda_y", "lambda_z"], [st.times, *st.lam.T])
        sp = st.spectra[0]
        run.csv(f"fig7_spectrum_{tag}.csv", ["freq_Hz", "log_magnitude"], [sp.frequencies, sp.log_magnitude])
        run.plot(plotting.spectrum_plot, f"fig7_spectrum_{tag}.png", sp.frequencies, sp.log_magnitude, sp.peaks,
                 st.modes, fmax=100)
        run.plot(plotting.line_plot, f"fig7_sizes_{tag}.png", st.times * 1e3,
                 {ax: st.lam[:, k] / st.lam[0, k] for k, ax in enumerate("xyz")}, "hold time [ms]",
                 "R / R(t_f)")
    run.check(acc.criterion_7(ctx, slow=slow, fast=fast))


def _fig8(run):
    ctx = run.ctx
    st = rp.dkc_study(ctx)
    H, L = np.meshgrid(st.holds / MS, st.lenses / MS, indexing="ij")
    run.csv("fig8_map.csv", ["hold_ms", "lens_ms", "T_pK"], [H, L, st.T_map / PK])
    rep = st.preset
    run.csv("fig8_widths.csv", ["t_s", "dx_m", "dy_m", "dz_m"], [rep.times, *rep.widths.T])
    run.json("fig8.json", {"preset_T_pK": rep.temperature / PK, "preset_T1d_pK": rep.temperature_1d / PK,
                           "preset_rates_um_s": rep.rates / UM, "adiabatic_T_pK": st.adiabatic.temperature / PK,
                           "best_hold_ms": st.best_plan.hold / MS, "best_lens_ms": st.best_plan.lens.duration / MS,
                           "best_T_pK": st.best.temperature / PK})
    run.plot(plotting.heatmap, "fig8.png", st.holds / MS, st.lenses / MS, st.T_map / PK, "hold [ms]", "lens [ms]",
             "T [pK]")
    run.check(acc.criterion_8(ctx, study=st))


_FIGS = {"fig3": _fig3, "fig4": _fig4, "fig5": _fig5, "fig6": _fig6, "fig7": _fig7, "fig8": _fig8}


def cmd_reproduce_figure(run):
    fig = run.args.figure
    if fig not in _FIGS:
        raise UsageError(f"unknown figure {fig!r}; expected one of {', '.join(FIGURES)}")
    _FIGS[fig](run)


COMMANDS = {
    "trap-tables": cmd_trap_tables, "design-ramp": cmd_design_ramp, "simulate-classical": cmd_simulate_classical,
    "simulate-scaling": cmd_simulate_scaling, "simulate-gpe": cmd_simulate_gpe, "analyze-modes": cmd_analyze_modes,
    "dkc-optimize": cmd_dkc_optimize, "reproduce-figure": cmd_reproduce_figure,
}


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        if args.workers < 1:
            raise UsageError("--workers must be at least 1")
        path = resolve_config_path(args.config)
        ctx = rp.Context.load(path, workers=args.workers)
        run = Run(args, ctx, path)
        COMMANDS[args.command](run)
        return run.finish()
    except (UsageError, ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except AtomChipError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
