"""Named scenarios built on the shipped chip configuration.

Two transports are used throughout: 0.45 -> 1.65 mm (bias 21.5 -> 4.5 G)
for the trajectory and mode studies, and 0.45 -> 1.35 mm ending in a
softer trap for the lensing sequence.  Trap tables are cached per process.
"""
from dataclasses import replace
from functools import lru_cache

from .config import parse_config, preset_path
from .chip_model import trap_tables
from .sequence import LensSpec, SequencePlan
from .sta_design import AnsatzKind, TrajectoryAnsatz, reverse_engineer


@lru_cache(maxsize=8)
def _tables(chip, species, bias_range, n_samples, tolerance):
    return trap_tables(chip, species, bias_range, n_samples, tolerance)


def load(path=None):
    """(chip, species, defaults) from ``path`` or the shipped preset."""
    return parse_config(path or preset_path())


def tables_for(chip, species, defaults, workers=1):
    if workers > 1:
        return trap_tables(chip, species, defaults.table_bias_range, defaults.table_samples,
                           defaults.table_tolerance, workers=workers)
    return _tables(chip, species, tuple(defaults.table_bias_range), defaults.table_samples,
                   defaults.table_tolerance)


def endpoints(tables, defaults):
    """(z_i, z_f) of the main transport from the configured bias values."""
    z_i = float(tables.z_at_bias(defaults.bias_start))
    z_f = float(tables.z_at_bias(defaults.bias_end))
    return z_i, z_f


def transport(tables, defaults, kind=AnsatzKind.CHIRPED, t_f=None, chirp_a=None, chirp_b=None, z_i=None,
              z_f=None, dt=None, n_steps=None):
    """Reverse-engineered schedule for one of the ansatz kinds."""
    zi0, zf0 = endpoints(tables, defaults)
    anz = TrajectoryAnsatz(kind, zi0 if z_i is None else z_i, zf0 if z_f is None else z_f,
                           defaults.ramp_time if t_f is None else t_f,
                           defaults.chirp_a if chirp_a is None else chirp_a,
                           defaults.chirp_b if chirp_b is None else chirp_b)
    f = tables.fits
    return reverse_engineer(anz, f["omega_z2"], f["bias"], n_steps=n_steps,
                            dt=defaults.dt if dt is None and n_steps is None else (dt or defaults.dt),
                            L3_fit=f["L3"])


def dkc_plan(tables, defaults, hold=None, lens=None, engine="scaling", adiabatic_weak_axis=False):
    """Transport to the softer lensing trap followed by hold, release and lens."""
    sched = transport(tables, defaults, z_f=defaults.dkc_z_final)
    spec = LensSpec(frequencies=defaults.lens_frequencies, duration=defaults.dkc_lens)
    if lens is not None:
        spec = replace(spec, duration=float(lens))
    return SequencePlan(transport=sched, hold=defaults.dkc_hold if hold is None else float(hold),
                        free1=defaults.dkc_free1, lens=spec, free2=defaults.dkc_free2, engine=engine,
                        adiabatic_weak_axis=adiabatic_weak_axis)
