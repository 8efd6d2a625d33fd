"""Reading chip, species and run defaults from an INI-style file.

Sections may be nested with dots (``[chip.z]``).  Every key is checked
against a schema; unknown sections or keys are rejected with their line
and column.  Values are given in lab units (mm, A, G, ms) and converted to
SI here.
"""
import configparser
import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .chip_model import AtomSpecies, ChipConfig, WireSegment, z_wire
from .constants import AMU, BOHR_RADIUS, GAUSS, MM, MS, US
from .errors import ParseError, ValidationError

CONFIG_ENV = "ATOMCHIP_STA_CONFIG"
PRESET = "quantus_z.cfg"

_AXES = {"x": (1.0, 0.0, 0.0), "y": (0.0, 1.0, 0.0), "z": (0.0, 0.0, 1.0),
         "-x": (-1.0, 0.0, 0.0), "-y": (0.0, -1.0, 0.0), "-z": (0.0, 0.0, -1.0)}

# section -> {key: kind}; kinds: float, int, str, vec
SCHEMA = {
    "chip": {"layout": "str", "current_A": "float", "bias_axis": "str", "bias_G": "float"},
    "chip.z": {"center_mm": "float", "lead_mm": "float"},
    "segment": {"start_mm": "vec", "end_mm": "vec", "current_A": "float"},
    "species": {"name": "str", "mass_amu": "float", "g_F": "float", "m_F": "float",
                "scattering_length_a0": "float", "atom_number": "float"},
    "tables": {"bias_min_G": "float", "bias_max_G": "float", "samples": "int", "tolerance": "float"},
    "transport": {"bias_start_G": "float", "bias_end_G": "float", "ramp_ms": "float", "chirp_a": "float",
                  "chirp_b": "float", "dt_us": "float"},
    "dkc": {"z_final_mm": "float", "hold_ms": "float", "free1_ms": "float", "lens_ms": "float",
            "free2_ms": "float", "lens_Hz": "vec"},
}


@dataclass(frozen=True)
class RunDefaults:
    """Run parameters in SI units."""
    table_bias_range: tuple = (4.0 * GAUSS, 23.0 * GAUSS)
    table_samples: int = 60
    table_tolerance: float = 1e-4
    bias_start: float = 21.5 * GAUSS
    bias_end: float = 4.5 * GAUSS
    ramp_time: float = 75 * MS
    chirp_a: float = -1.37
    chirp_b: float = 0.780
    dt: float = 10 * US
    dkc_z_final: float = 1.35 * MM
    dkc_hold: float = 31.4 * MS
    dkc_free1: float = 100 * MS
    dkc_lens: float = 4.84 * MS
    dkc_free2: float = 300 * MS
    lens_frequencies: tuple = (1.7, 7.2, 7.2)


def _schema_for(section):
    if section.startswith("segment.") or section == "segment":
        return SCHEMA["segment"]
    return SCHEMA.get(section)


def _locate(text):
    """(section, key) -> (line, column) for every key in ``text``; also section lines."""
    where, sections = {}, {}
    section = None
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        if line.startswith("["):
            section = line.strip("[] ")
            sections[section] = (i, raw.index("[") + 1)
            continue
        for sep in ("=", ":"):
            if sep in line:
                key = line.split(sep, 1)[0].strip()
                where[(section, key.lower())] = (i, raw.index(key) + 1)
                break
    return where, sections


def _convert(kind, value, loc, path):
    try:
        if kind == "float":
            return float(value)
        if kind == "int":
            return int(value)
        if kind == "vec":
            parts = [float(v) for v in value.replace(";", ",").split(",") if v.strip()]
            return np.array(parts)
        return value.strip()
    except ValueError:
        raise ParseError(f"cannot read {value!r} as {kind}", loc[0], loc[1], path) from None


def read_sections(text, path=None):
    """Parse and type-check ``text``; returns {section: {key: value}}."""
    if not text.strip():
        raise ParseError("configuration is empty", 1, 1, path)
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=str(path) if path else "<config>")
    except configparser.MissingSectionHeaderError as exc:
        raise ParseError("key outside of any [section]", exc.lineno, 1, path) from None
    except configparser.DuplicateSectionError as exc:
        raise ParseError(f"duplicate section [{exc.section}]", exc.lineno, 1, path) from None
    except configparser.DuplicateOptionError as exc:
        raise ParseError(f"duplicate key {exc.option!r} in [{exc.section}]", exc.lineno, 1, path) from None
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ParseError(f"cannot parse {line.strip()!r}", lineno, 1, path) from None
    where, sections = _locate(text)
    out = {}
    for sec in parser.sections():
        schema = _schema_for(sec)
        if schema is None:
            line, col = sections.get(sec, (None, None))
            raise ParseError(f"unknown section [{sec}]", line, col, path)
        lower = {k.lower(): k for k in schema}
        vals = {}
        for key, value in parser.items(sec):
            loc = where.get((sec, key.lower()), (None, None))
            if key.lower() not in lower:
                raise ParseError(f"unknown key {key!r} in [{sec}]", loc[0], loc[1], path)
            name = lower[key.lower()]
            vals[name] = _convert(schema[name], value, loc, path)
        out[sec] = vals
    return out


def _chip(sections):
    chip = sections.get("chip", {})
    current = chip.get("current_A", 5.0)
    bias = chip.get("bias_G", 21.5)
    if bias < 0:
        raise ValidationError("chip.bias_G: bias magnitude must be nonnegative")
    if not np.isfinite(current):
        raise ValidationError("chip.current_A: wire current must be finite")
    axis = chip.get("bias_axis", "y").lower()
    if axis not in _AXES:
        raise ValidationError(f"chip.bias_axis: expected one of {sorted(_AXES)}")
    layout = chip.get("layout", "z").lower()
    try:
        if layout == "z":
            z = sections.get("chip.z", {})
            center, lead = z.get("center_mm", 4.0), z.get("lead_mm", 16.0)
            if center <= 0 or lead <= 0:
                raise ValidationError("chip.z: segment lengths must be positive")
            base = z_wire(current, center * MM, lead * MM, bias * GAUSS)
            return ChipConfig(base.segments, _AXES[axis], bias * GAUSS)
        if layout == "segments":
            names = sorted((s for s in sections if s.startswith("segment")),
                           key=lambda s: int(s.split(".", 1)[1]) if "." in s else 0)
            if not names:
                raise ValidationError("layout = segments needs [segment.N] sections")
            segs = []
            for n in names:
                s = sections[n]
                for k in ("start_mm", "end_mm"):
                    if k not in s or len(s[k]) != 3:
                        raise ValidationError(f"{n}.{k}: need three coordinates")
                segs.append(WireSegment(s["start_mm"] * MM, s["end_mm"] * MM, s.get("current_A", current)))
            return ChipConfig(tuple(segs), _AXES[axis], bias * GAUSS)
    except ValueError as exc:
        raise ValidationError(f"chip: {exc}") from None
    raise ValidationError(f"chip.layout: unknown layout {layout!r} (z or segments)")


def _species(sections):
    s = sections.get("species", {})
    kw = {}
    if "mass_amu" in s:
        kw["mass"] = s["mass_amu"] * AMU
    if "g_F" in s:
        kw["g_F"] = s["g_F"]
    if "m_F" in s:
        kw["m_F"] = s["m_F"]
    if "scattering_length_a0" in s:
        kw["a_s"] = s["scattering_length_a0"] * BOHR_RADIUS
    if "atom_number" in s:
        kw["atom_number"] = s["atom_number"]
    if "name" in s:
        kw["name"] = s["name"]
    try:
        return AtomSpecies(**kw)
    except ValueError as exc:
        raise ValidationError(f"species: {exc}") from None


def _defaults(sections):
    t = sections.get("tables", {})
    tr = sections.get("transport", {})
    d = sections.get("dkc", {})
    base = RunDefaults()
    lo = t.get("bias_min_G", base.table_bias_range[0] / GAUSS)
    hi = t.get("bias_max_G", base.table_bias_range[1] / GAUSS)
    if not 0 < lo < hi:
        raise ValidationError("tables: need 0 < bias_min_G < bias_max_G")
    lens = tuple(float(f) for f in d.get("lens_Hz", base.lens_frequencies))
    if len(lens) != 3 or min(lens) <= 0:
        raise ValidationError("dkc.lens_Hz: need three positive frequencies")
    out = RunDefaults(
        table_bias_range=(lo * GAUSS, hi * GAUSS),
        table_samples=t.get("samples", base.table_samples),
        table_tolerance=t.get("tolerance", base.table_tolerance),
        bias_start=tr.get("bias_start_G", base.bias_start / GAUSS) * GAUSS,
        bias_end=tr.get("bias_end_G", base.bias_end / GAUSS) * GAUSS,
        ramp_time=tr.get("ramp_ms", base.ramp_time / MS) * MS,
        chirp_a=tr.get("chirp_a", base.chirp_a),
        chirp_b=tr.get("chirp_b", base.chirp_b),
        dt=tr.get("dt_us", base.dt / US) * US,
        dkc_z_final=d.get("z_final_mm", base.dkc_z_final / MM) * MM,
        dkc_hold=d.get("hold_ms", base.dkc_hold / MS) * MS,
        dkc_free1=d.get("free1_ms", base.dkc_free1 / MS) * MS,
        dkc_lens=d.get("lens_ms", base.dkc_lens / MS) * MS,
        dkc_free2=d.get("free2_ms", base.dkc_free2 / MS) * MS,
        lens_frequencies=lens,
    )
    for name in ("ramp_time", "dt", "dkc_hold", "dkc_free1", "dkc_lens", "dkc_free2"):
        if getattr(out, name) < 0:
            raise ValidationError(f"{name} must be nonnegative")
    if out.ramp_time <= 0 or out.dt <= 0:
        raise ValidationError("transport: ramp_ms and dt_us must be positive")
    if out.bias_start < 0 or out.bias_end < 0:
        raise ValidationError("transport: bias values must be nonnegative")
    return out


def parse_config_text(text, path=None):
    sections = read_sections(text, path)
    return _chip(sections), _species(sections), _defaults(sections)


def parse_config(path):
    """Read ``path`` and return (ChipConfig, AtomSpecies, RunDefaults)."""
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ParseError("file not found", path=p) from None
    return parse_config_text(text, p)


def preset_path(name=PRESET):
    return Path(str(resources.files("atomchip_sta") / "data" / name))


def resolve_config_path(explicit=None):
    """Explicit path, else $ATOMCHIP_STA_CONFIG, else the shipped preset."""
    if explicit:
        return Path(explicit)
    env = os.environ.get(CONFIG_ENV)
    if env:
        return Path(env)
    return preset_path()
