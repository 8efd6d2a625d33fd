"""Atom-chip transport by shortcut to adiabaticity, condensate dynamics and delta-kick collimation."""
from .chip_model import RB87, AtomSpecies, ChipConfig, WireSegment, characterize_trap, trap_tables, z_wire
from .classical_sim import Model, integrate, perturbation_response
from .config import parse_config, preset_path
from .errors import AtomChipError, ParseError, UsageError, ValidationError
from .io import code_version
from .sequence import LensSpec, SequencePlan, optimize_hold_and_lens, run_sequence
from .sta_design import AnsatzKind, TrajectoryAnsatz, reverse_engineer

__version__ = code_version()
