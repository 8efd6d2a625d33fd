"""Physical constants and unit conversions used across the package.

Everything internal is SI.  Interfaces that talk to humans (config files,
CLI flags, CSV columns with a unit suffix) convert through the factors
below.
"""
from scipy import constants as _c

HBAR = _c.hbar
H_PLANCK = _c.h
K_B = _c.k
MU_0 = _c.mu_0
MU_B = _c.physical_constants["Bohr magneton"][0]
AMU = _c.atomic_mass
BOHR_RADIUS = _c.physical_constants["Bohr radius"][0]

# unit factors (multiply to get SI)
GAUSS = 1e-4
MILLIGAUSS = 1e-7
MM = 1e-3
UM = 1e-6
MS = 1e-3
US = 1e-6
PK = 1e-12

RB87_MASS = 86.909180527 * AMU
RB87_SCATTERING_LENGTH = 98.0 * BOHR_RADIUS
