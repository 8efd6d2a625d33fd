"""Three-dimensional Gross-Pitaevskii solver in a moving, dilating frame.

The lab wavefunction is written as

    psi(R, t) = exp(i[K_a . R' + phi_a]) Pi^(-1/2) exp(i S) phi(rho, t)
    R' = R - R_a(t),   rho_a = R'_a / lambda_a(t),   Pi = lambda_x lambda_y lambda_z
    S = sum_a m lambda_a' R'_a^2 / (2 hbar lambda_a)

R_a(t) is a classical center-of-mass trajectory and lambda(t) any smooth
positive scaling (in practice the scaling-law solution), so the grid in
rho follows both the motion and the shape of the cloud.  phi obeys

    i hbar d_t phi = [ -sum hbar^2 d_rho^2 / (2 m lambda^2) + V_a(R_a + lambda rho)
                       + m R_a'' . lambda rho + (m/2) sum lambda lambda'' rho^2
                       + m |R_a'|^2 + g N |phi|^2 / Pi ] phi

which is exact for any R_a(t), lambda(t).  With lambda = 1 it reduces to
the plain co-moving frame.  Time stepping is Strang splitting with the
kinetic part in Fourier space.  The wavefunction is unit normalized and
the atom number enters through g N.
"""
import struct
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from scipy import fft as sfft
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import CubicHermiteSpline, CubicSpline

from .constants import HBAR
from .errors import GridOverflow, NotConverged

OUTPUT_EVERY = 0.5e-3
BOUNDARY_LIMIT = 1e-6
GRID_COVER = 6.0
DT_MAX = 50e-6


class PotentialMode(str, Enum):
    HARMONIC = "harmonic"
    ANHARMONIC = "anharmonic"
    ROTATING = "rotating"


def _is_pow2(n):
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True, eq=False)
class GridSpec:
    n: tuple
    extent: tuple
    center: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        n = tuple(int(v) for v in self.n)
        if len(n) != 3 or any(v < 16 or not _is_pow2(v) for v in n):
            raise ValueError("grid sizes must be powers of two, at least 16")
        ext = tuple(float(v) for v in self.extent)
        if len(ext) != 3 or min(ext) <= 0:
            raise ValueError("grid extents must be positive")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "extent", ext)
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @classmethod
    def for_cloud(cls, radii, n, factor=8.0):
        return cls(n, tuple(factor * float(r) for r in radii))

    @property
    def spacing(self):
        return tuple(L / n for L, n in zip(self.extent, self.n))

    @property
    def dV(self):
        return float(np.prod(self.spacing))

    def axis(self, k):
        n, d = self.n[k], self.spacing[k]
        return self.center[k] + (np.arange(n) - n // 2) * d

    def axes(self):
        return [self.axis(k) for k in range(3)]

    def wavenumbers(self, k):
        return 2 * np.pi * np.fft.fftfreq(self.n[k], self.spacing[k])

    def covers(self, radii, factor=GRID_COVER):
        return all(L >= factor * r for L, r in zip(self.extent, radii))

    def scaled(self, lam, center=(0.0, 0.0, 0.0)):
        return GridSpec(self.n, tuple(L * l for L, l in zip(self.extent, lam)), center)


@dataclass(frozen=True, eq=False)
class WaveFunction:
    grid: GridSpec
    amplitudes: np.ndarray

    @property
    def norm(self):
        a = self.amplitudes
        return float(np.sum(a.real ** 2 + a.imag ** 2) * self.grid.dV)

    def density(self):
        a = self.amplitudes
        return a.real ** 2 + a.imag ** 2

    def normalized(self):
        return replace(self, amplitudes=self.amplitudes / np.sqrt(self.norm))


def moments(psi):
    """First and second moments of |psi|^2 on its grid.

    Returns (mean (3,), cov (3, 3)).  Sums are reduced in a fixed order.
    """
    rho = psi.density()
    dV = psi.grid.dV
    xs = psi.grid.axes()
    px = rho.sum(axis=(1, 2)) * dV
    py = rho.sum(axis=(0, 2)) * dV
    pz = rho.sum(axis=(0, 1)) * dV
    norm = px.sum()
    mean = np.array([px @ xs[0], py @ xs[1], pz @ xs[2]]) / norm
    var = np.array([px @ (xs[0] - mean[0]) ** 2, py @ (xs[1] - mean[1]) ** 2,
                    pz @ (xs[2] - mean[2]) ** 2]) / norm
    pxy = rho.sum(axis=2) * dV
    pxz = rho.sum(axis=1) * dV
    pyz = rho.sum(axis=0) * dV
    dx, dy, dz = (xs[0] - mean[0]), (xs[1] - mean[1]), (xs[2] - mean[2])
    cxy = dx @ pxy @ dy / norm
    cxz = dx @ pxz @ dz / norm
    cyz = dy @ pyz @ dz / norm
    cov = np.array([[var[0], cxy, cxz], [cxy, var[1], cyz], [cxz, cyz, var[2]]])
    return mean, cov


def combine_rotated(var_X, var_Y, cov_XY, var_Z, theta):
    """Widths along axes rotated by ``theta`` in the (X, Y) plane."""
    c, s = np.cos(theta), np.sin(theta)
    dx2 = var_X * c * c + 2 * cov_XY * c * s + var_Y * s * s
    dy2 = var_X * s * s - 2 * cov_XY * c * s + var_Y * c * c
    return np.sqrt(dx2), np.sqrt(dy2), np.sqrt(var_Z)


def rotated_widths(psi, theta):
    """(dx, dy, dz) of psi along the trap eigen-axes tilted by ``theta``."""
    _, cov = moments(psi)
    return combine_rotated(cov[0, 0], cov[1, 1], cov[0, 1], cov[2, 2], theta)


@dataclass(frozen=True, eq=False)
class FrameTransform:
    """Moving frame along a classical trajectory, sampled at ``times``.

    Interpolated with a cubic Hermite spline through positions and
    velocities; the frame acceleration is the spline's second derivative so
    the frame is self-consistent.
    """
    times: np.ndarray
    R_a: np.ndarray      # (n, 3)
    K_a: np.ndarray      # (n, 3)
    phi_a: np.ndarray    # (n,)
    mass: float

    def __post_init__(self):
        v = self.K_a * HBAR / self.mass
        object.__setattr__(self, "_spl", CubicHermiteSpline(self.times, self.R_a, v, axis=0))

    @classmethod
    def from_trajectory(cls, times, positions, velocities, mass):
        times = np.asarray(times, dtype=float)
        R = np.asarray(positions, dtype=float)
        V = np.asarray(velocities, dtype=float)
        if R.ndim == 1:
            R = np.column_stack([np.zeros_like(R), np.zeros_like(R), R])
            V = np.column_stack([np.zeros_like(V), np.zeros_like(V), V])
        K = mass * V / HBAR
        phi = cumulative_trapezoid(0.5 * mass * np.sum(V ** 2, axis=1) / HBAR, times, initial=0.0)
        return cls(times, R, K, phi, mass)

    @classmethod
    def static(cls, position, mass, t_end=1.0):
        t = np.array([0.0, t_end])
        R = np.tile(np.asarray(position, dtype=float), (2, 1))
        return cls(t, R, np.zeros((2, 3)), np.zeros(2), mass)

    def _clip(self, t):
        return np.clip(t, self.times[0], self.times[-1])

    def position(self, t):
        t = float(t)
        if t > self.times[-1]:
            # ballistic continuation past the sampled window
            return self._spl(self.times[-1]) + self.velocity(t) * (t - self.times[-1])
        return self._spl(self._clip(t))

    def velocity(self, t):
        return self._spl(self._clip(float(t)), 1)

    def acceleration(self, t):
        if float(t) > self.times[-1]:
            return np.zeros(3)
        return self._spl(self._clip(float(t)), 2)

    def wavevector(self, t):
        return self.mass * self.velocity(t) / HBAR

    def phase(self, t):
        t = float(t)
        base = float(np.interp(min(t, self.times[-1]), self.times, self.phi_a))
        if t > self.times[-1]:
            v = self.velocity(t)
            base += 0.5 * self.mass * float(v @ v) * (t - self.times[-1]) / HBAR
        return base


@dataclass(frozen=True, eq=False)
class Dilation:
    """Scale factors lambda(t) on a time grid, spline interpolated."""
    times: np.ndarray
    lam: np.ndarray      # (n, 3)

    def __post_init__(self):
        object.__setattr__(self, "_spl", CubicSpline(self.times, self.lam, axis=0))

    @classmethod
    def identity(cls, t_end):
        return cls(np.array([0.0, 0.5 * t_end, t_end]), np.ones((3, 3)))

    @classmethod
    def from_series(cls, series, stride=1):
        t = series.times[::stride]
        lam = series.lam[::stride]
        if t[-1] != series.times[-1]:
            t = np.append(t, series.times[-1])
            lam = np.vstack([lam, series.lam[-1]])
        return cls(t, lam)

    def __call__(self, t, nu=0):
        return self._spl(float(t), nu)


@dataclass(frozen=True)
class TrapState:
    """Trap parameters at one instant; ``free`` switches the potential off."""
    omega: tuple = (0.0, 0.0, 0.0)
    z_t: float = 0.0
    L3: float = np.inf
    theta: float = 0.0
    free: bool = False


class PotentialModel:
    """Time-dependent trap description for the GPE.

    Built from a sequence of segments, each either a transport ramp
    (parameters from the trap tables along z_t(t)), a frozen trap, free
    flight, or a harmonic lens centered on the frame.  ``mode`` controls
    which terms are active: harmonic uses the eigenfrequencies on the lab
    axes, anharmonic adds the cubic term, rotating also tilts the
    transverse axes by theta(t).
    """

    def __init__(self, mode, segments):
        self.mode = PotentialMode(mode)
        self.segments = list(segments)
        self.switch_times = np.cumsum([0.0] + [s[1] for s in self.segments])

    @classmethod
    def transport(cls, mode, schedule, tables, hold=0.0):
        segs = [("ramp", schedule.t_f, (schedule, tables))]
        if hold > 0:
            segs.append(("frozen", hold, cls._frozen_state(schedule.z_f, tables)))
        return cls(mode, segs)

    @staticmethod
    def _frozen_state(z, tables):
        return TrapState(omega=tuple(tables.omegas(z)), z_t=float(z), L3=float(tables.L3_at(z)),
                         theta=float(tables.theta_at(z)))

    def then_frozen(self, duration, z, tables):
        self.segments.append(("frozen", duration, self._frozen_state(z, tables)))
        self.switch_times = np.append(self.switch_times, self.switch_times[-1] + duration)
        return self

    def then_free(self, duration):
        self.segments.append(("free", duration, TrapState(free=True)))
        self.switch_times = np.append(self.switch_times, self.switch_times[-1] + duration)
        return self

    def then_lens(self, duration, omega):
        self.segments.append(("lens", duration, TrapState(omega=tuple(omega))))
        self.switch_times = np.append(self.switch_times, self.switch_times[-1] + duration)
        return self

    @property
    def duration(self):
        return float(self.switch_times[-1])

    def segment_index(self, t):
        k = int(np.searchsorted(self.switch_times, t, side="right")) - 1
        return min(max(k, 0), len(self.segments) - 1)

    def raw_state(self, t):
        k = self.segment_index(t)
        kind, _, data = self.segments[k]
        if kind != "ramp":
            return kind, data
        schedule, tables = data
        tl = min(max(t - self.switch_times[k], 0.0), schedule.t_f)
        z = float(np.interp(tl, schedule.times, schedule.z_t)) if len(schedule.times) < 4 else \
            float(_spline_cache(schedule)(tl))
        return kind, TrapState(omega=tuple(tables.omegas(z)), z_t=z, L3=float(tables.L3_at(z)),
                               theta=float(tables.theta_at(z)))

    def state(self, t):
        """Trap parameters with inactive terms neutralized for this mode."""
        kind, st = self.raw_state(t)
        if kind in ("free", "lens"):
            return kind, st
        if self.mode is PotentialMode.HARMONIC:
            st = replace(st, L3=np.inf, theta=0.0)
        elif self.mode is PotentialMode.ANHARMONIC:
            st = replace(st, theta=0.0)
        return kind, st


_SPLINES = {}


def _spline_cache(schedule):
    key = id(schedule)
    hit = _SPLINES.get(key)
    if hit is None or hit[0] is not schedule:
        hit = (schedule, CubicSpline(schedule.times, schedule.z_t))
        _SPLINES[key] = hit
    return hit[1]


def potential_terms(grid, mass, state, kind, frame_pos, frame_acc, lam, lam_ddot):
    """Potential on the rho grid as separable pieces plus an XY cross term.

    Returns (ux, uy, uz, uxy) with uxy None when absent.  ``frame_pos`` is
    the frame origin R_a; ``lam_ddot`` the second derivative of lambda.
    """
    rx, ry, rz = grid.axes()
    lx, ly, lz = lam
    half_m = 0.5 * mass
    # dilation term is present in every segment
    ux = half_m * lx * lam_ddot[0] * rx ** 2
    uy = half_m * ly * lam_ddot[1] * ry ** 2
    uz = half_m * lz * lam_ddot[2] * rz ** 2
    uxy = None
    # frame acceleration term m R_a'' . R'
    ux = ux + mass * frame_acc[0] * lx * rx
    uy = uy + mass * frame_acc[1] * ly * ry
    uz = uz + mass * frame_acc[2] * lz * rz
    if kind == "free":
        return ux, uy, uz, uxy
    X = frame_pos[0] + lx * rx
    Y = frame_pos[1] + ly * ry
    wx2, wy2, wz2 = (w * w for w in state.omega)
    if kind == "lens":
        Z = lz * rz
        return (ux + half_m * wx2 * (lx * rx) ** 2, uy + half_m * wy2 * (ly * ry) ** 2,
                uz + half_m * wz2 * Z ** 2, uxy)
    c, s = np.cos(state.theta), np.sin(state.theta)
    wX2 = wx2 * c * c + wy2 * s * s
    wY2 = wx2 * s * s + wy2 * c * c
    wXY = (wx2 - wy2) * c * s
    d = (frame_pos[2] - state.z_t) + lz * rz
    ux = ux + half_m * wX2 * X ** 2
    uy = uy + half_m * wY2 * Y ** 2
    uz = uz + half_m * wz2 * d ** 2 * (1.0 + 2.0 * d / (3.0 * state.L3))
    if wXY != 0.0:
        uxy = mass * wXY * np.outer(X, Y)
    return ux, uy, uz, uxy


def assemble(ux, uy, uz, uxy, scalar=0.0):
    U = ux[:, None, None] + uy[None, :, None] + uz[None, None, :]
    if uxy is not None:
        U = U + uxy[:, :, None]
    if scalar:
        U = U + scalar
    return U


def potential_array(grid, mass, model, t, frame, dilation):
    """Full potential U(rho, t) as used by the propagator (for inspection/tests)."""
    kind, st = model.state(t)
    terms = potential_terms(grid, mass, st, kind, frame.position(t), frame.acceleration(t),
                            dilation(t), dilation(t, 2))
    v = frame.velocity(t)
    return assemble(*terms, scalar=mass * float(v @ v))


def interaction_strength(species):
    return 4 * np.pi * HBAR ** 2 * species.a_s / species.mass * species.atom_number


class _Stepper:
    def __init__(self, grid, mass, gN, fft_workers=1):
        self.grid = grid
        self.mass = mass
        self.gN = gN
        self.k2 = [grid.wavenumbers(k) ** 2 for k in range(3)]
        self.workers = fft_workers

    def fftn(self, a):
        return sfft.fftn(a, workers=self.workers, overwrite_x=True)

    def ifftn(self, a):
        return sfft.ifftn(a, workers=self.workers, overwrite_x=True)

    def kinetic_exponent(self, lam):
        c = HBAR / (2 * self.mass)
        kx, ky, kz = (c * k2 / (l * l) for k2, l in zip(self.k2, lam))
        return kx, ky, kz

    def kinetic_factor(self, lam, tau, imaginary=False):
        ex, ey, ez = (np.exp(-tau * e) if imaginary else np.exp(-1j * tau * e)
                      for e in self.kinetic_exponent(lam))
        return ex[:, None, None] * ey[None, :, None] * ez[None, None, :]


def _density(a):
    return a.real ** 2 + a.imag ** 2


def _kick(a, theta, buf):
    # a *= exp(i theta); cos/sin is cheaper than a complex exponential
    np.cos(theta, out=buf.real)
    np.sin(theta, out=buf.imag)
    a *= buf


def energy_components(psi_rho, stepper, U_lab, lam, lam_dot, K, pi_):
    """Lab-frame (kinetic, potential, interaction) energies [J].

    ``U_lab`` is the lab trap potential on the rho grid (no frame terms).
    """
    grid = psi_rho.grid
    a = psi_rho.amplitudes
    dV = grid.dV
    rho = _density(a)
    m = stepper.mass
    e_int = 0.5 * stepper.gN / pi_ * float(np.sum(rho * rho)) * dV
    e_pot = float(np.sum(U_lab * rho)) * dV
    ak = stepper.fftn(a.copy())
    e_kin = 0.0
    xs = grid.axes()
    for ax in range(3):
        shape = [1, 1, 1]
        shape[ax] = -1
        kk = grid.wavenumbers(ax).reshape(shape)
        da = stepper.ifftn(1j * kk * ak)
        q = (K[ax] + m * xs[ax] * lam_dot[ax] / HBAR).reshape(shape)
        t1 = float(np.sum(q * q * rho)) * dV
        t2 = float(np.sum(_density(da))) * dV / lam[ax] ** 2
        t3 = 2.0 / lam[ax] * float(np.sum(q * np.imag(np.conj(a) * da))) * dV
        e_kin += HBAR ** 2 / (2 * m) * (t1 + t2 + t3)
    return e_kin, e_pot, e_int


def _lab_potential(grid, mass, model, t, frame, lam):
    # trap potential only (no frame or dilation terms)
    kind, st = model.state(t)
    zero = np.zeros(3)
    terms = potential_terms(grid, mass, st, kind, frame.position(t), zero, lam, zero)
    return assemble(*terms)


def thomas_fermi_guess(grid, mass, omega, gN):
    """Thomas-Fermi profile for a harmonic trap on ``grid`` (unit norm)."""
    omega = np.asarray(omega, dtype=float)
    wbar = np.prod(omega) ** (1 / 3)
    mu = 0.5 * (15 * gN * mass ** 1.5 * wbar ** 3 / (8 * np.pi * np.sqrt(2))) ** 0.4
    x, y, z = grid.axes()
    V = 0.5 * mass * (omega[0] ** 2 * x[:, None, None] ** 2 + omega[1] ** 2 * y[None, :, None] ** 2
                      + omega[2] ** 2 * z[None, None, :] ** 2)
    n = np.maximum(mu - V, 0.0) / gN if gN > 0 else np.zeros_like(V)
    if not np.any(n > 0):
        # ideal-gas Gaussian
        s = [np.sqrt(HBAR / (2 * mass * w)) for w in omega]
        n = np.exp(-x[:, None, None] ** 2 / (2 * s[0] ** 2) - y[None, :, None] ** 2 / (2 * s[1] ** 2)
                   - z[None, None, :] ** 2 / (2 * s[2] ** 2))
    psi = WaveFunction(grid, np.sqrt(n).astype(complex))
    return psi.normalized()


@dataclass(frozen=True, eq=False)
class GroundStateResult:
    psi: WaveFunction
    mu: float
    energy: float
    energies: tuple          # (kin, pot, int)
    iterations: int
    energy_history: np.ndarray


def ground_state(grid, species, model, frame=None, guess=None, dtau_ladder=(200e-6, 100e-6, 50e-6, 20e-6,
                 10e-6, 5e-6), tol=1e-10, max_iter=40000, check_every=50, fft_workers=1, gN=None):
    """Imaginary-time ground state of the trap at t = 0.

    Starts from the Thomas-Fermi profile and walks down a ladder of
    imaginary time steps; at each rung it iterates until the chemical
    potential (read from the norm decay) changes by less than ``tol``
    relative per step.  The full energy is checked every ``check_every``
    steps; if it ever increases the step is halved and the walk restarts
    from the last accepted state.
    """
    mass = species.mass
    gN = interaction_strength(species) if gN is None else gN
    kind, st = model.state(0.0)
    if kind != "ramp" and kind != "frozen":
        raise ValueError("ground state needs a confining trap at t = 0")
    if frame is None:
        frame = FrameTransform.static((0.0, 0.0, st.z_t), mass)
    lam = np.ones(3)
    zero = np.zeros(3)
    stepper = _Stepper(grid, mass, gN, fft_workers)
    terms = potential_terms(grid, mass, st, kind, frame.position(0.0), frame.acceleration(0.0), lam, zero)
    U = assemble(*terms)
    U_lab = _lab_potential(grid, mass, model, 0.0, frame, lam)
    psi = guess if guess is not None else thomas_fermi_guess(grid, mass, st.omega, gN)
    a = psi.amplitudes.astype(complex).copy()
    dV = grid.dV
    history = []
    K0 = np.zeros(3)

    def energy(a):
        return energy_components(WaveFunction(grid, a), stepper, U_lab, lam, zero, K0, 1.0)

    e_last = sum(energy(a))
    history.append(e_last)
    it = 0
    mu = np.nan
    ladder = list(dtau_ladder)
    level = 0
    while level < len(ladder):
        dtau = ladder[level]
        kin = stepper.kinetic_factor(lam, dtau, imaginary=True)
        checkpoint = a.copy()
        mu_prev = None
        converged = False
        restarted = False
        local = 0
        while it < max_iter:
            # renormalize before each nonlinear kick so the fixed point carries no O(dtau) bias
            a *= np.exp(-0.5 * dtau / HBAR * (U + gN * _density(a)))
            a = stepper.ifftn(stepper.fftn(a) * kin)
            n1 = float(np.sum(_density(a))) * dV
            a /= np.sqrt(n1)
            a *= np.exp(-0.5 * dtau / HBAR * (U + gN * _density(a)))
            n2 = float(np.sum(_density(a))) * dV
            a /= np.sqrt(n2)
            mu = -HBAR * np.log(n1 * n2) / (2 * dtau)
            it += 1
            local += 1
            if mu_prev is not None and abs(mu - mu_prev) <= tol * abs(mu):
                converged = True
            mu_prev = mu
            if local % check_every == 0 or converged:
                e = sum(energy(a))
                if e > e_last * (1 + 1e-13):
                    # energy went up: halve this rung and restart from checkpoint
                    a = checkpoint
                    ladder.insert(level + 1, dtau / 2)
                    restarted = True
                    break
                e_last = e
                history.append(e)
                checkpoint = a.copy()
            if converged:
                break
        if restarted:
            level += 1
            continue
        if not converged:
            raise NotConverged(f"imaginary-time iteration did not converge in {max_iter} steps")
        level += 1
    ek, ep, ei = energy(a)
    mu_true = ek + ep + 2 * ei
    return GroundStateResult(psi=WaveFunction(grid, a), mu=mu_true, energy=ek + ep + ei,
                             energies=(ek, ep, ei), iterations=it, energy_history=np.array(history))


@dataclass(frozen=True, eq=False)
class GPEResult:
    times: np.ndarray
    com: np.ndarray             # (n, 3) lab center of mass
    widths: np.ndarray          # (n, 3) lab widths along X, Y, Z
    cov_xy: np.ndarray          # (n,)
    rotated: np.ndarray         # (n, 3) widths along the tilted trap axes
    norm: np.ndarray
    energy: np.ndarray
    psi: WaveFunction           # final state on the rho grid
    snapshots: list = field(default_factory=list)
    steps: int = 0


def _observe(a, grid, frame, dilation, t):
    psi = WaveFunction(grid, a)
    mean, cov = moments(psi)
    lam = dilation(t)
    com = frame.position(t) + lam * mean
    var = np.diag(cov) * lam ** 2
    cxy = cov[0, 1] * lam[0] * lam[1]
    return com, var, cxy, psi.norm


def _boundary_fraction(a):
    rho = _density(a)
    peak = np.max(rho)
    edge = max(np.max(rho[:2]), np.max(rho[-2:]), np.max(rho[:, :2]), np.max(rho[:, -2:]),
               np.max(rho[:, :, :2]), np.max(rho[:, :, -2:]))
    return edge / peak


def propagate(psi, species, model, frame, dilation=None, t_span=None, dt=4e-6, dt_free=None,
              output_every=OUTPUT_EVERY, snapshot_times=(), fft_workers=1, gN=None, check_energy=True,
              check_boundary=True, adaptive=True, dt_max=DT_MAX):
    """Real-time Strang propagation of ``psi`` (given on the rho grid at t_span[0]).

    Each step: half potential+nonlinear kick, full kinetic drift, half
    kick, all evaluated at the step midpoint.  Steps never straddle a
    segment switch of ``model``.  Observables are recorded every
    ``output_every`` seconds in the lab frame.

    ``dt`` is the step at unit dilation.  With ``adaptive`` the step in
    trapped segments is dt * Pi(t), capped at ``dt_max``, which keeps
    dt * mu_frame / hbar fixed as the cloud decompresses.  Free-flight
    segments use ``dt_free`` when given.
    """
    mass = species.mass
    gN = interaction_strength(species) if gN is None else gN
    t0, t1 = (0.0, model.duration) if t_span is None else (float(t_span[0]), float(t_span[1]))
    if dilation is None:
        dilation = Dilation.identity(max(t1, 1e-9))
    grid = psi.grid
    stepper = _Stepper(grid, mass, gN, fft_workers)
    a = psi.amplitudes.astype(complex).copy()
    dV = grid.dV

    # breakpoints: segment switches and output times
    switches = [s for s in model.switch_times if t0 < s < t1]
    n_out = int(round((t1 - t0) / output_every))
    outs = [t0 + k * output_every for k in range(n_out + 1)]
    if outs[-1] < t1 - 1e-12:
        outs.append(t1)
    marks = sorted(set([round(x, 12) for x in switches + outs + list(snapshot_times)] + [t1]))
    marks = [m for m in marks if t0 < m <= t1 + 1e-15]

    times, coms, vars_, cxys, norms, energies, snaps = [], [], [], [], [], [], []

    def record(t):
        com, var, cxy, nrm = _observe(a, grid, frame, dilation, t)
        times.append(t)
        coms.append(com)
        vars_.append(var)
        cxys.append(cxy)
        norms.append(nrm)
        if check_energy:
            lam = dilation(t)
            U_lab = _lab_potential(grid, mass, model, t, frame, lam)
            e = energy_components(WaveFunction(grid, a), stepper, U_lab, lam, dilation(t, 1),
                                  frame.wavevector(t), float(np.prod(lam)))
            energies.append(sum(e))
        else:
            energies.append(np.nan)
        if check_boundary and _boundary_fraction(a) > BOUNDARY_LIMIT:
            raise GridOverflow(f"density at the grid boundary exceeds {BOUNDARY_LIMIT:g} of the peak at t={t:.6g}")

    def midpoint(tm):
        kind, st = model.state(tm)
        lam = dilation(tm)
        terms = potential_terms(grid, mass, st, kind, frame.position(tm), frame.acceleration(tm), lam,
                                dilation(tm, 2))
        v = frame.velocity(tm)
        return assemble(*terms, scalar=mass * float(v @ v)), gN / float(np.prod(lam)), lam

    ph_scale = -0.5 / HBAR
    buf = np.empty(grid.n, dtype=complex)
    record(t0)
    t = t0
    steps = 0
    out_set = set(round(x, 12) for x in outs)
    snap_set = set(round(x, 12) for x in snapshot_times)
    for mark in marks:
        span = mark - t
        if span <= 1e-15:
            continue
        kind, _ = model.state(t + 0.5 * span)
        if kind == "free" and dt_free:
            h_nom = dt_free
        else:
            # the frame chemical potential falls as 1/Pi, so the step may grow with it
            pi_min = min(float(np.prod(dilation(t))), float(np.prod(dilation(mark))))
            h_nom = dt * min(max(pi_min, 1.0), dt_max / dt) if adaptive else dt
        n = max(int(np.ceil(span / h_nom - 1e-9)), 1)
        h = span / n
        # adjacent half kicks share the same density (a kick leaves |a|^2
        # unchanged), so they are fused into one phase evaluation per step
        U, c, lam = midpoint(t + 0.5 * h)
        theta = ph_scale * h * (U + c * _density(a))
        for k in range(n):
            _kick(a, theta, buf)
            a = stepper.ifftn(stepper.fftn(a) * stepper.kinetic_factor(lam, h))
            if k + 1 < n:
                U2, c2, lam = midpoint(t + 1.5 * h)
                theta = ph_scale * h * ((U + U2) + (c + c2) * _density(a))
                U, c = U2, c2
            else:
                theta = ph_scale * h * (U + c * _density(a))
                _kick(a, theta, buf)
            t += h
            steps += 1
        t = mark
        key = round(mark, 12)
        if key in out_set:
            record(mark)
        if key in snap_set:
            snaps.append((mark, lab_frame(WaveFunction(grid, a), frame, mark, dilation)))
    var = np.array(vars_)
    cxy = np.array(cxys)
    theta = np.array([model.raw_state(tt)[1].theta if model.mode is PotentialMode.ROTATING else 0.0
                      for tt in times])
    rot = np.column_stack(combine_rotated(var[:, 0], var[:, 1], cxy, var[:, 2], theta))
    return GPEResult(times=np.array(times), com=np.array(coms), widths=np.sqrt(var), cov_xy=cxy, rotated=rot,
                     norm=np.array(norms), energy=np.array(energies), psi=WaveFunction(grid, a),
                     snapshots=snaps, steps=steps)


def lab_frame(psi, frame, t, dilation=None):
    """Map a frame wavefunction to lab coordinates.

    Applies exp(i[K_a . R' + phi_a]) (and the dilation chirp and
    normalization if ``dilation`` is given) and moves the grid to R_a.
    """
    lam = np.ones(3) if dilation is None else dilation(t)
    lam_dot = np.zeros(3) if dilation is None else dilation(t, 1)
    R = frame.position(t)
    K = frame.wavevector(t)
    g = psi.grid
    xs = g.axes()
    phase = np.zeros(g.n)
    amp = psi.amplitudes / np.sqrt(np.prod(lam))
    for ax in range(3):
        shape = [1, 1, 1]
        shape[ax] = -1
        r = (lam[ax] * xs[ax]).reshape(shape)
        phase = phase + K[ax] * r + species_chirp(frame.mass, lam[ax], lam_dot[ax], r)
    phase = phase + frame.phase(t)
    lab_grid = GridSpec(g.n, tuple(L * l for L, l in zip(g.extent, lam)),
                        tuple(R[k] + lam[k] * g.center[k] for k in range(3)))
    return WaveFunction(lab_grid, amp * np.exp(1j * phase))


def comoving_frame(psi_lab, frame, t, dilation=None):
    """Inverse of :func:`lab_frame`."""
    lam = np.ones(3) if dilation is None else dilation(t)
    lam_dot = np.zeros(3) if dilation is None else dilation(t, 1)
    R = frame.position(t)
    K = frame.wavevector(t)
    g = psi_lab.grid
    center = tuple((g.center[k] - R[k]) / lam[k] for k in range(3))
    rho_grid = GridSpec(g.n, tuple(L / l for L, l in zip(g.extent, lam)), center)
    xs = rho_grid.axes()
    phase = np.zeros(g.n)
    for ax in range(3):
        shape = [1, 1, 1]
        shape[ax] = -1
        r = (lam[ax] * xs[ax]).reshape(shape)
        phase = phase + K[ax] * r + species_chirp(frame.mass, lam[ax], lam_dot[ax], r)
    phase = phase + frame.phase(t)
    amp = psi_lab.amplitudes * np.sqrt(np.prod(lam)) * np.exp(-1j * phase)
    return WaveFunction(rho_grid, amp)


def species_chirp(mass, lam, lam_dot, r):
    return mass * lam_dot * r * r / (2 * HBAR * lam)


def momentum_expectation(psi):
    """<p> [kg m/s] computed spectrally."""
    g = psi.grid
    a = psi.amplitudes
    ak = np.fft.fftn(a)
    w = _density(ak)
    total = w.sum()
    out = np.empty(3)
    for ax in range(3):
        shape = [1, 1, 1]
        shape[ax] = -1
        out[ax] = HBAR * float(np.sum(w * g.wavenumbers(ax).reshape(shape))) / total
    return out


_SNAP_HEADER = struct.Struct("<3I3dd")


def write_snapshot(path, psi, t):
    """Little-endian header (3 u32 dims, 3 f64 extents, f64 time), then (re, im) f64 pairs, x fastest."""
    a = np.asarray(psi.amplitudes, dtype=np.complex128)
    flat = a.ravel(order="F")
    buf = np.empty(2 * flat.size, dtype="<f8")
    buf[0::2] = flat.real
    buf[1::2] = flat.imag
    with open(path, "wb") as fh:
        fh.write(_SNAP_HEADER.pack(*psi.grid.n, *psi.grid.extent, float(t)))
        fh.write(buf.tobytes())


def read_snapshot(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    nx, ny, nz, lx, ly, lz, t = _SNAP_HEADER.unpack_from(raw)
    data = np.frombuffer(raw, dtype="<f8", offset=_SNAP_HEADER.size)
    flat = data[0::2] + 1j * data[1::2]
    a = flat.reshape((nx, ny, nz), order="F")
    return WaveFunction(GridSpec((nx, ny, nz), (lx, ly, lz)), a), t


@dataclass(frozen=True, eq=False)
class TransportRun:
    result: GPEResult
    ground: GroundStateResult
    frame: FrameTransform
    dilation: Dilation
    trajectory: object      # classical anharmonic trajectory defining the frame
    scaling: object         # ScalingSeries defining the dilation
    radii: np.ndarray       # initial Thomas-Fermi radii


def _classical_frame(schedule, tables, hold, species):
    from .classical_sim import Model, integrate
    traj = integrate(schedule, Model.ANHARMONIC, hold_time=hold, L3_fit=tables.fits["L3"])
    return traj, FrameTransform.from_trajectory(traj.times, traj.z, traj.v, species.mass)


def run_gpe_transport(schedule, tables, species=None, mode=PotentialMode.HARMONIC, grid_n=(64, 64, 64),
                      hold=0.1, dt=4e-6, extent_factor=8.0, output_every=OUTPUT_EVERY, snapshot_times=(),
                      use_dilation=True, fft_workers=1):
    """Ground state at z_t(0), then real-time transport and a frozen-trap hold.

    The frame follows the classical anharmonic center-of-mass trajectory
    and, with ``use_dilation``, dilates with the scaling-law solution of
    the eigenfrequency schedule.
    """
    from .chip_model import RB87
    from .scaling_sim import TrapFrequencySchedule, initial_tf_radii, integrate_scaling, ramp_frequency_schedule
    species = RB87 if species is None else species
    model = PotentialModel.transport(mode, schedule, tables, hold)
    traj, frame = _classical_frame(schedule, tables, hold, species)
    fs = ramp_frequency_schedule(schedule, tables)
    if hold > 0:
        fs = fs.then(TrapFrequencySchedule.constant(tables.omegas(schedule.z_f), hold))
    series = integrate_scaling(fs)
    dil = Dilation.from_series(series) if use_dilation else Dilation.identity(model.duration)
    R = initial_tf_radii(species, fs.omega0)
    grid = GridSpec.for_cloud(R, grid_n, extent_factor)
    gs = ground_state(grid, species, model, frame=frame, fft_workers=fft_workers)
    res = propagate(gs.psi, species, model, frame, dil, dt=dt, output_every=output_every,
                    snapshot_times=snapshot_times, fft_workers=fft_workers)
    return TransportRun(result=res, ground=gs, frame=frame, dilation=dil, trajectory=traj, scaling=series,
                        radii=R)


def run_sequence_gpe(plan, species, tables, rate_window=None, mode=PotentialMode.HARMONIC, grid_n=(64, 32, 32),
                     dt=4e-6, dt_free=20e-6, extent_factor=8.0, output_every=OUTPUT_EVERY, fft_workers=1):
    """Full transport / hold / release / lens / expansion chain on the GPE.

    Returns a ``SequenceReport`` whose widths come from the wavefunction;
    the frame dilation is taken from the scaling engine so that the grid
    keeps up with the expanding cloud.
    """
    from .scaling_sim import RATE_WINDOW, asymptotic_rates, expansion_temperature, initial_tf_radii
    from .sequence import Engine, SequenceReport, _scaling_sequence
    if plan.adiabatic_weak_axis:
        raise ValueError("the adiabatic weak-axis variant is a scaling-engine construction")
    window = RATE_WINDOW if rate_window is None else rate_window
    scal = _scaling_sequence(plan, species, tables, window)
    model = PotentialModel.transport(mode, plan.transport, tables, plan.hold)
    model.then_free(plan.free1).then_lens(plan.lens.duration, plan.lens.omega).then_free(plan.free2)
    _, frame = _classical_frame(plan.transport, tables, plan.hold, species)
    dil = Dilation(scal.times, scal.lam)
    R = initial_tf_radii(species, tables.omegas(plan.transport.z_i))
    grid = GridSpec.for_cloud(R, grid_n, extent_factor)
    gs = ground_state(grid, species, model, frame=frame, fft_workers=fft_workers)
    res = propagate(gs.psi, species, model, frame, dil, dt=dt, dt_free=dt_free, output_every=output_every,
                    fft_workers=fft_workers, check_energy=False)
    widths = res.widths
    rates, resid = asymptotic_rates(res.times, widths, window)
    T, T1 = expansion_temperature(rates, species.mass)
    lam = widths / widths[0]
    lam_dot = np.gradient(lam, res.times, axis=0)
    return SequenceReport(times=res.times, widths=widths, lam=lam, lam_dot=lam_dot, R0=R, rates=rates,
                          rate_residual=resid, temperature=T, temperature_1d=T1, timeline=plan.timeline(),
                          engine=Engine.GPE)
