"""Shortcut-to-adiabaticity transport trajectories and their inversion.

A trajectory z_a(t) for the cloud is chosen first.  Newton's equation in a
harmonic trap, z_a'' + omega_z^2(z_t) (z_a - z_t) = 0, is then solved for
the trap position z_t(t), and the bias field follows from the bias(z_t)
fit.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .errors import NegativeDiscriminant, OutOfDomain, RootJump

CHIRP_A = -1.37
CHIRP_B = 0.780
DEFAULT_DT = 10e-6

# s(u) = 126u^5 - 420u^6 + 540u^7 - 315u^8 + 70u^9
_POLY9 = np.polynomial.Polynomial([0, 0, 0, 0, 0, 126, -420, 540, -315, 70])


class AnsatzKind(str, Enum):
    POLYNOMIAL9 = "poly9"
    CHIRPED = "chirped"
    LINEAR = "linear"


@dataclass(frozen=True)
class TrajectoryAnsatz:
    kind: AnsatzKind
    z_i: float
    z_f: float
    t_f: float
    chirp_a: float = CHIRP_A
    chirp_b: float = CHIRP_B

    def __post_init__(self):
        object.__setattr__(self, "kind", AnsatzKind(self.kind))
        if not self.t_f > 0:
            raise ValueError("t_f must be positive")
        if self.z_f == self.z_i:
            raise ValueError("z_f must differ from z_i")
        if self.kind is AnsatzKind.CHIRPED:
            if abs(1 + self.chirp_a + self.chirp_b) < 1e-12:
                raise ValueError("chirp parameters give 1 + a + b = 0")
            if not chirp_is_monotone(self.chirp_a, self.chirp_b):
                raise ValueError("chirp parameters make the phase v(u) non-monotone")

    def with_duration(self, t_f):
        return replace(self, t_f=float(t_f))


def chirp_is_monotone(a, b):
    """True if v'(u) keeps the sign of 1 + a + b on [0, 1]."""
    u = np.linspace(0.0, 1.0, 1001)
    dv = (1 + 2 * a * u + 3 * b * u * u) / (1 + a + b)
    return bool(np.all(dv > 0))


def evaluate_trajectory(ansatz, t):
    """Return (z, z', z'', z''', z'''') at time(s) ``t`` in closed form."""
    t = np.asarray(t, dtype=float)
    tf = ansatz.t_f
    if np.any(t < 0) or np.any(t > tf):
        raise OutOfDomain(f"trajectory time outside [0, {tf}]")
    u = t / tf
    D = ansatz.z_f - ansatz.z_i
    zero = np.zeros_like(u)
    if ansatz.kind is AnsatzKind.POLYNOMIAL9:
        out = [ansatz.z_i + D * _POLY9(u)]
        for n in range(1, 5):
            out.append(D * _POLY9.deriv(n)(u) / tf ** n)
        return tuple(out)
    if ansatz.kind is AnsatzKind.LINEAR:
        return ansatz.z_i + D * u, zero + D / tf, zero, zero, zero

    a, b = ansatz.chirp_a, ansatz.chirp_b
    k = 2 * np.pi / (1 + a + b)
    v = k * (u + a * u ** 2 + b * u ** 3)
    v1 = k * (1 + 2 * a * u + 3 * b * u ** 2) / tf
    v2 = k * (2 * a + 6 * b * u) / tf ** 2
    v3 = zero + k * 6 * b / tf ** 3
    s1, c1, s2, c2 = np.sin(v), np.cos(v), np.sin(2 * v), np.cos(2 * v)
    g0 = 6 * v - 8 * s1 + s2
    g1 = 6 - 8 * c1 + 2 * c2
    g2 = 8 * s1 - 4 * s2
    g3 = 8 * c1 - 8 * c2
    g4 = -8 * s1 + 16 * s2
    c = D / (12 * np.pi)
    z0 = ansatz.z_i + c * g0
    z1 = c * g1 * v1
    z2 = c * (g2 * v1 ** 2 + g1 * v2)
    z3 = c * (g3 * v1 ** 3 + 3 * g2 * v1 * v2 + g1 * v3)
    z4 = c * (g4 * v1 ** 4 + 6 * g3 * v1 ** 2 * v2 + g2 * (3 * v2 ** 2 + 4 * v1 * v3))
    return z0, z1, z2, z3, z4


@dataclass(frozen=True, eq=False)
class RampSchedule:
    times: np.ndarray
    z_a: np.ndarray
    z_t: np.ndarray
    omega_z: np.ndarray
    bias: np.ndarray
    chi: np.ndarray = None
    chi_max: float = float("nan")
    z_a_ddot: np.ndarray = field(default=None, repr=False)
    ansatz: TrajectoryAnsatz = None

    @property
    def t_f(self):
        return float(self.times[-1])

    @property
    def dt(self):
        return float(self.times[1] - self.times[0])

    @property
    def z_i(self):
        return float(self.z_t[0])

    @property
    def z_f(self):
        return float(self.z_t[-1])

    def newton_residual(self):
        """|z_a'' + omega_z^2 (z_a - z_t)| on the grid."""
        return np.abs(self.z_a_ddot + self.omega_z ** 2 * (self.z_a - self.z_t))


def chi_profile(schedule, L3_fit):
    """chi(t) = |(z_a - z_t) / L3(z_t)| and its maximum."""
    L3_fit.check_domain(schedule.z_t, "z_t")
    chi = np.abs((schedule.z_a - schedule.z_t) / L3_fit(schedule.z_t))
    return chi, float(np.max(chi))


def time_grid(t_f, dt=DEFAULT_DT, n_steps=None):
    if n_steps is None:
        n_steps = max(int(round(t_f / dt)), 2)
    return np.linspace(0.0, t_f, n_steps + 1)


def _quadratic_roots(fit, za, zdd):
    # (zeta z'' - beta) z_t^2 + (beta z_a + gamma z'' - alpha) z_t + (z'' + alpha z_a) = 0
    alpha, beta = fit.numerator_coeffs
    _, gamma, zeta = fit.denominator_coeffs
    A = zeta * zdd - beta
    B = beta * za + gamma * zdd - alpha
    C = zdd + alpha * za
    disc = B * B - 4 * A * C
    if np.any(disc < 0):
        k = int(np.argmax(disc < 0))
        raise NegativeDiscriminant(f"negative discriminant at grid index {k}")
    sq = np.sqrt(disc)
    # numerically stable pair
    qq = -0.5 * (B + np.copysign(sq, B))
    r1 = qq / A
    r2 = np.where(qq != 0, C / np.where(qq != 0, qq, 1.0), r1)
    return r1, r2


def _select_continuous(r1, r2, z_start, window):
    out = np.empty_like(r1)
    prev = z_start
    for k in range(len(r1)):
        a, b = r1[k], r2[k]
        pick = a if abs(a - prev) <= abs(b - prev) else b
        if abs(pick - prev) > window:
            raise RootJump(f"no admissible root near previous z_t at grid index {k}")
        out[k] = pick
        prev = pick
    return out


def _newton_roots(omega2_fit, za, zdd, tol=1e-16, max_iter=50):
    # solve F(z) = z'' + w2(z) (z_a - z) = 0, seeded at z_a (static root)
    z = za.copy()
    for _ in range(max_iter):
        w2 = omega2_fit(z)
        F = zdd + w2 * (za - z)
        dF = omega2_fit.derivative(z) * (za - z) - w2
        step = F / dF
        z = z - step
        if np.max(np.abs(step)) <= tol:
            break
    else:
        raise RootJump("Newton inversion of the trajectory did not converge")
    return z


def reverse_engineer(ansatz, omega2_fit, bias_fit, n_steps=None, dt=DEFAULT_DT, L3_fit=None,
                     method="auto"):
    """Trap trajectory and bias schedule realizing ``ansatz`` in a harmonic trap.

    ``method`` selects the root finder: ``"quadratic"`` uses the closed form
    available for a (1, 2) omega^2 fit, ``"newton"`` solves the Newton
    equation for any fit order, ``"auto"`` picks by fit order.  The Linear
    kind is not an STA trajectory: z_t itself moves linearly and z_a is
    reported equal to z_t.
    """
    t = time_grid(ansatz.t_f, dt, n_steps)
    za, _, zdd, _, _ = evaluate_trajectory(ansatz, t)
    if ansatz.kind is AnsatzKind.LINEAR:
        zt = za.copy()
        zdd_out = np.zeros_like(zt)
    else:
        if method == "auto":
            method = "quadratic" if omega2_fit.orders == (1, 2) else "newton"
        if method == "quadratic":
            if omega2_fit.orders != (1, 2):
                raise ValueError("quadratic inversion needs a (1, 2) omega^2 fit")
            r1, r2 = _quadratic_roots(omega2_fit, za, zdd)
            step = np.max(np.abs(np.diff(za)))
            zt = _select_continuous(r1, r2, ansatz.z_i, 10 * step)
        elif method == "newton":
            zt = _newton_roots(omega2_fit, za, zdd)
        else:
            raise ValueError(f"unknown inversion method {method!r}")
        zdd_out = zdd
    omega2_fit.check_domain(zt, "z_t")
    bias_fit.check_domain(zt, "z_t")
    w2 = omega2_fit(zt)
    if np.any(w2 <= 0):
        raise NegativeDiscriminant("fitted omega_z^2 is not positive along the schedule")
    sched = RampSchedule(times=t, z_a=za, z_t=zt, omega_z=np.sqrt(w2), bias=bias_fit(zt),
                         z_a_ddot=zdd_out, ansatz=ansatz)
    if ansatz.kind is not AnsatzKind.LINEAR:
        res = sched.newton_residual()
        scale = max(np.max(np.abs(zdd)), 1e-300)
        if np.max(res) >= 1e-6 * scale:
            raise RootJump(f"Newton residual {np.max(res):.3g} exceeds 1e-6 of max |z_a''|")
    if L3_fit is not None:
        chi, chi_max = chi_profile(sched, L3_fit)
        sched = replace(sched, chi=chi, chi_max=chi_max)
    return sched


def static_schedule(z, omega2_fit, bias_fit, t_f, dt=DEFAULT_DT, L3_fit=None):
    """Trap parked at ``z`` for ``t_f`` (z_a = z_t, chi = 0)."""
    t = time_grid(t_f, dt)
    zz = np.full_like(t, z)
    w = np.sqrt(omega2_fit(zz))
    chi = np.zeros_like(t) if L3_fit is not None else None
    return RampSchedule(times=t, z_a=zz, z_t=zz.copy(), omega_z=w, bias=bias_fit(zz), chi=chi,
                        chi_max=0.0 if chi is not None else float("nan"), z_a_ddot=np.zeros_like(t))


def _chi_for(args):
    ansatz, omega2_fit, bias_fit, L3_fit, dt = args
    try:
        return reverse_engineer(ansatz, omega2_fit, bias_fit, dt=dt, L3_fit=L3_fit).chi_max
    except (NegativeDiscriminant, RootJump, OutOfDomain, ValueError):
        return float("inf")


def optimize_chirp(template, omega2_fit, bias_fit, L3_fit, a_values, b_values, dt=DEFAULT_DT,
                   workers=1):
    """Grid search over (a, b) minimizing chi_max.

    Returns (a, b, chi_max, chi_map) with chi_map indexed [i_a, i_b].  Ties
    go to the lexicographically smallest (a, b).  Cells whose phase is not
    monotone are marked inf.
    """
    a_values = np.asarray(a_values, dtype=float)
    b_values = np.asarray(b_values, dtype=float)
    jobs, index = [], []
    chi = np.full((len(a_values), len(b_values)), np.inf)
    for i, a in enumerate(a_values):
        for j, b in enumerate(b_values):
            if abs(1 + a + b) < 1e-12 or not chirp_is_monotone(a, b):
                continue
            anz = replace(template, kind=AnsatzKind.CHIRPED, chirp_a=float(a), chirp_b=float(b))
            jobs.append((anz, omega2_fit, bias_fit, L3_fit, dt))
            index.append((i, j))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            vals = list(ex.map(_chi_for, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        vals = [_chi_for(j) for j in jobs]
    for (i, j), v in zip(index, vals):
        chi[i, j] = v
    if not np.any(np.isfinite(chi)):
        raise ValueError("no admissible chirp parameters on the grid")
    best = None
    for i in range(len(a_values)):
        for j in range(len(b_values)):
            key = (chi[i, j], a_values[i], b_values[j])
            if best is None or key < best:
                best = key
    return float(best[1]), float(best[2]), float(best[0]), chi
