"""Magnetostatics of a Z-shaped chip wire plus homogeneous bias field.

Wires are infinitely thin straight segments.  The chip surface is the plane
Z = 0 and atoms sit at Z > 0.  From the field we get the trapping potential
of a low-field seeker, V = m_F g_F mu_B |B|, and a local harmonic + cubic
description of its minimum.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize_scalar

from .constants import GAUSS, MM, MU_0, MU_B, RB87_MASS, RB87_SCATTERING_LENGTH
from .errors import InsufficientSamples, NoTrapFound, PointOnWire
from .pade import fit_pade_auto, invert

_ON_WIRE = 1e-9


def _vec3(v):
    a = np.array(v, dtype=float).reshape(3)
    if not np.all(np.isfinite(a)):
        raise ValueError("vector components must be finite")
    return a


@dataclass(frozen=True, eq=False)
class WireSegment:
    start: np.ndarray
    end: np.ndarray
    current: float

    def __post_init__(self):
        object.__setattr__(self, "start", _vec3(self.start))
        object.__setattr__(self, "end", _vec3(self.end))
        object.__setattr__(self, "current", float(self.current))
        if np.array_equal(self.start, self.end):
            raise ValueError("wire segment has zero length")
        if not np.isfinite(self.current):
            raise ValueError("wire current must be finite")

    @property
    def length(self):
        return float(np.linalg.norm(self.end - self.start))

    def key(self):
        return (tuple(self.start), tuple(self.end), self.current)


@dataclass(frozen=True, eq=False)
class ChipConfig:
    segments: tuple
    bias_direction: np.ndarray
    bias_magnitude: float

    def __post_init__(self):
        segs = tuple(self.segments)
        if not segs:
            raise ValueError("at least one wire segment is required")
        object.__setattr__(self, "segments", segs)
        d = _vec3(self.bias_direction)
        if abs(np.linalg.norm(d) - 1.0) > 1e-12:
            raise ValueError("bias_direction must be a unit vector")
        object.__setattr__(self, "bias_direction", d)
        object.__setattr__(self, "bias_magnitude", float(self.bias_magnitude))
        if not np.isfinite(self.bias_magnitude):
            raise ValueError("bias magnitude must be finite")
        for a, b in zip(segs[:-1], segs[1:]):
            if np.max(np.abs(a.end - b.start)) > 1e-12:
                raise ValueError("wire segments must form a connected polyline")

    def with_bias(self, bias):
        return replace(self, bias_magnitude=float(bias))

    def with_current(self, current):
        segs = tuple(WireSegment(s.start, s.end, current) for s in self.segments)
        return replace(self, segments=segs)

    @property
    def bias_vector(self):
        return self.bias_magnitude * self.bias_direction

    def key(self):
        return (tuple(s.key() for s in self.segments), tuple(self.bias_direction), self.bias_magnitude)

    def __eq__(self, other):
        return isinstance(other, ChipConfig) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())


@dataclass(frozen=True)
class AtomSpecies:
    mass: float = RB87_MASS
    g_F: float = 0.5
    m_F: float = 2.0
    mu_B: float = MU_B
    a_s: float = RB87_SCATTERING_LENGTH
    atom_number: float = 1e5
    name: str = "Rb87"

    def __post_init__(self):
        if not self.m_F * self.g_F > 0:
            raise ValueError("m_F * g_F must be positive (low-field seeking state)")
        for attr in ("mass", "a_s", "atom_number"):
            if not getattr(self, attr) > 0:
                raise ValueError(f"{attr} must be positive")

    @property
    def moment(self):
        """Effective magnetic moment m_F g_F mu_B [J/T]."""
        return self.m_F * self.g_F * self.mu_B


RB87 = AtomSpecies()


def z_wire(current=5.0, center_length=4 * MM, lead_length=16 * MM, bias=21.5 * GAUSS):
    """Z-shaped wire in the chip plane with bias along +Y.

    The center bar runs along X; the lead at -X goes to -Y and the lead at
    +X goes to +Y.
    """
    hx = center_length / 2
    pts = [(-hx, -lead_length, 0.0), (-hx, 0.0, 0.0), (hx, 0.0, 0.0), (hx, lead_length, 0.0)]
    segs = tuple(WireSegment(a, b, current) for a, b in zip(pts[:-1], pts[1:]))
    return ChipConfig(segs, (0.0, 1.0, 0.0), bias)


def segment_field(segment, points):
    """Biot-Savart field of a finite straight segment at ``points`` (..., 3)."""
    p = np.asarray(points, dtype=float)
    L = segment.end - segment.start
    r1 = p - segment.start
    r2 = p - segment.end
    c = np.cross(L, r1)
    c2 = np.einsum("...i,...i->...", c, c)
    if np.any(c2 <= (_ON_WIRE ** 2) * (L @ L)):
        raise PointOnWire("field requested within 1 nm of a wire axis")
    n1 = np.sqrt(np.einsum("...i,...i->...", r1, r1))
    n2 = np.sqrt(np.einsum("...i,...i->...", r2, r2))
    proj = (r1 @ L) / n1 - (r2 @ L) / n2
    pref = MU_0 * segment.current / (4 * np.pi)
    return (pref * proj / c2)[..., None] * c


def field_at(config, point):
    """Total field [T]: wire segments plus the homogeneous bias."""
    p = np.asarray(point, dtype=float)
    B = np.broadcast_to(config.bias_vector, p.shape).copy()
    for seg in config.segments:
        B += segment_field(seg, p)
    return B


def potential_at(config, species, point):
    B = field_at(config, point)
    return species.moment * np.sqrt(np.einsum("...i,...i->...", B, B))


@dataclass(frozen=True)
class TrapCharacterization:
    z_t: float
    nu_x: float
    nu_y: float
    nu_z: float
    L3: float
    theta: float
    bias: float
    position: np.ndarray = field(default=None, repr=False, compare=False)
    axes: np.ndarray = field(default=None, repr=False, compare=False)

    @property
    def nu(self):
        return np.array([self.nu_x, self.nu_y, self.nu_z])

    @property
    def omega(self):
        return 2 * np.pi * self.nu


def _line_minimum(V, z_lo, z_hi, n=600):
    zs = np.geomspace(z_lo, z_hi, n)
    pts = np.zeros((n, 3))
    pts[:, 2] = zs
    v = V(pts)
    inner = np.nonzero((v[1:-1] < v[:-2]) & (v[1:-1] <= v[2:]))[0] + 1
    if len(inner) == 0:
        raise NoTrapFound("no interior potential minimum along the Z axis")
    k = inner[np.argmin(v[inner])]

    def f(z):
        return float(V(np.array([0.0, 0.0, z])))

    r = minimize_scalar(f, bounds=(zs[k - 1], zs[k + 1]), method="bounded",
                        options={"xatol": 1e-15 * zs[k] + 1e-16})
    return float(r.x)


_E = np.eye(3)
_PAIRS = [(i, j) for i in range(3) for j in range(i + 1, 3)]


def _hessian_stencil(p, h):
    pts = [p]
    for i in range(3):
        pts += [p + h * _E[i], p - h * _E[i]]
    for i, j in _PAIRS:
        ei, ej = h * _E[i], h * _E[j]
        pts += [p + ei + ej, p + ei - ej, p - ei + ej, p - ei - ej]
    return np.array(pts)


def _gradient_hessian(V, p, h):
    v = V(_hessian_stencil(p, h))
    g = np.empty(3)
    H = np.empty((3, 3))
    for i in range(3):
        vp, vm = v[1 + 2 * i], v[2 + 2 * i]
        g[i] = (vp - vm) / (2 * h)
        H[i, i] = (vp - 2 * v[0] + vm) / h ** 2
    for n, (i, j) in enumerate(_PAIRS):
        a, b, c, d = v[7 + 4 * n: 11 + 4 * n]
        H[i, j] = H[j, i] = (a - b - c + d) / (4 * h * h)
    return g, H


def hessian(config, species, point, h=None):
    """Finite-difference Hessian of V; every entry evaluated independently."""
    p = _vec3(point)
    if h is None:
        h = max(1e-7, 1e-4 * abs(p[2]))
    V = lambda q: potential_at(config, species, q)  # noqa: E731
    H = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            ei, ej = h * _E[i], h * _E[j]
            pts = np.array([p + ei + ej, p + ei - ej, p - ei + ej, p - ei - ej])
            a, b, c, d = V(pts)
            H[i, j] = (a - b - c + d) / (4 * h * h)
    return H


def _refine_minimum(V, p, h, max_iter=60):
    # coordinate descent sweep, then Newton on the gradient
    for axis in range(3):
        e = _E[axis]
        r = minimize_scalar(lambda s: float(V(p + s * e)), bounds=(-20 * h, 20 * h), method="bounded",
                            options={"xatol": 1e-3 * h})
        p = p + r.x * e
    for _ in range(max_iter):
        g, H = _gradient_hessian(V, p, h)
        step = np.linalg.solve(H, g)
        p = p - step
        if np.linalg.norm(g) < 1e-30 or np.linalg.norm(step) < 1e-14:
            break
    return p


def characterize_trap(config, species=RB87, z_range=(0.01 * MM, 30 * MM)):
    """Locate the trap minimum and extract frequencies, tilt and L3.

    Frequencies are the Hessian eigenfrequencies.  Eigenvectors are labeled
    x, y, z by their dominant lab component; theta is the angle of the x
    eigenvector measured from +X toward +Y.  L3 = 2 m omega_z^2 / V''' with
    the third derivative taken along the z eigenvector, so its sign follows
    the orientation of that axis (pointing away from the chip).
    """
    V = lambda q: potential_at(config, species, q)  # noqa: E731
    z0 = _line_minimum(V, *z_range)
    h = max(1e-7, 1e-4 * z0)
    p = _refine_minimum(V, np.array([0.0, 0.0, z0]), h)
    if p[2] <= 0:
        raise NoTrapFound("minimum lies on the wrong side of the chip")
    _, H = _gradient_hessian(V, p, h)
    w, vec = np.linalg.eigh(H)
    if np.any(w <= 0):
        raise NoTrapFound("stationary point is not a minimum")
    order = [int(np.argmax(np.abs(vec[k, :]))) for k in range(3)]
    if len(set(order)) != 3:
        raise NoTrapFound("could not label the trap eigen-axes")
    axes = vec[:, order].T.copy()
    for k in range(3):
        if axes[k, k] < 0:
            axes[k] = -axes[k]
    nu = np.sqrt(w[order] / species.mass) / (2 * np.pi)
    ex = axes[0]
    theta = float(np.arctan2(ex[1], ex[0]))
    ez = axes[2]
    s = np.array([2.0, 1.0, -1.0, -2.0])
    v = V(p + h * s[:, None] * ez)
    d3 = (v[0] - 2 * v[1] + 2 * v[2] - v[3]) / (2 * h ** 3)
    omega_z2 = (2 * np.pi * nu[2]) ** 2
    L3 = 2 * species.mass * omega_z2 / d3 if d3 != 0 else np.inf
    return TrapCharacterization(z_t=float(p[2]), nu_x=float(nu[0]), nu_y=float(nu[1]), nu_z=float(nu[2]),
                                L3=float(L3), theta=theta, bias=config.bias_magnitude,
                                position=p, axes=axes)


FIT_QUANTITIES = ("omega_x2", "omega_y2", "omega_z2", "L3", "theta", "bias")


@dataclass(frozen=True, eq=False)
class TrapTables:
    """Sampled trap landscape versus z_t plus rational fits of each quantity.

    Arrays are sorted by increasing z_t (decreasing bias).
    """
    bias: np.ndarray
    z_t: np.ndarray
    nu: np.ndarray          # (n, 3) Hz
    L3: np.ndarray
    theta: np.ndarray
    fits: dict

    @property
    def domain(self):
        return float(self.z_t[0]), float(self.z_t[-1])

    def omega2(self, z, axis=2):
        return self.fits[("omega_x2", "omega_y2", "omega_z2")[axis]](z)

    def omegas(self, z):
        z = np.asarray(z, dtype=float)
        return np.sqrt(np.stack([self.omega2(z, k) for k in range(3)], axis=-1))

    def L3_at(self, z):
        return self.fits["L3"](z)

    def theta_at(self, z):
        return self.fits["theta"](z)

    def bias_at(self, z):
        return self.fits["bias"](z)

    def z_at_bias(self, bias, guess=None):
        """Invert the monotone bias(z_t) fit."""
        bias = np.asarray(bias, dtype=float)
        if guess is None:
            order = np.argsort(self.bias)
            guess = np.interp(bias, self.bias[order], self.z_t[order])
        return invert(self.fits["bias"], bias, guess)

    def rows(self):
        """Table rows in interface units (G, mm, Hz, mm, deg)."""
        return np.column_stack([self.bias / GAUSS, self.z_t / MM, self.nu,
                                self.L3 / MM, np.degrees(self.theta)])


def _characterize_many(args):
    config, species, biases = args
    return [characterize_trap(config.with_bias(b), species) for b in biases]


def trap_tables(config, species=RB87, bias_range=(4.0 * GAUSS, 23.0 * GAUSS), n_samples=60,
                tolerance=1e-4, workers=1):
    """Sweep the bias field, characterize each trap and fit every quantity.

    Results do not depend on ``workers``: each sample is computed
    independently and the list is reassembled in sweep order.
    """
    if n_samples < 20:
        raise InsufficientSamples(f"trap tables need at least 20 samples, got {n_samples}")
    lo, hi = sorted(float(b) for b in bias_range)
    if lo < 0.1 * GAUSS or hi > 50 * GAUSS:
        raise ValueError("bias range must lie within [0.1, 50] G")
    biases = np.linspace(hi, lo, n_samples)
    if workers > 1:
        chunks = np.array_split(biases, workers)
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_characterize_many, [(config, species, c) for c in chunks]))
        traps = [t for part in parts for t in part]
    else:
        traps = _characterize_many((config, species, biases))

    z = np.array([t.z_t for t in traps])
    if np.any(np.diff(z) <= 0):
        raise NoTrapFound("trap position is not monotone in the bias field over this range")
    nu = np.array([[t.nu_x, t.nu_y, t.nu_z] for t in traps])
    L3 = np.array([t.L3 for t in traps])
    theta = np.array([t.theta for t in traps])
    w2 = (2 * np.pi * nu) ** 2
    series = {"omega_x2": w2[:, 0], "omega_y2": w2[:, 1], "omega_z2": w2[:, 2],
              "L3": L3, "theta": theta, "bias": biases}
    fits = {name: fit_pade_auto(z, series[name], tolerance=tolerance) for name in FIT_QUANTITIES}
    return TrapTables(bias=biases, z_t=z, nu=nu, L3=L3, theta=theta, fits=fits)
