"""Rational (Padé-type) least-squares fits of tabulated trap quantities.

A fit of orders (p, q) represents

    f(z) = (n_0 + n_1 u + ... + n_p u^p) / (1 + d_1 u + ... + d_q u^q),   u = z / scale

The scaled variable keeps the normal equations well conditioned when z is
in meters.  Coefficients in plain z units are exposed through
``numerator_coeffs`` / ``denominator_coeffs``.
"""
from dataclasses import dataclass
from math import comb

import numpy as np
from scipy.optimize import least_squares

from .errors import (FitToleranceError, IllConditioned, InsufficientSamples,
                     OutOfDomain, PolesInDomain)

# orders tried by fit_pade_auto, lowest first
ORDER_LADDER = ((1, 2), (2, 2), (3, 3), (4, 4), (5, 5), (6, 6))
DEFAULT_TOLERANCE = 1e-4

_POLE_GRID = 4001


@dataclass(frozen=True)
class PadeFit:
    numerator: np.ndarray
    denominator: np.ndarray
    scale: float
    domain: tuple
    max_residual: float

    @property
    def orders(self):
        return len(self.numerator) - 1, len(self.denominator) - 1

    @property
    def numerator_coeffs(self):
        k = np.arange(len(self.numerator))
        return self.numerator / self.scale ** k

    @property
    def denominator_coeffs(self):
        k = np.arange(len(self.denominator))
        return self.denominator / self.scale ** k

    def __call__(self, z):
        u = np.asarray(z, dtype=float) / self.scale
        return _poly(self.numerator, u) / _poly(self.denominator, u)

    def derivative(self, z, order=1):
        """Analytic derivative d^n f / dz^n.

        Uses the Leibniz rule on D f = N, so no finite differences are
        involved.
        """
        u = np.asarray(z, dtype=float) / self.scale
        num = np.polynomial.Polynomial(self.numerator)
        den = np.polynomial.Polynomial(self.denominator)
        dval = den(u)
        f = [num(u) / dval]
        for n in range(1, order + 1):
            acc = num.deriv(n)(u)
            for k in range(1, n + 1):
                acc = acc - comb(n, k) * den.deriv(k)(u) * f[n - k]
            f.append(acc / dval)
        return f[order] / self.scale ** order

    def contains(self, z, rtol=1e-9):
        lo, hi = self.domain
        pad = rtol * max(abs(lo), abs(hi))
        z = np.asarray(z, dtype=float)
        return bool(np.all((z >= lo - pad) & (z <= hi + pad)))

    def check_domain(self, z, what="argument"):
        if not self.contains(z):
            z = np.asarray(z, dtype=float)
            raise OutOfDomain(
                f"{what} spans [{z.min():.6g}, {z.max():.6g}] outside fit domain "
                f"[{self.domain[0]:.6g}, {self.domain[1]:.6g}]")


def _poly(c, u):
    # Horner, ascending coefficients
    out = np.zeros_like(u) + c[-1]
    for a in c[-2::-1]:
        out = out * u + a
    return out


def _denominator_has_pole(den, lo, hi, extra=None):
    u = np.linspace(lo, hi, _POLE_GRID)
    if extra is not None:
        u = np.concatenate([u, extra])
    s = np.sign(_poly(den, u))
    return bool(np.any(s == 0) or np.any(s != s[0]))


def fit_pade(z, values, num_order, den_order, scale=None, refine=True):
    """Least-squares rational fit of ``values`` sampled at ``z``.

    The linearized problem N(u) - y D(u) = 0 is solved first, rows weighted
    by 1/|y| so the residual is relative.  When there are more samples than
    unknowns the result is polished by Levenberg-Marquardt on the true
    relative residual.  Raises PolesInDomain if every candidate has a
    denominator root inside [min z, max z].
    """
    z = np.asarray(z, dtype=float)
    y = np.asarray(values, dtype=float)
    p, q = int(num_order), int(den_order)
    if p < 0 or q < 0:
        raise ValueError("orders must be nonnegative")
    n_par = p + q + 1
    if z.ndim != 1 or z.shape != y.shape:
        raise ValueError("z and values must be 1-D arrays of equal length")
    if len(z) < n_par:
        raise InsufficientSamples(f"need at least {n_par} samples for orders ({p},{q}), got {len(z)}")
    if np.any(np.diff(z) <= 0):
        raise ValueError("sample positions must be distinct and increasing")
    if not (np.all(np.isfinite(z)) and np.all(np.isfinite(y))):
        raise ValueError("samples must be finite")

    if scale is None:
        scale = float(np.max(np.abs(z))) or 1.0
    u = z / scale
    relative = bool(np.all(y != 0.0))
    w = 1.0 / np.abs(y) if relative else np.full_like(y, 1.0 / max(np.max(np.abs(y)), 1e-300))

    cols = [u ** k for k in range(p + 1)] + [-y * u ** k for k in range(1, q + 1)]
    A = np.array(cols).T * w[:, None]
    rhs = y * w
    # column equilibration before the rank test
    cn = np.linalg.norm(A, axis=0)
    if np.any(cn == 0):
        raise IllConditioned("design matrix has an all-zero column")
    c, _, rank, sv = np.linalg.lstsq(A / cn, rhs, rcond=None)
    if rank < n_par or sv[-1] / sv[0] < 1e-15:
        raise IllConditioned(f"rank-deficient system for orders ({p},{q})")
    c = c / cn

    def unpack(c):
        return c[:p + 1], np.concatenate([[1.0], c[p + 1:]])

    def resid(c):
        num, den = unpack(c)
        return (_poly(num, u) / _poly(den, u) - y) * w

    lo, hi = float(u[0]), float(u[-1])
    candidates = [c]
    if refine and len(z) > n_par and q > 0:
        try:
            r = least_squares(resid, c, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15,
                              max_nfev=200 * n_par)
            candidates.insert(0, r.x)
        except (ValueError, np.linalg.LinAlgError):
            pass

    best = None
    for cand in candidates:
        num, den = unpack(cand)
        if q > 0 and _denominator_has_pole(den, lo, hi, u):
            continue
        err = float(np.max(np.abs(resid(cand))))
        if not np.isfinite(err):
            continue
        if best is None or err < best[0]:
            best = (err, num, den)
    if best is None:
        raise PolesInDomain(f"denominator of the ({p},{q}) fit vanishes inside the domain")
    err, num, den = best
    return PadeFit(numerator=np.array(num), denominator=np.array(den), scale=float(scale),
                   domain=(float(z[0]), float(z[-1])), max_residual=err)


def fit_pade_auto(z, values, tolerance=DEFAULT_TOLERANCE, orders=ORDER_LADDER, scale=None):
    """Lowest order on ``orders`` whose max relative residual is below tolerance."""
    best = None
    for p, q in orders:
        if len(z) <= p + q + 1:
            continue
        try:
            fit = fit_pade(z, values, p, q, scale=scale)
        except (PolesInDomain, IllConditioned):
            continue
        if fit.max_residual < tolerance:
            return fit
        if best is None or fit.max_residual < best.max_residual:
            best = fit
    detail = f"best residual {best.max_residual:.3g} at orders {best.orders}" if best else "no usable fit"
    raise FitToleranceError(f"no order reached tolerance {tolerance:g} ({detail})")


def invert(fit, target, guess, tol=1e-13, max_iter=50):
    """Solve fit(z) = target by Newton iteration started at ``guess``.

    Vectorized over ``target``/``guess``.  Intended for monotone fits
    (bias versus trap position) where the start is already close.
    """
    target = np.asarray(target, dtype=float)
    z = np.array(np.broadcast_to(guess, target.shape), dtype=float)
    span = fit.domain[1] - fit.domain[0]
    for _ in range(max_iter):
        step = (fit(z) - target) / fit.derivative(z)
        z = z - step
        if np.all(np.abs(step) <= tol * span):
            return z
    raise IllConditioned("Newton inversion of the fit did not converge")
