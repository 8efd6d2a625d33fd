"""Low-lying collective modes of a cigar-shaped condensate and their spectroscopy.

Analytic frequencies for a cylindrical trap with aspect ratio
eta = omega_x / omega_perp, and FFT tools to find which modes a simulated
size series contains.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks, get_window

from .errors import SeriesTooShort

MODE_LABELS = ("D_perp", "D_x", "Q1", "Q2", "Sc_xy", "M")
ZERO_PAD = 4
MATCH_BINS = 3


@dataclass(frozen=True)
class ModeTable:
    eta: float
    omega_perp: float
    frequencies: dict

    def hz(self, label):
        return self.frequencies[label] / (2 * np.pi)


def mode_delta(eta):
    d2 = 9 * eta ** 4 - 16 * eta ** 2 + 16
    if np.any(np.asarray(d2) <= 0):
        raise ArithmeticError("mode discriminant must stay positive")
    return np.sqrt(d2)


def mode_frequencies(eta, omega_perp):
    """Dipole, quadrupole, scissors and monopole-type frequencies [rad/s].

    Q1 and M are the plus and minus branches of
    sqrt(2 + 3 eta^2 / 2 +- delta / 2) omega_perp.
    """
    if not (eta > 0 and omega_perp > 0):
        raise ValueError("eta and omega_perp must be positive")
    d = float(mode_delta(eta))
    w = float(omega_perp)
    freqs = {
        "D_perp": w,
        "D_x": eta * w,
        "Q1": np.sqrt(2 + 1.5 * eta ** 2 + 0.5 * d) * w,
        "Q2": np.sqrt(2.0) * w,
        "Sc_xy": np.sqrt(1 + eta ** 2) * w,
        "M": np.sqrt(2 + 1.5 * eta ** 2 - 0.5 * d) * w,
    }
    return ModeTable(eta=float(eta), omega_perp=w, frequencies=freqs)


def cylindrical_parameters(omega):
    """(eta, omega_perp) from trap frequencies, omega_perp = (omega_y + omega_z) / 2."""
    wx, wy, wz = (float(w) for w in omega)
    wp = 0.5 * (wy + wz)
    return wx / wp, wp


@dataclass(frozen=True)
class Peak:
    frequency: float
    magnitude: float
    label: str = None


@dataclass(frozen=True, eq=False)
class Spectrum:
    frequencies: np.ndarray
    magnitude: np.ndarray
    peaks: list = field(default_factory=list)
    resolution: float = float("nan")
    parseval_error: float = float("nan")

    @property
    def log_magnitude(self):
        tiny = np.finfo(float).tiny
        return np.log10(np.maximum(self.magnitude, tiny))

    @property
    def dominant(self):
        return max(self.peaks, key=lambda p: p.magnitude) if self.peaks else None


def _refine(logmag, k):
    # vertex of the parabola through three log-magnitude samples
    if k <= 0 or k >= len(logmag) - 1:
        return 0.0, logmag[k]
    a, b, c = logmag[k - 1], logmag[k], logmag[k + 1]
    den = a - 2 * b + c
    if den == 0:
        return 0.0, b
    off = 0.5 * (a - c) / den
    return off, b - 0.25 * (a - c) * off


def analyze_series(series, sample_rate, modes=None, prominence=0.02, min_frequency=None,
                   max_peaks=12, zero_pad=ZERO_PAD):
    """Hann-windowed, zero-padded amplitude spectrum of a uniformly sampled series.

    Peaks whose prominence exceeds ``prominence`` times the largest
    magnitude are refined by a parabola through the log-magnitude and, if a
    ``ModeTable`` is given, labeled with the closest mode lying within
    MATCH_BINS refined bins.  ``min_frequency`` [Hz] enforces a duration of
    at least four of its periods.
    """
    x = np.asarray(series, dtype=float)
    n = len(x)
    if n < 16:
        raise SeriesTooShort("need at least 16 samples")
    duration = n / sample_rate
    slowest = min_frequency
    if modes is not None:
        lowest = min(modes.frequencies.values()) / (2 * np.pi)
        slowest = lowest if slowest is None else min(slowest, lowest)
    if slowest is not None and duration * slowest < 4:
        raise SeriesTooShort(f"{duration:.3g} s covers fewer than 4 periods of {slowest:.3g} Hz")

    w = get_window("hann", n, fftbins=False)
    xw = (x - x.mean()) * w
    nfft = int(zero_pad) * n
    X = np.fft.fft(xw, nfft)
    energy = np.sum(xw ** 2)
    parseval = abs(np.sum(np.abs(X) ** 2) / nfft - energy) / energy if energy > 0 else 0.0
    half = nfft // 2 + 1
    freqs = np.arange(half) * sample_rate / nfft
    mag = np.abs(X[:half]) * 2 / np.sum(w)
    bin_hz = sample_rate / nfft
    peaks = []
    if np.max(mag) > 0:
        logmag = np.log(np.maximum(mag, np.finfo(float).tiny))
        idx, props = find_peaks(mag, prominence=prominence * np.max(mag))
        idx = idx[freqs[idx] > 2 * zero_pad * bin_hz]
        idx = idx[np.argsort(mag[idx])[::-1]][:max_peaks]
        for k in sorted(idx):
            off, lm = _refine(logmag, k)
            f = (k + off) * bin_hz
            label = None
            if modes is not None:
                best = None
                for name, om in modes.frequencies.items():
                    dist = abs(om / (2 * np.pi) - f)
                    if dist <= MATCH_BINS * bin_hz and (best is None or dist < best[0]):
                        best = (dist, name)
                label = best[1] if best else None
            peaks.append(Peak(float(f), float(np.exp(lm)), label))
    return Spectrum(frequencies=freqs, magnitude=mag, peaks=peaks, resolution=bin_hz,
                    parseval_error=float(parseval))


def phase_difference(a, b, frequency, sample_rate):
    """Relative phase [rad] of two series at ``frequency`` from windowed projections."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = len(a)
    w = get_window("hann", n, fftbins=False)
    e = np.exp(-2j * np.pi * frequency * np.arange(n) / sample_rate)
    ca = np.sum((a - a.mean()) * w * e)
    cb = np.sum((b - b.mean()) * w * e)
    return float(np.angle(ca * np.conj(cb)))


def out_of_phase(a, b, frequency, sample_rate):
    """True when the cross-spectrum at ``frequency`` has negative real part."""
    return np.cos(phase_difference(a, b, frequency, sample_rate)) < 0


def relative_excursion(series):
    """max |s / s[0] - 1| of a size series."""
    s = np.asarray(series, dtype=float)
    return float(np.max(np.abs(s / s[0] - 1)))
