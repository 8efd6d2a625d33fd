"""Static figures written next to the CSV outputs (Agg backend, no display)."""
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_META = {"Software": None}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_META)
    plt.close(fig)
    return path


def line_plot(path, x, series, xlabel, ylabel, title=None, logy=False, markers=False):
    """One axes, one line per entry of ``series`` (label -> y)."""
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for label, y in series.items():
        ax.plot(x, y, "o-" if markers else "-", label=label, lw=1.2, ms=3)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if logy:
        ax.set_yscale("log")
    if title:
        ax.set_title(title)
    if len(series) > 1:
        ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    return _save(fig, path)


def panels(path, x, rows, xlabel, title=None):
    """Stacked axes sharing x; ``rows`` is a list of (ylabel, {label: y})."""
    fig, axes = plt.subplots(len(rows), 1, figsize=(6.4, 2.2 * len(rows)), sharex=True, squeeze=False)
    for ax, (ylabel, series) in zip(axes[:, 0], rows):
        for label, y in series.items():
            ax.plot(x, y, label=label, lw=1.1)
        ax.set_ylabel(ylabel)
        ax.grid(alpha=0.3)
        if len(series) > 1:
            ax.legend(fontsize=7)
    axes[-1, 0].set_xlabel(xlabel)
    if title:
        axes[0, 0].set_title(title)
    return _save(fig, path)


def spectrum_plot(path, freqs, log_magnitude, peaks=(), modes=None, fmax=None):
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.plot(freqs, log_magnitude, lw=1.0)
    for p in peaks:
        ax.axvline(p.frequency, color="C3", lw=0.6, ls=":")
        if p.label:
            ax.annotate(p.label, (p.frequency, np.log10(max(p.magnitude, 1e-300))), fontsize=7)
    if modes is not None:
        for name, om in modes.frequencies.items():
            ax.axvline(om / (2 * np.pi), color="0.6", lw=0.5)
    if fmax:
        ax.set_xlim(0, fmax)
    ax.set_xlabel("frequency [Hz]")
    ax.set_ylabel("log10 |FFT|")
    ax.grid(alpha=0.3)
    return _save(fig, path)


def heatmap(path, x, y, z, xlabel, ylabel, zlabel, log=True):
    """Map z[i, j] over x[i] (rows) and y[j] (columns)."""
    fig, ax = plt.subplots(figsize=(6.0, 4.6))
    data = np.log10(np.maximum(z, 1e-300)) if log else z
    mesh = ax.pcolormesh(y, x, data, shading="nearest", cmap="viridis")
    cb = fig.colorbar(mesh, ax=ax)
    cb.set_label(f"log10 {zlabel}" if log else zlabel)
    ax.set_xlabel(ylabel)
    ax.set_ylabel(xlabel)
    return _save(fig, path)
