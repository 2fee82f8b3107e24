"""Render spectra to figure files with matplotlib.

The CSV/JSON files are the contract; figures are a convenience for
eyeballing antisymmetry and peak shifts.  The Agg backend keeps this
headless-safe, and the output format follows the file extension
(svg, png, pdf, ...).
"""

from __future__ import annotations

from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .spectrum import Spectrum

_XLABELS = {
    "delta": r"detuning $\delta$ [rad/time]",
    "delta_tau": r"timing detuning $\delta_\tau$ [time]",
}


def save_spectrum_plot(spectra: Sequence[Spectrum], path,
                       labels: Optional[Sequence[str]] = None,
                       title: Optional[str] = None) -> None:
    """Overlay one or more spectra and write the figure to ``path``."""
    if not spectra:
        raise ValueError("nothing to plot")
    if labels is None:
        labels = [_default_label(s) for s in spectra]
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for spec, label in zip(spectra, labels):
        ax.plot(spec.xs, spec.ys, lw=1.4, label=label)
    ax.axhline(0.0, color="0.6", lw=0.7)
    ax.axvline(0.0, color="0.6", lw=0.7)
    ax.set_xlabel(_XLABELS.get(spectra[0].sweep_variable, spectra[0].sweep_variable))
    ax.set_ylabel(r"$\langle J_z \rangle$")
    if title:
        ax.set_title(title)
    if len(spectra) > 1 or labels[0]:
        ax.legend(fontsize=9)
    ax.grid(True, linestyle=":", alpha=0.6)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def _default_label(spec: Spectrum) -> str:
    parts = []
    if "chi" in spec.meta:
        parts.append(f"chi={spec.meta['chi']:g}")
    channels = spec.meta.get("channels") or []
    if channels:
        parts.append(f"gamma={channels[0]['rate']:g}")
    return ", ".join(parts)
