"""Static SVG figures rendered next to the delimited outputs."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

matplotlib.rcParams["svg.hashsalt"] = "forest-link"

_META = {"Date": None}


def _save(fig, path):
    fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)


def pathloss_figure(path: str, curves: dict, samples=None, title: str = "Path loss"):
    """Model sweeps (name -> (dist_m, pl_db)) with optional measured scatter."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    if samples:
        ax.scatter([s.dist_m for s in samples], [s.pl_db for s in samples],
                   s=8, c="0.6", label="samples", zorder=1)
    for name, (d, pl) in sorted(curves.items()):
        ax.semilogx(d, pl, label=name, zorder=2)
    ax.set_xlabel("distance (m)")
    ax.set_ylabel("path loss (dB)")
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    _save(fig, path)


def pdf_figure(path: str, series, mu: float, sigma: float, xlabel: str,
               title: str = "Distribution"):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(series, bins="fd", density=True, alpha=0.55, color="tab:blue",
            label="empirical")
    if sigma > 0:
        xs = np.linspace(min(series), max(series), 400)
        pdf = np.exp(-0.5 * ((xs - mu) / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi))
        ax.plot(xs, pdf, "r-", label=f"normal({mu:.1f}, {sigma:.1f})")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("density")
    ax.set_title(title)
    ax.legend(fontsize=8)
    _save(fig, path)


def cir_figure(path: str, delays_ns, powers, title: str = "Channel impulse response"):
    fig, ax = plt.subplots(figsize=(7, 4))
    p = np.asarray(powers, dtype=float)
    db = 10 * np.log10(np.maximum(p / p.max(), 1e-12))
    ax.stem(np.asarray(delays_ns), db, basefmt=" ")
    ax.set_xlabel("delay (ns)")
    ax.set_ylabel("relative power (dB)")
    ax.set_ylim(bottom=max(db.min() - 5, -90))
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    _save(fig, path)


def aps_figure(path: str, azimuth_deg, power, title: str = "Angular power spectrum"):
    fig = plt.figure(figsize=(5, 5))
    ax = fig.add_subplot(projection="polar")
    theta = np.radians(np.asarray(azimuth_deg, dtype=float))
    p = np.asarray(power, dtype=float)
    db = 10 * np.log10(np.maximum(p / p.max(), 1e-6))
    order = np.argsort(theta)
    theta_c = np.concatenate([theta[order], theta[order][:1] + 2 * np.pi])
    db_c = np.concatenate([db[order], db[order][:1]])
    ax.plot(theta_c, db_c, "o-")
    ax.set_theta_zero_location("N")
    ax.set_theta_direction(-1)
    ax.set_title(title)
    _save(fig, path)
