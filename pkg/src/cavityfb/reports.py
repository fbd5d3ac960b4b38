"""Static figure rendering for the CLI report paths.

Figures are written next to the delimited outputs; the file extension
selects the format (svg, png, pdf).
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .experiment import M_HISTOGRAM_BINS  # noqa: E402
from .params import KB  # noqa: E402


def save_map_profiles(maps, path):
    """Per-level potential and transmission profiles over radius."""
    fig, (ax_u, ax_t) = plt.subplots(1, 2, figsize=(9.2, 3.6))
    rho_um = maps.rho * 1e6
    for level in maps.levels:
        ax_u.plot(rho_um, maps.radial[level]["U"] / KB * 1e3, label=level)
        ax_t.plot(rho_um, maps.radial[level]["T"], label=level)
    ax_u.set_xlabel("rho (um)")
    ax_u.set_ylabel("U / kB (mK)")
    ax_u.set_title("effective potential")
    ax_t.set_xlabel("rho (um)")
    ax_t.set_ylabel("|<a>|^2")
    ax_t.set_title("transmission")
    ax_t.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def save_trajectory_figure(record, path):
    """Time traces plus the transverse-plane path, one SVG/PNG."""
    fig, (ax_t, ax_yz) = plt.subplots(
        1, 2, figsize=(10.5, 4.0), gridspec_kw={"width_ratios": [2.2, 1.0]})
    t_us = record.t * 1e6
    has_noise = not np.allclose(record.t_noisy, record.t_noiseless)
    if has_noise:
        ax_t.plot(t_us, record.t_noisy, color="gold", lw=0.3, alpha=0.6,
                  label="T noisy")
    ax_t.plot(t_us, record.t_noiseless, color="purple", lw=0.7, label="T")
    ax_t.plot(t_us, record.rho * 1e6 / 10, color="tab:blue", lw=0.9,
              label="rho (10 um)")
    ax_t.plot(t_us, record.rho_dot * 10, color="tab:red", lw=0.7,
              label="drho/dt (0.1 um/us)")
    if has_noise:
        ax_t.plot(t_us, record.rho_est * 1e6 / 10, color="tab:green", lw=0.6,
                  alpha=0.8, label="rho_est (10 um)")
        ax_t.plot(t_us, record.rho_dot_est * 10, color="deepskyblue", lw=0.6,
                  alpha=0.8, label="drho/dt_est (0.1 um/us)")
    for ev in record.events:
        ax_t.axvline(ev.t * 1e6, color="0.75", lw=0.5, zorder=0)
    if record.trigger_time is not None:
        ax_t.axvline(record.trigger_time * 1e6, color="k", lw=0.8, ls="--")
    ax_t.set_xlabel("t (us)")
    ax_t.legend(fontsize=7, ncol=2, loc="upper right")
    ax_t.set_title(f"termination: {record.termination}")

    ax_yz.plot(record.y * 1e6, record.z * 1e6, lw=0.6, color="tab:blue")
    ax_yz.plot([record.y[0] * 1e6], [record.z[0] * 1e6], "o", ms=4,
               color="tab:green")
    ax_yz.set_xlabel("y (um)")
    ax_yz.set_ylabel("z (um)")
    ax_yz.set_aspect("equal", adjustable="datalim")
    ax_yz.set_title("transverse plane")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def save_merit_histograms(merits_by_label, path, prime=False):
    """Log-binned histograms of the figure of merit, one panel per set."""
    labels = list(merits_by_label)
    n = max(len(labels), 1)
    fig, axes = plt.subplots(n, 1, figsize=(6.4, 2.1 * n), sharex=True,
                             squeeze=False)
    name = "M'" if prime else "M"
    for ax, label in zip(axes[:, 0], labels):
        vals = np.asarray(merits_by_label[label], dtype=float)
        vals = vals[np.isfinite(vals)]
        ax.hist(np.clip(vals, M_HISTOGRAM_BINS[0], M_HISTOGRAM_BINS[-1]),
                bins=M_HISTOGRAM_BINS, color="tab:blue", alpha=0.8)
        ax.set_xscale("log")
        mean = vals.mean() if vals.size else float("nan")
        ax.set_ylabel("count")
        ax.set_title(f"{label}: n={vals.size}, mean {name}={mean:.2f}",
                     fontsize=9)
        ax.axvline(1.0, color="0.6", lw=0.8)
    axes[-1, 0].set_xlabel(name)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def save_dwell_histograms(dwell_by_label, fits_by_label, path):
    """Dwell-time histograms with the fitted exponential overlaid."""
    labels = list(dwell_by_label)
    n = max(len(labels), 1)
    fig, axes = plt.subplots(n, 1, figsize=(6.4, 2.1 * n), sharex=True,
                             squeeze=False)
    for ax, label in zip(axes[:, 0], labels):
        d = np.asarray(dwell_by_label[label], dtype=float) * 1e3
        if d.size:
            bins = np.linspace(0.0, max(d.max(), 1e-3), 40)
            ax.hist(d, bins=bins, color="tab:orange", alpha=0.8)
            fit = fits_by_label.get(label)
            if fit and fit.get("lifetime") and np.isfinite(fit["lifetime"]):
                tau = fit["lifetime"] * 1e3
                burn = fit["burn_in"] * 1e3
                tt = np.linspace(burn, bins[-1], 200)
                n_above = np.sum(d > burn)
                width = bins[1] - bins[0]
                ax.plot(tt, n_above * width / tau * np.exp(-(tt - burn) / tau),
                        color="k", lw=1.0,
                        label=f"tau = {tau:.2f} ms")
                ax.legend(fontsize=8)
        ax.set_ylabel("count")
        ax.set_title(f"{label}: n={d.size}", fontsize=9)
        ax.set_yscale("log")
    axes[-1, 0].set_xlabel("dwell time (ms)")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path
