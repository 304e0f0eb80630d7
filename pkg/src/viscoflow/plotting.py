"""Matplotlib figures rendered to files from the monitor CSV and EOC tables."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def read_monitor_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    out = {}
    for key in rows[0] if rows else []:
        try:
            out[key] = np.array([float(r[key]) for r in rows])
        except ValueError:
            out[key] = [r[key] for r in rows]
    return out


def _positive(y):
    return np.where(y > 0, y, np.nan)


def plot_monitors(csv_path, outdir):
    """Write invariants.png, density.png and energy.png; return their paths."""
    data = read_monitor_csv(csv_path)
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    t = data["t"]
    paths = []

    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.semilogy(t, _positive(data["curl_defect_max"]), label="curl defect max")
    ax.semilogy(t, _positive(data["curl_bound"]), "--", label="curl growth bound (allowance not added)")
    ax.semilogy(t, _positive(data["div_rhoFt_norm"]), label=r"$\|\mathrm{div}(\rho F^T)\|_2$")
    ax.semilogy(t, _positive(data["volume_defect"]), label=r"$\rho\,\det F$ material defect")
    ax.set_xlabel("t")
    ax.set_title("compatibility and conservation monitors")
    ax.legend(fontsize="small")
    paths.append(outdir / "invariants.png")
    fig.tight_layout()
    fig.savefig(paths[-1], dpi=110)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.plot(t, data["rho_min"], label="min density")
    ax.plot(t, data["rho_max"], label="max density")
    ax.plot(t, data["envelope_lo"], "k--", lw=0.8, label="envelope")
    ax.plot(t, data["envelope_hi"], "k--", lw=0.8)
    ax.set_xlabel("t")
    ax.set_title("density range against its envelope")
    ax.legend(fontsize="small")
    paths.append(outdir / "density.png")
    fig.tight_layout()
    fig.savefig(paths[-1], dpi=110)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    total = data["kinetic"] + data["elastic"] + data["potential"]
    for key in ("kinetic", "elastic", "potential"):
        ax.plot(t, data[key] - data[key][0], label=f"{key} (shifted)")
    ax.plot(t, total - total[0], "k", lw=1.5, label="total (shifted)")
    ax.set_xlabel("t")
    ax.set_title("energy change since t = 0")
    ax.legend(fontsize="small")
    paths.append(outdir / "energy.png")
    fig.tight_layout()
    fig.savefig(paths[-1], dpi=110)
    plt.close(fig)
    return paths


def plot_eoc(table, path):
    """Log-log error against the first-axis spacing for each field."""
    n = np.array([r.n[0] for r in table.rows], dtype=float)
    fig, ax = plt.subplots(figsize=(5.6, 4.2))
    for key in ("rho", "u", "F"):
        err = np.array([getattr(r, f"err_{key}") for r in table.rows])
        ax.loglog(1.0 / n, _positive(err), "o-", label=key)
    ax.set_xlabel("1 / n")
    ax.set_ylabel("L2 error at final time")
    ax.set_title(f"convergence: {table.case}")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return Path(path)
