"""Figure rendering for the CLI report path.

Every figure is written to a file next to the delimited output it
visualizes; nothing here affects the CSV/JSON byte-determinism claim.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def render_ledger(ledger: list, path):
    """Mass/energy/dissipation traces of one trajectory."""
    t = [row["t"] for row in ledger]
    fig, axes = plt.subplots(3, 1, figsize=(7, 8), sharex=True)
    axes[0].plot(t, [row["mass"] for row in ledger])
    axes[0].set_ylabel("mass")
    axes[1].plot(t, [row["energy"] for row in ledger])
    axes[1].set_ylabel("energy")
    axes[2].plot(t, [row["dissipation_rate"] for row in ledger])
    axes[2].set_ylabel("dissipation rate")
    axes[2].set_xlabel("t")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_entropy(report, path):
    """Both inequality sides with the term breakdown of the bound."""
    fig, ax = plt.subplots(figsize=(7, 5))
    ax.plot(report.t, report.ls_total, label="LS", color="tab:red")
    ax.plot(report.t, report.rs_total, label="RS", color="tab:blue")
    ax.plot(report.t, report.rs_initial, "--", label="RS initial term", alpha=0.6)
    ax.plot(report.t, report.rs_e1, ":", label="RS continuity term", alpha=0.6)
    ax.plot(report.t, report.rs_e2, "-.", label="RS momentum term", alpha=0.6)
    ax.set_xlabel("t")
    ax.set_yscale("symlog", linthresh=1e-14)
    ax.set_title(f"{report.label}: verdict {'PASS' if report.verdict else 'FAIL'}")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_sweep(sweep, path):
    """Log-log decay of the remainder terms against the regularization strength."""
    eps = [e.eps for e in sweep.entries]
    fig, ax = plt.subplots(figsize=(6, 5))
    ax.loglog(eps, [abs(e.r3) + 1e-300 for e in sweep.entries], "o-", label="|R3|")
    ax.loglog(eps, [abs(e.r4) + 1e-300 for e in sweep.entries], "s-", label="|R4|")
    ax.set_xlabel("eps")
    ax.set_ylabel("remainder magnitude")
    ax.set_title(f"slopes: R3 {sweep.r3_slope:.2f}, R4 {sweep.r4_slope:.2f}")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_mollify(mreport, path):
    """Error vs width with the lemma-style bound."""
    fig, ax = plt.subplots(figsize=(6, 5))
    ax.loglog(mreport.deltas, np.maximum(mreport.errors, 1e-300), "o-", label="error")
    ax.loglog(mreport.deltas, mreport.bounds, "k--", label="bound")
    ax.set_xlabel("delta")
    ax.set_ylabel("sup error")
    ax.set_title(f"log-log slope {mreport.slope:.2f}")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
