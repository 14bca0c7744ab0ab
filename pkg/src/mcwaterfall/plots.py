"""Figure rendering for the report path; every figure goes straight to file."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_SAVE_KW = dict(dpi=130, metadata={"Software": None})


def _save(fig, path):
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_path_fan(times, paths, base_amounts, out_path, max_spaghetti=150):
    """Per-period fan of simulated collections with quantile bands."""
    paths = np.asarray(paths, dtype=float)
    fig, ax = plt.subplots(figsize=(8, 4.5))
    qs = np.percentile(paths, [5, 25, 50, 75, 95], axis=0)
    ax.fill_between(times, qs[0], qs[4], alpha=0.18, color="tab:blue", label="5-95%")
    ax.fill_between(times, qs[1], qs[3], alpha=0.30, color="tab:blue", label="25-75%")
    for row in paths[:max_spaghetti]:
        ax.plot(times, row, lw=0.3, alpha=0.15, color="tab:gray")
    ax.plot(times, qs[2], lw=1.4, color="tab:blue", label="median")
    ax.plot(times, base_amounts, lw=1.6, color="tab:red", label="expected")
    ax.set_xlabel("years")
    ax.set_ylabel("collections")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    _save(fig, out_path)


def save_total_cashflow(times, base_amounts, paths, out_path):
    """Expected schedule against the distribution of per-period collections."""
    paths = np.asarray(paths, dtype=float)
    fig, ax = plt.subplots(figsize=(8, 4.5))
    ax.bar(times, base_amounts, width=0.4, alpha=0.6, label="expected", color="tab:blue")
    ax.errorbar(times, paths.mean(axis=0), yerr=paths.std(axis=0), fmt="o", ms=3,
                lw=1, color="tab:red", label="simulated mean +/- sd")
    ax.set_xlabel("years")
    ax.set_ylabel("collections")
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, out_path)


def save_price_histogram(sample, tranche_name, out_path, bins=40):
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.hist(np.asarray(sample, dtype=float), bins=bins, color="tab:blue", alpha=0.8)
    ax.set_xlabel(f"{tranche_name} price (% of notional)")
    ax.set_ylabel("paths")
    fig.tight_layout()
    _save(fig, out_path)


def save_timelapse(dates, profiles, out_path):
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for name, series in profiles.items():
        ax.plot(dates, series, marker="o", ms=3, lw=1.2, label=name)
    ax.set_xlabel("evaluation date (years)")
    ax.set_ylabel("expected price (% of outstanding)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, out_path)


def save_convergence(history, out_path):
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.semilogy(np.maximum(np.asarray(history, dtype=float), 1e-12), lw=1.2)
    ax.set_xlabel("generation")
    ax.set_ylabel("best max price error")
    fig.tight_layout()
    _save(fig, out_path)
