"""Matplotlib figures written straight to files (Agg backend)."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["decay_figure", "ap_figure", "ratio_histogram", "slice_figure", "defect_figure",
           "summary_figure"]

_META = {"Software": None}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=110, metadata=_META)
    plt.close(fig)
    return path


def decay_figure(fits: dict, path, title="decay"):
    """Log-log trajectories with fitted and predicted slopes; ``fits`` maps label -> DecayFit."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for label, f in fits.items():
        t = np.asarray(f.times)
        y = np.asarray(f.norms)
        line, = ax.loglog(t, y, "o", label=f"{label}: {f.fitted_slope:+.3f} (pred {f.predicted_slope:+.3f})")
        ax.loglog(t, np.exp(f.intercept) * t ** f.fitted_slope, "-", color=line.get_color(), lw=1)
        ax.loglog(t, y[0] * (t / t[0]) ** f.predicted_slope, ":", color=line.get_color(), lw=1)
    ax.set_xlabel("t")
    ax.set_ylabel("norm")
    ax.set_title(title)
    ax.legend(fontsize=7)
    return _save(fig, path)


def ap_figure(audits: dict, path):
    """A_p products against cube side for each audit (label -> ApAudit)."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, a in audits.items():
        s = np.array([r[2] for r in a.rows])
        pr = a.products
        ok = np.isfinite(pr)
        ax.loglog(s[ok], pr[ok], ".", label=f"{label} (sup {a.constant:.3g})")
    ax.set_xlabel("cube side")
    ax.set_ylabel("A_p product")
    ax.legend(fontsize=7)
    return _save(fig, path)


def ratio_histogram(ratios, path, bound=None, title="interpolation ratio"):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.hist(ratios, bins=20)
    if bound is not None:
        ax.axvline(bound, color="k", ls="--", label=f"bound {bound:.3g}")
        ax.legend(fontsize=7)
    ax.set_title(title)
    return _save(fig, path)


def slice_figure(panels: dict, extent, path, title=""):
    """Side-by-side images; ``panels`` maps label -> 2-D array (first axis horizontal)."""
    k = len(panels)
    fig, axes = plt.subplots(1, k, figsize=(4 * k, 3.4), squeeze=False)
    for ax, (label, a) in zip(axes[0], panels.items()):
        im = ax.imshow(np.asarray(a).T, origin="lower", extent=extent, aspect="auto")
        ax.set_title(label, fontsize=8)
        fig.colorbar(im, ax=ax, shrink=0.8)
    fig.suptitle(title, fontsize=9)
    return _save(fig, path)


def defect_figure(values: dict, path, tol=None, title=""):
    """Scatter of per-trial values (label -> list) on a log axis."""
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    for label, v in values.items():
        v = np.maximum(np.asarray(v, float), 1e-300)
        ax.semilogy(np.arange(len(v)), v, ".", label=label)
    if tol is not None:
        ax.axhline(tol, color="k", ls="--")
    ax.set_xlabel("trial")
    ax.set_title(title)
    ax.legend(fontsize=7)
    return _save(fig, path)


def summary_figure(rows, path):
    """Horizontal pass/fail chart of a merged report."""
    labels = [r["check"] for r in rows]
    ok = [bool(r["pass"]) for r in rows]
    fig, ax = plt.subplots(figsize=(7, 0.22 * len(rows) + 1))
    ax.barh(range(len(rows)), [1] * len(rows), color=["tab:green" if o else "tab:red" for o in ok])
    ax.set_yticks(range(len(rows)))
    ax.set_yticklabels(labels, fontsize=6)
    ax.set_xticks([])
    ax.invert_yaxis()
    fig.tight_layout()
    return _save(fig, path)
