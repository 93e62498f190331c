"""SVG renderings of KM curves, paired-difference densities and sweeps.

matplotlib is an optional extra (``pip install survrank[plot]``).
"""

import io
import logging
from pathlib import Path
from typing import Dict, Optional

import pandas as pd

from survrank.errors import ArgumentError
from survrank.services.artifacts import atomic_write_bytes
from survrank.services.metrics import EquivalenceReport, KMCurve

logger = logging.getLogger(__name__)


def _pyplot():
    try:
        import matplotlib
    except ImportError:
        raise ArgumentError("SVG output needs matplotlib: pip install 'survrank[plot]'") from None
    matplotlib.use("Agg")
    # fixed ids make the SVG bytes reproducible
    matplotlib.rcParams["svg.hashsalt"] = "survrank"
    import matplotlib.pyplot as plt

    return plt


def _save_svg(fig, path: Path) -> Path:
    buffer = io.BytesIO()
    fig.savefig(buffer, format="svg", bbox_inches="tight", metadata={"Date": None})
    fig.clf()
    return atomic_write_bytes(path, buffer.getvalue())


def plot_km(curves: Dict[str, KMCurve], path: Path, title: Optional[str] = None) -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, curve in curves.items():
        ax.step(curve.times, curve.survival, where="post", label=label, lw=2)
    ax.set_xlabel("time")
    ax.set_ylabel("survival probability")
    ax.set_ylim(0.0, 1.05)
    if title:
        ax.set_title(title)
    ax.legend()
    out = _save_svg(fig, path)
    plt.close(fig)
    return out


def plot_kde(report: EquivalenceReport, path: Path, title: Optional[str] = None) -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(report.grid, report.density, lw=2)
    ax.axvspan(report.ci_lower, report.ci_upper, alpha=0.2, label="95% CI")
    for bound in (-report.delta, report.delta):
        ax.axvline(bound, ls="--", color="grey")
    ax.axvline(report.mean_difference, color="black", label="mean")
    ax.set_xlabel("C-index difference")
    ax.set_ylabel("density")
    if title:
        ax.set_title(title)
    ax.legend()
    out = _save_svg(fig, path)
    plt.close(fig)
    return out


def plot_sweep(frame: pd.DataFrame, path: Path, x: str = "value", y: str = "c_index") -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(frame[x], frame[y], marker="o", lw=2)
    ax.set_xlabel(str(frame["param"].iloc[0]) if "param" in frame and len(frame) else x)
    ax.set_ylabel("C-index")
    out = _save_svg(fig, path)
    plt.close(fig)
    return out
