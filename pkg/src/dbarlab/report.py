"""Report bundle writers: manifest, CSV tables and figures."""

from __future__ import annotations

import csv
import json
import platform
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

FIGURE_METADATA = {"Software": None}


def write_csv(path: Path, rows: Sequence[dict], fields: Sequence[str] | None = None) -> Path:
    """Write rows with a fixed column order and ``\\n`` line endings."""
    path = Path(path)
    if fields is None:
        fields = list(rows[0].keys()) if rows else []
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(fields), lineterminator="\n", extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow(r)
    return path


def versions() -> dict:
    import scipy

    from . import __version__

    out = {"dbarlab": __version__, "python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__}
    try:
        import matplotlib

        out["matplotlib"] = matplotlib.__version__
    except ImportError:  # figures are skipped without matplotlib
        pass
    return out


def write_manifest(out: Path, config: dict, seed: int, outputs: Iterable[str], status: str) -> Path:
    manifest = {
        "config": config,
        "seed": seed,
        "versions": versions(),
        "outputs": sorted(outputs),
        "status": status,
    }
    path = Path(out) / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=FIGURE_METADATA)
    _pyplot().close(fig)
    return path


def plot_residuals(rows: Sequence[dict], path: Path) -> Path:
    """Absolute residual against the quadrature estimate, one marker per report."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    names = sorted({r["identity"] for r in rows})
    for name in names:
        sel = [r for r in rows if r["identity"] == name]
        est = np.array([max(float(r["estimate"]), 1e-18) for r in sel])
        res = np.array([max(float(r["abs_residual"]), 1e-18) for r in sel])
        ax.loglog(est, res, "o", ms=4, label=name)
    lo, hi = ax.get_xlim()
    xs = np.array([lo, hi])
    ax.loglog(xs, 10 * xs, "k--", lw=0.8, label="10x estimate")
    ax.set_xlabel("two-resolution quadrature estimate")
    ax.set_ylabel("absolute residual")
    ax.legend(fontsize=7)
    return _save(fig, path)


def plot_pointwise(rows: Sequence[dict], path: Path) -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.5, 4.0))
    names = [r["identity"] for r in rows]
    vals = [max(float(r["rel_residual"]), 1e-18) for r in rows]
    ax.barh(range(len(vals)), vals, color="tab:blue")
    ax.set_yticks(range(len(vals)))
    ax.set_yticklabels(names, fontsize=7)
    ax.set_xscale("log")
    ax.set_xlabel("max relative residual over samples")
    return _save(fig, path)


def plot_series(x: Sequence[float], ys: dict, path: Path, xlabel: str, ylabel: str, logy: bool = True) -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    for label, y in ys.items():
        ax.plot(x, y, "o-", label=label)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if len(ys) > 1:
        ax.legend(fontsize=8)
    return _save(fig, path)


def plot_spectrum(values: np.ndarray, threshold: float | None, path: Path, title: str = "") -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    v = np.maximum(np.sort(np.asarray(values)), 1e-20)
    ax.semilogy(np.arange(len(v)), v, ".", ms=4)
    if threshold is not None:
        ax.axhline(threshold, color="r", lw=0.8, ls="--", label="zero threshold")
        ax.legend(fontsize=8)
    ax.set_xlabel("index")
    ax.set_ylabel("singular value")
    if title:
        ax.set_title(title, fontsize=9)
    return _save(fig, path)


def plot_samples(z: np.ndarray, values: np.ndarray, path: Path, label: str) -> Path:
    """Scatter of sample points in the (Re z1, Im z1) plane coloured by ``values``."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5.0, 4.5))
    sc = ax.scatter(z[:, 0].real, z[:, 0].imag, c=values, s=6, cmap="viridis")
    fig.colorbar(sc, ax=ax, label=label)
    ax.set_xlabel("Re z1")
    ax.set_ylabel("Im z1")
    ax.set_aspect("equal")
    return _save(fig, path)
