"""Static figures drawn from the CSV outputs (requires matplotlib)."""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path


def _pyplot():
    try:
        import matplotlib
    except ImportError as exc:
        raise RuntimeError("plotting needs matplotlib: pip install 'spacor[plot]'") from exc
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _read_table(path: Path):
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        return header, list(r)


def plot_surface(csv_path: str | Path, png_path: str | Path) -> Path:
    import numpy as np

    plt = _pyplot()
    _, rows = _read_table(Path(csv_path))
    data = np.array(rows, dtype=float)
    taus, fs = np.unique(data[:, 0]), np.unique(data[:, 1])
    z = data[:, 2].reshape(taus.size, fs.size)
    fig, ax = plt.subplots(figsize=(5, 4))
    im = ax.pcolormesh(fs, taus * 1e6, z, shading="auto")
    ax.set_xlabel("spatial frequency [rad]")
    ax.set_ylabel("delay offset [us]")
    ax.set_title(Path(csv_path).stem)
    fig.colorbar(im, ax=ax)
    fig.tight_layout()
    fig.savefig(png_path, dpi=120)
    plt.close(fig)
    return Path(png_path)


def plot_curves(csv_path: str | Path, png_path: str | Path, metric: str, logy: bool = False) -> Path:
    plt = _pyplot()
    header, rows = _read_table(Path(csv_path))
    series = defaultdict(list)
    for row in rows:
        if row[2] == metric:
            series[row[1]].append((float(row[0]), float(row[3])))
    fig, ax = plt.subplots(figsize=(5, 4))
    for name, pts in series.items():
        x, y = zip(*pts)
        ax.plot(x, y, marker="o", ms=3, label=name)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(header[0])
    ax.set_ylabel(metric)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(png_path, dpi=120)
    plt.close(fig)
    return Path(png_path)


def plot_outputs(kind: str, out: str | Path) -> list[Path]:
    """Write PNGs next to the CSVs a run produced in ``out``."""
    out = Path(out)
    if kind == "beampattern":
        return [plot_surface(p, p.with_suffix(".png")) for p in sorted(out.glob("beampattern_*.csv"))]
    metric = {"resolve": "all_hit_rate", "hitrate": "hit_rate", "ber": "ber", "mi": "mi_bits"}[kind]
    return [plot_curves(out / f"{kind}.csv", out / f"{kind}.png", metric, logy=kind == "ber")]
