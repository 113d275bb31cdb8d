"""Figure data and rendering for a sweep.

Twelve figures: PDR and NRO against speed, once per mobility model (one
line per protocol) and once per protocol (one line per model).  Each
figure is written as a long-form CSV and rendered next to it as a PNG.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

FIG_FIELDS = ["figure", "series", "max_speed", "mean", "std", "n"]

_LABELS = {"rwp": "Random Waypoint", "rpgm": "RPGM", "manhattan": "Manhattan",
           "maodv": "MAODV", "odmrp": "ODMRP", "admr": "ADMR", "flooding": "Flooding"}
_YLABEL = {"pdr": "Packet delivery ratio", "nro": "Normalized routing overhead"}


def figure_series(rows, metric: str, by: str) -> dict[str, dict[str, list]]:
    """``{figure_key: {series: [(speed, mean, std, n), ...]}}`` with ``by`` in {"model", "protocol"}."""
    figs: dict[str, dict[str, list]] = {}
    for r in rows:
        key, series = (r.mobility, r.protocol) if by == "model" else (r.protocol, r.mobility)
        mean = getattr(r, f"mean_{metric}")
        std = getattr(r, f"std_{metric}")
        figs.setdefault(key, {}).setdefault(series, []).append((r.max_speed, mean, std, r.n))
    for fig in figs.values():
        for pts in fig.values():
            pts.sort()
    return figs


def write_figure_data(rows, out_dir: str | Path, render: bool = True) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for metric in ("pdr", "nro"):
        for by in ("model", "protocol"):
            for key, series in sorted(figure_series(rows, metric, by).items()):
                stem = f"{metric}_by_{by}_{key}"
                path = out / f"{stem}.csv"
                with open(path, "w", newline="") as fh:
                    w = csv.writer(fh, lineterminator="\n")
                    w.writerow(FIG_FIELDS)
                    for name in sorted(series):
                        for speed, mean, std, n in series[name]:
                            w.writerow([stem, name, repr(speed), repr(mean), repr(std), n])
                written.append(path)
                if render:
                    written.append(render_figure(series, metric, _LABELS.get(key, key), out / f"{stem}.png"))
    return written


def render_figure(series: dict[str, list], metric: str, title: str, path: Path) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    markers = "osd^v"
    for i, name in enumerate(sorted(series)):
        pts = [p for p in series[name] if math.isfinite(p[1])]
        xs = [p[0] for p in pts]
        ax.errorbar(xs, [p[1] for p in pts], yerr=[p[2] for p in pts], marker=markers[i % len(markers)],
                    capsize=3, label=_LABELS.get(name, name))
    ax.set_xlabel("Maximum node speed (m/s)")
    ax.set_ylabel(_YLABEL[metric])
    ax.set_title(title)
    if metric == "pdr":
        ax.set_ylim(0.0, 1.05)
    ax.grid(alpha=0.3)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
