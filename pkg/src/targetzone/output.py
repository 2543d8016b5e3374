"""CSV/JSON/SVG writers and the ``key=value`` config reader used by the CLI."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

CONFIG_KEYS = {"sigma", "gamma", "kappa", "c", "s0", "horizon"}


def fmt(value) -> str:
    """Shortest round-trip decimal for floats; plain ``str`` otherwise."""
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        return repr(value)
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    return path


def write_json(path, payload) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_jsonable) + "\n")
    return path


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_svg_surface(path, times, zs, values, title, label) -> Path:
    """Self-contained SVG heatmap with contours of ``values[i, j]`` at ``(times[i], zs[j])``."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "targetzone"
    plt.rcParams["svg.fonttype"] = "path"
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6, 4.5))
    values = np.ma.masked_invalid(np.asarray(values, dtype=float))
    mesh = ax.pcolormesh(zs, times, values, shading="auto", cmap="viridis")
    if values.count() > 0 and float(values.max() - values.min()) > 0:
        ax.contour(zs, times, values, levels=10, colors="white", linewidths=0.5)
    fig.colorbar(mesh, ax=ax, label=label)
    ax.set_xlabel("z")
    ax.set_ylabel("t")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def read_config(path) -> dict:
    """Parse ``key=value`` lines; ``#`` starts a comment. Values become floats."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = float(value)
    return out
