"""Deterministic artifact writers: delimited tables, JSON, SVG line plots.

Determinism is a contract here, not a nicety: reruns with the same config
must produce byte-identical table bodies.  That pins the float format
(17 significant digits, round-trips IEEE doubles), the column order (caller
supplied), JSON key order (sorted), and strips the timestamp matplotlib
would otherwise embed in SVG output.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ConfigError

FLOAT_FMT = "%.17g"
SVG_HASH_SALT = "nlslab"


def _fmt(value) -> str:
    if isinstance(value, (str, np.str_)):
        return str(value)
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return FLOAT_FMT % float(value)


def _header_lines(stamp: dict | None) -> list:
    if not stamp:
        return []
    return [f"# {key} = {stamp[key]}" for key in sorted(stamp)]


def write_table(path, columns, data, stamp: dict | None = None) -> Path:
    """CSV with ``#`` provenance header, column row, then formatted rows.

    data is a sequence of rows; each cell may be float, int, bool or str.
    """
    path = Path(path)
    rows = [list(row) for row in data]
    for row in rows:
        if len(row) != len(columns):
            raise ConfigError(
                f"table row has {len(row)} cells for {len(columns)} columns"
            )
    lines = _header_lines(stamp)
    lines.append(",".join(str(c) for c in columns))
    lines.extend(",".join(_fmt(cell) for cell in row) for row in rows)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_matrix(path, mat, stamp: dict | None = None) -> Path:
    """CSV dump of a 2D array, one matrix row per line, no column names."""
    mat = np.asarray(mat)
    if mat.ndim != 2:
        raise ConfigError(f"matrix dump needs a 2D array, got shape {mat.shape}")
    path = Path(path)
    lines = _header_lines(stamp)
    lines.extend(",".join(FLOAT_FMT % v for v in row) for row in mat)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_table(path) -> tuple:
    """Inverse of write_table: (columns, float matrix), header skipped."""
    path = Path(path)
    columns: list = []
    rows: list = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line or line.startswith("#"):
            continue
        if not columns:
            columns = line.split(",")
            continue
        rows.append([float(tok) for tok in line.split(",")])
    if not columns:
        raise ConfigError(f"{path} has no column header")
    return columns, np.array(rows, dtype=float).reshape(len(rows), len(columns))


def table_body(path) -> bytes:
    """Bytes of a table minus its ``#`` header, for determinism checks."""
    keep = [
        line
        for line in Path(path).read_text(encoding="utf-8").splitlines()
        if not line.startswith("#")
    ]
    return ("\n".join(keep) + "\n").encode("utf-8")


def write_json(path, payload: dict, stamp: dict | None = None) -> Path:
    path = Path(path)
    doc = dict(payload)
    if stamp:
        doc["provenance"] = dict(stamp)
    path.write_text(
        json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n",
        encoding="utf-8",
    )
    return path


def _pyplot():
    import matplotlib

    matplotlib.use("Agg", force=True)
    matplotlib.rcParams["svg.hashsalt"] = SVG_HASH_SALT
    import matplotlib.pyplot as plt

    return plt


def save_figure(fig, path) -> Path:
    """SVG save with the creation timestamp stripped."""
    path = Path(path)
    fig.savefig(path, format="svg", metadata={"Date": None})
    return path


def line_plot(
    csv_path,
    x: str,
    ys,
    out_path,
    logx: bool = False,
    logy: bool = False,
    title: str | None = None,
) -> Path:
    """Render columns of a table CSV as line plots into an SVG file."""
    columns, data = read_table(csv_path)
    missing = [c for c in [x, *ys] if c not in columns]
    if missing:
        raise ConfigError(
            f"{csv_path} is missing column(s) {', '.join(missing)}; has {', '.join(columns)}"
        )
    if data.shape[0] == 0:
        raise ConfigError(f"{csv_path} has no data rows")
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    xv = data[:, columns.index(x)]
    for yname in ys:
        yv = data[:, columns.index(yname)]
        if logy:
            shown = np.abs(yv)
            label = f"|{yname}|"
        else:
            shown = yv
            label = yname
        ax.plot(xv, shown, label=label)
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(x)
    ax.legend(loc="best")
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    out = save_figure(fig, out_path)
    plt.close(fig)
    return out
