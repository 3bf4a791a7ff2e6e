"""File output: CSV tables and SVG plots stamped with the config hash."""
from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

HASH_KEY = "config_sha256"


def config_hash(config):
    """SHA-256 of the canonical JSON form of ``config``."""
    text = json.dumps(config, sort_keys=True, separators=(",", ":"), default=_jsonable)
    return hashlib.sha256(text.encode()).hexdigest()


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "nan" if not np.isfinite(v) else repr(float(v))
    return str(v)


def write_csv(path, header, rows, digest=None, footer=None):
    """Write ``rows`` under a comma-separated ``header``.

    With ``digest`` a ``# config_sha256=...`` line precedes the header;
    ``footer`` rows are appended after the table.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        if digest:
            fh.write(f"# {HASH_KEY}={digest}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header.split(",") if isinstance(header, str) else header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
        for row in footer or ():
            w.writerow([_fmt(v) for v in row])
    return path


def read_csv(path):
    """Header names and float columns of a CSV written by :func:`write_csv`.

    Comment lines starting with ``#`` are skipped; the first row with a
    different field count or a non-numeric entry (such as a footer) ends
    the table.
    """
    path = Path(path)
    with path.open() as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    data = []
    for row in reader:
        if len(row) != len(header):
            break
        try:
            data.append([float(x) for x in row])
        except ValueError:
            break
    arr = np.array(data, float).reshape(-1, len(header))
    return header, {h: arr[:, i] for i, h in enumerate(header)}


def write_json(path, payload, digest=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if digest:
        payload = {HASH_KEY: digest, **payload}
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_jsonable) + "\n")
    return path


def save_svg(fig, path, digest=None):
    """Save ``fig`` as SVG with stable ids and no timestamp."""
    import matplotlib

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with matplotlib.rc_context({"svg.hashsalt": "weaklink", "svg.fonttype": "none"}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    if digest:
        text = path.read_text()
        head, sep, rest = text.partition("?>\n")
        stamp = f"<!-- {HASH_KEY}={digest} -->\n"
        path.write_text(head + sep + stamp + rest if sep else stamp + text)
    return path


def line_plot(series, xlabel, ylabel, path, digest=None, title=None):
    """Plot ``series`` (label -> (x, y)) as lines and save as SVG."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for label, (x, y) in series.items():
        ax.plot(x, y, label=label, lw=1.2)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if len(series) > 1:
        ax.legend()
    fig.tight_layout()
    save_svg(fig, path, digest)
    plt.close(fig)
    return path


def bar_plot(lefts, widths, heights, path, xlabel, ylabel, extra=None, digest=None):
    """Bar chart with an optional separately coloured extra bar ``(x, width, height)``."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(lefts, heights, width=widths, align="edge", color="tab:blue", edgecolor="k")
    if extra is not None:
        ax.bar(extra[0], extra[2], width=extra[1], align="edge", color="tab:red", edgecolor="k")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    fig.tight_layout()
    save_svg(fig, path, digest)
    plt.close(fig)
    return path


def curve_rows(curve):
    hyb = curve.f_hybridized if curve.f_hybridized is not None else np.full(len(curve), np.nan)
    return zip(curve.flux, curve.f_bare, hyb, curve.well_index, curve.jumped)


CURVE_HEADER = "flux_phi0,f_bare_ghz,f_hyb_ghz,well_index,jumped"
