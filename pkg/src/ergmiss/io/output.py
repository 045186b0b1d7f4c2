"""CSV tables and SVG plots.

Every file starts with a provenance comment ``# config_hash=... base_seed=...``
and contains no timestamps, so identical inputs give identical bytes.
"""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Sequence

import numpy as np

RECORD_FIXED = (
    "network_id", "model", "fraction", "representation", "replicate", "seed", "assumption",
    "target_missing", "n_missing", "na_count", "observed_edges", "centralisation",
    "converged", "failure", "n_iterations",
)
SWEEP_COLUMNS = ("parameter", "level", "quantity", "mean", "lo", "hi", "n_used", "n_failed")


def record_columns(names: Sequence[str]) -> list[str]:
    """Record table header: fixed columns, then per-term estimate columns."""
    cols = list(RECORD_FIXED)
    for prefix in ("theta", "se", "mc_se", "mu_zero"):
        cols += [f"{prefix}[{n}]" for n in names]
    return cols


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def record_row(r, names) -> list[str]:
    res = r.result
    p = len(names)
    mc = res.mc_se if res.mc_se is not None else np.full(p, np.nan)
    row = [r.network_id, r.model, r.fraction, r.representation, r.replicate, r.seed,
           r.assumption, r.target_missing, r.n_missing, r.na_count, r.observed_edges,
           r.centralisation, res.converged, r.failure or "", res.n_iterations]
    row += list(res.theta_hat) + list(res.se) + list(mc) + list(r.mu_zero)
    return [fmt(v) for v in row]


def provenance(config_hash: str, seed: int) -> str:
    return f"# config_hash={config_hash} base_seed={int(seed)}"


class OutputError(OSError):
    pass


def _write(path: Path, text: str):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as err:
        raise OutputError(f"cannot write {path}: {err.strerror or err}") from err


def csv_text(header: Sequence[str], rows, comment: str | None = None) -> str:
    buf = io.StringIO()
    if comment:
        buf.write(comment + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_records(records, names, path, config_hash: str = "none", seed: int = 0) -> Path:
    path = Path(path)
    rows = [record_row(r, names) for r in records]
    _write(path, csv_text(record_columns(names), rows, provenance(config_hash, seed)))
    return path


def write_dicts(rows: Sequence[dict], path, columns: Sequence[str] | None = None,
                config_hash: str = "none", seed: int = 0) -> Path:
    path = Path(path)
    if columns is None:
        columns = list(rows[0]) if rows else []
    body = [[row.get(c) for c in columns] for row in rows]
    _write(path, csv_text(columns, body, provenance(config_hash, seed)))
    return path


def write_json(obj, path, config_hash: str = "none", seed: int = 0) -> Path:
    path = Path(path)
    doc = {"provenance": {"config_hash": config_hash, "base_seed": int(seed)}, **obj}
    _write(path, json.dumps(doc, indent=1, sort_keys=True, allow_nan=False,
                            default=_json_default) + "\n")
    return path


def _json_default(o):
    if isinstance(o, np.ndarray):
        return [None if not np.isfinite(v) else float(v) for v in o.ravel()]
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not serialisable: {type(o).__name__}")


def sweep_rows(table) -> list[dict]:
    return [dict(parameter=table.parameter, **row) for row in table.rows]


def write_sweep(table, path, config_hash="none", seed=0) -> Path:
    return write_dicts(sweep_rows(table), path, SWEEP_COLUMNS, config_hash, seed)


def _slug(text: str) -> str:
    return "".join(c if c.isalnum() else "_" for c in text).strip("_")


def plot_sweep(table, out_dir, config_hash="none", seed=0) -> list[Path]:
    """One SVG per quantity: mean line, 95% band, reference line where known.

    Estimate plots use the baseline estimate as reference; zero-imputed
    statistic plots use the complete network's statistics.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    quantities = []
    for row in table.rows:
        if row["quantity"] not in quantities:
            quantities.append(row["quantity"])
    levels = np.asarray(table.levels, dtype=float)
    paths = []
    with matplotlib.rc_context({"svg.hashsalt": f"ergmiss-{config_hash}-{seed}",
                                "svg.fonttype": "none"}):
        for q in quantities:
            ref = None
            if q.startswith("theta:") and table.baseline is not None:
                ref = table.baseline[table.names.index(q.split(":", 1)[1])]
            elif q.startswith("mu_zero:") and table.observed_stats is not None:
                ref = table.observed_stats[table.names.index(q.split(":", 1)[1])]
            mean, lo, hi = (table.column(q, w) for w in ("mean", "lo", "hi"))
            fig, ax = plt.subplots(figsize=(4.5, 3.2))
            ax.fill_between(levels, lo, hi, color="0.8", label="95% interval")
            ax.plot(levels, mean, color="k", marker="o", label="mean")
            if ref is not None and np.isfinite(ref):
                ax.axhline(ref, color="navy", lw=1.5, label="reference")
            ax.set_xlabel(table.parameter)
            ax.set_ylabel(q)
            ax.legend(fontsize=7, frameon=False)
            fig.tight_layout()
            path = out_dir / f"sweep_{_slug(table.parameter)}_{_slug(q)}.svg"
            buf = io.StringIO()
            fig.savefig(buf, format="svg", metadata={"Date": None})
            plt.close(fig)
            svg = buf.getvalue()
            svg = svg.replace("\n", "\n<!-- " + provenance(config_hash, seed)[2:] + " -->\n", 1)
            _write(path, svg)
            paths.append(path)
    return paths


def emit_outputs(out_dir, *, records=None, names=None, sweep=None, config_hash="none",
                 seed=0, extra_tables: dict | None = None) -> list[Path]:
    """Write record tables and/or sweep tables and plots to ``out_dir``."""
    out_dir = Path(out_dir)
    written = []
    if records is not None:
        if names is None:
            names = records[0].result.names if records else []
        written.append(write_records(records, names, out_dir / "records.csv", config_hash, seed))
    if sweep is not None:
        written.append(write_sweep(sweep, out_dir / f"sweep_{_slug(sweep.parameter)}.csv",
                                   config_hash, seed))
        if sweep.rows:
            written += plot_sweep(sweep, out_dir, config_hash, seed)
    for name, rows in (extra_tables or {}).items():
        written.append(write_dicts(rows, out_dir / f"{name}.csv", None, config_hash, seed))
    return written
