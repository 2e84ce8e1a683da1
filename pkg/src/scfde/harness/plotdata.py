"""Long-format plot data keyed to figure ids, derived from a finished run directory."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .runner import write_csv

# figure id -> (source, x column, y column, error kind, output columns)
FIGURES = {
    "fig5a": ("results", "backoff_dB", "air_bps", "air", ["receiver", "backoff_dB", "air_bps", "err"]),
    "fig5b": ("results", "backoff_dB", "ber", "ber", ["receiver", "backoff_dB", "ber", "err"]),
    "fig6a": ("results", "snr_dB", "air_bps", "air", ["receiver", "snr_dB", "air_bps", "err"]),
    "fig6b": ("results", "snr_dB", "ber", "ber", ["receiver", "snr_dB", "ber", "err"]),
    "fig7a": ("results", "snr_dB", "air_bps", "air", ["receiver", "snr_dB", "air_bps", "err"]),
    "fig7b": ("results", "snr_dB", "ber", "ber", ["receiver", "snr_dB", "ber", "err"]),
    "fig9": ("results", "snr_dB", "p_out", "p_out", ["receiver", "snr_dB", "p_out", "err"]),
    "fig10a": ("results", "backoff_dB", "ber", "ber", ["receiver", "backoff_dB", "ber", "err"]),
    "fig10b": ("results", "snr_dB", "ber", "ber", ["receiver", "snr_dB", "ber", "err"]),
    "fig8": ("scatter", None, None, None, ["receiver", "re", "im"]),
    "fig3": ("spectra", None, None, None, ["series", "omega", "psd_dB"]),
}


def figure_ids() -> list[str]:
    return sorted(FIGURES, key=lambda f: (int("".join(c for c in f if c.isdigit())), f))


def _num(s: str) -> float:
    return float(s) if s not in ("", None) else float("nan")


def _error(row: dict, kind: str) -> float:
    if kind == "air":
        return _num(row["air_stderr"])
    if kind == "ber":
        return 0.5 * (_num(row["ber_ci_high"]) - _num(row["ber_ci_low"]))
    p = _num(row["p_out"])
    n = _num(row["blocks"])
    return float(np.sqrt(p * (1.0 - p) / n)) if n > 0 else float("nan")


def emit_plotdata(rows: list, figure_id: str) -> tuple[list, list]:
    """Columns and rows of one figure's long-format table.

    ``rows`` are result rows (string or numeric values) for results-based
    figures, scatter rows for ``fig8`` and ``(series, omega, psd)`` triples
    for ``fig3``. An empty input yields a header-only table.
    """
    if figure_id not in FIGURES:
        raise ValueError(f"unknown figure id {figure_id!r}; choose from {figure_ids()}")
    source, x, y, kind, cols = FIGURES[figure_id]
    out = []
    if source == "results":
        for r in rows:
            if kind == "p_out" and r.get("p_out") in ("", None):
                continue
            out.append({"receiver": r["receiver"], x: r[x], y: r[y], "err": _error(r, kind)})
    elif source == "scatter":
        out = [{"receiver": r["receiver"], "re": r["re"], "im": r["im"]} for r in rows]
    else:
        out = [{"series": s, "omega": w, "psd_dB": 10.0 * np.log10(max(float(p), 1e-300))} for s, w, p in rows]
    return cols, out


def _read(path: Path) -> list:
    if not path.is_file():
        return []
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _spectra_rows(run_dir: Path) -> list:
    rows = []
    for path in sorted(run_dir.glob("spectra_*.csv")):
        profile = path.stem[len("spectra_"):]
        for r in _read(path):
            for col, val in r.items():
                if col == "omega":
                    continue
                _, term, branch = col.split("_")
                rows.append((f"{profile}/{term}/{branch}", r["omega"], val))
    return rows


def write_plotdata(run_dir, figure_id: str, out_dir=None) -> Path:
    """Write ``<figure_id>.csv`` for a finished run; returns the file path."""
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise FileNotFoundError(f"run directory {run_dir} not found")
    if figure_id not in FIGURES:
        raise ValueError(f"unknown figure id {figure_id!r}; choose from {figure_ids()}")
    source = FIGURES[figure_id][0]
    if source == "results":
        rows = _read(run_dir / "results.csv")
        if rows and "receiver" not in rows[0]:
            rows = []
    elif source == "scatter":
        rows = _read(run_dir / "scatter.csv")
    else:
        rows = _spectra_rows(run_dir)
    cols, out = emit_plotdata(rows, figure_id)
    dest = Path(out_dir) if out_dir is not None else run_dir
    dest.mkdir(parents=True, exist_ok=True)
    path = dest / f"{figure_id}.csv"
    write_csv(path, cols, out)
    return path
