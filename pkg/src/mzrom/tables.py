"""CSV and Markdown emitters for the experiment tables.

Every emitted row carries the experiment's config hash and scheme tag.
Trajectory errors of one or larger are clamped and rendered ">= 1",
matching the reporting convention for diverged predictions.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Optional

import numpy as np

__all__ = [
    "fmt_err",
    "fmt_rate",
    "write_convergence_table",
    "write_finite_memory_table",
    "write_regularization_table",
    "write_kernel_norm_profile",
]

DIVERGED = ">= 1"


def fmt_err(value: float, clamp: bool = False) -> str:
    if value is None or not np.isfinite(value):
        return DIVERGED if clamp else "nan"
    if clamp and value >= 1.0:
        return DIVERGED
    return f"{value:.2e}"


def fmt_rate(value: Optional[float]) -> str:
    return "---" if value is None else f"{value:.2f}"


def _write_csv(path: Path, header: list, rows: list):
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _write_markdown(path: Path, header: list, rows: list, title: str):
    lines = [f"# {title}", ""]
    lines.append("| " + " | ".join(str(h) for h in header) + " |")
    lines.append("|" + "---|" * len(header))
    for row in rows:
        lines.append("| " + " | ".join(str(c) for c in row) + " |")
    Path(path).write_text("\n".join(lines) + "\n")


def write_convergence_table(out_dir, case: str, rows: list, config_hash: str, scheme: str):
    """rows: (dt, e_phi, e_k, rate_k, e_r, rate_r) per refinement level."""
    out_dir = Path(out_dir)
    header = ["case", "dt", "e_phi", "e_k", "rate_k", "e_r", "rate_r",
              "config_hash", "scheme"]
    table = []
    for dt, e_phi, e_k, rk, e_r, rr in rows:
        table.append([
            case, repr(dt), fmt_err(e_phi),
            fmt_err(e_k) if e_k is not None else "0.00e+00",
            fmt_rate(rk), fmt_err(e_r), fmt_rate(rr), config_hash, scheme,
        ])
    stem = case.replace(":", "_")
    _write_csv(out_dir / f"{stem}_convergence.csv", header, table)
    _write_markdown(out_dir / f"{stem}_convergence.md", header, table,
                    f"Operator and trajectory errors vs dt ({case})")


def write_finite_memory_table(out_dir, case: str, rows: list, config_hash: str, scheme: str):
    """rows: (m_fraction, m, e_phi, iterations)."""
    out_dir = Path(out_dir)
    header = ["case", "m_fraction", "m", "e_phi", "lsqr_iterations",
              "config_hash", "scheme"]
    table = [
        [case, repr(frac), m, fmt_err(e, clamp=True), iters, config_hash, scheme]
        for frac, m, e, iters in rows
    ]
    stem = case.replace(":", "_")
    _write_csv(out_dir / f"{stem}_finite_memory.csv", header, table)
    _write_markdown(out_dir / f"{stem}_finite_memory.md", header, table,
                    f"Prediction error vs memory support ({case})")


def write_regularization_table(out_dir, case: str, lambda_r_list, lambda_k_list,
                               errors: np.ndarray, config_hash: str, scheme: str):
    """errors[i, j] is the trajectory error at (lambda_r_list[i], lambda_k_list[j])."""
    out_dir = Path(out_dir)
    header = ["case", "lambda_r", "lambda_k", "e_phi", "config_hash", "scheme"]
    table = []
    for i, lr in enumerate(lambda_r_list):
        for j, lk in enumerate(lambda_k_list):
            table.append([case, repr(lr), repr(lk),
                          fmt_err(errors[i, j], clamp=True), config_hash, scheme])
    stem = case.replace(":", "_")
    _write_csv(out_dir / f"{stem}_regularization.csv", header, table)

    grid_header = ["lambda_r \\ lambda_k"] + [repr(lk) for lk in lambda_k_list]
    grid_rows = []
    for i, lr in enumerate(lambda_r_list):
        grid_rows.append([repr(lr)] + [fmt_err(errors[i, j], clamp=True)
                                       for j in range(len(lambda_k_list))])
    _write_markdown(out_dir / f"{stem}_regularization.md", grid_header, grid_rows,
                    f"Prediction error vs regularization weights ({case}, scheme={scheme}, "
                    f"config={config_hash})")


def write_kernel_norm_profile(out_dir, case: str, lags: np.ndarray, norms: np.ndarray,
                              config_hash: str, scheme: str):
    out_dir = Path(out_dir)
    header = ["case", "lag_index", "lag_time", "kernel_frobenius_norm",
              "config_hash", "scheme"]
    rows = [
        [case, i, repr(float(t)), repr(float(v)), config_hash, scheme]
        for i, (t, v) in enumerate(zip(lags, norms))
    ]
    stem = case.replace(":", "_")
    _write_csv(out_dir / f"{stem}_kernel_norms.csv", header, rows)
