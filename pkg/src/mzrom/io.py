"""CSV persistence for snapshot ensembles and operator sequences.

Snapshot files use the header ``t,traj,comp_0,...,comp_{k-1}`` with rows
sorted by (t, traj); each ensemble writes separate files for the resolved
snapshots, unresolved snapshots, resolved derivatives and the two forcing
families (plus half-node resolved forcing when present).  Operator files
use ``n,row,col,value``.  A key-value sidecar carries scheme tags, seeds
and solver metadata.  Floats are written with repr-roundtrip precision, so
identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Optional

import numpy as np

from .ensemble import SnapshotEnsemble
from .exceptions import InvalidArgumentError
from .grids import TimeGrid
from .operators import OperatorSequence

__all__ = [
    "write_ensemble",
    "read_ensemble",
    "write_operator_sequence",
    "read_operator_sequence",
    "write_metadata",
    "read_metadata",
]

_ENSEMBLE_FILES = {
    "phi": "phi.csv",
    "phi_tilde": "phi_tilde.csv",
    "phi_dot": "phi_dot.csv",
    "g": "g.csv",
    "g_tilde": "g_tilde.csv",
    "g_half": "g_half.csv",
}


def _fmt(x: float) -> str:
    return repr(float(x))


def _write_snapshot_file(path: Path, data: np.ndarray, times: np.ndarray):
    """data: (n_times, n_traj, k) matching the ``times`` vector."""
    k = data.shape[2]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "traj"] + [f"comp_{j}" for j in range(k)])
        for it, t in enumerate(times):
            ts = _fmt(t)
            for traj in range(data.shape[1]):
                writer.writerow([ts, traj] + [_fmt(v) for v in data[it, traj]])


def _read_snapshot_file(path: Path):
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        k = len(header) - 2
        rows = [(float(r[0]), int(r[1]), [float(v) for v in r[2:]]) for r in reader]
    times = sorted({t for t, _, _ in rows})
    n_traj = 1 + max(traj for _, traj, _ in rows)
    data = np.empty((len(times), n_traj, k))
    t_index = {t: i for i, t in enumerate(times)}
    for t, traj, vals in rows:
        data[t_index[t], traj] = vals
    return np.asarray(times), data


def write_metadata(path: Path, meta: dict):
    with Path(path).open("w") as fh:
        for key in sorted(meta):
            fh.write(f"{key}={meta[key]}\n")


def read_metadata(path: Path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        if line.strip():
            key, _, value = line.partition("=")
            out[key] = value
    return out


def write_ensemble(directory, ens: SnapshotEnsemble):
    """Write one ensemble into a directory (created if missing)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    nodes = ens.grid.nodes
    _write_snapshot_file(directory / _ENSEMBLE_FILES["phi"], ens.phi, nodes)
    tilde_times = nodes if ens.observation_mode == "full" else nodes[:1]
    _write_snapshot_file(directory / _ENSEMBLE_FILES["phi_tilde"], ens.phi_tilde, tilde_times)
    _write_snapshot_file(directory / _ENSEMBLE_FILES["phi_dot"], ens.phi_dot, nodes)
    _write_snapshot_file(directory / _ENSEMBLE_FILES["g"], ens.g, nodes)
    _write_snapshot_file(directory / _ENSEMBLE_FILES["g_tilde"], ens.g_tilde, nodes)
    _write_snapshot_file(directory / _ENSEMBLE_FILES["g_half"], ens.g_half, ens.grid.half_nodes)
    meta = {k: v for k, v in ens.meta.items() if not k.startswith("_")}
    meta.update({
        "observation_mode": ens.observation_mode,
        "horizon": _fmt(ens.grid.horizon),
        "n_steps": ens.grid.n_steps,
    })
    write_metadata(directory / "meta.txt", meta)


def read_ensemble(directory) -> SnapshotEnsemble:
    directory = Path(directory)
    meta = read_metadata(directory / "meta.txt")
    grid = TimeGrid(float(meta.pop("horizon")), int(meta.pop("n_steps")))
    mode = meta.pop("observation_mode")
    arrays = {}
    for name, fname in _ENSEMBLE_FILES.items():
        _, arrays[name] = _read_snapshot_file(directory / fname)
    return SnapshotEnsemble(grid=grid, observation_mode=mode, meta=meta, **arrays)


def _write_operator_file(path: Path, seq: np.ndarray):
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "row", "col", "value"])
        for n in range(seq.shape[0]):
            for i in range(seq.shape[1]):
                for j in range(seq.shape[2]):
                    writer.writerow([n, i, j, _fmt(seq[n, i, j])])


def _read_operator_file(path: Path) -> np.ndarray:
    entries = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for n, i, j, v in reader:
            entries.append((int(n), int(i), int(j), float(v)))
    nt = 1 + max(e[0] for e in entries)
    rows = 1 + max(e[1] for e in entries)
    cols = 1 + max(e[2] for e in entries)
    out = np.empty((nt, rows, cols))
    for n, i, j, v in entries:
        out[n, i, j] = v
    return out


def write_operator_sequence(directory, ops: OperatorSequence,
                            source: str = "reconstruction",
                            extra_meta: Optional[dict] = None):
    """Write R/K/B files plus a sidecar recording scheme and provenance."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    _write_operator_file(directory / "r.csv", ops.R)
    _write_operator_file(directory / "k.csv", ops.K)
    _write_operator_file(directory / "b.csv", ops.B)
    meta = {
        "scheme": ops.scheme,
        "source": source,
        "horizon": _fmt(ops.grid.horizon),
        "n_steps": ops.grid.n_steps,
    }
    meta.update({f"offset_{k}": v for k, v in ops.time_offsets.items()})
    if extra_meta:
        meta.update(extra_meta)
    write_metadata(directory / "meta.txt", meta)


def read_operator_sequence(directory) -> OperatorSequence:
    directory = Path(directory)
    meta = read_metadata(directory / "meta.txt")
    grid = TimeGrid(float(meta["horizon"]), int(meta["n_steps"]))
    r = _read_operator_file(directory / "r.csv")
    k = _read_operator_file(directory / "k.csv")
    b = _read_operator_file(directory / "b.csv")
    if "scheme" not in meta:
        raise InvalidArgumentError(f"operator sidecar in {directory} lacks a scheme tag")
    return OperatorSequence(grid, meta["scheme"], r, k, b)
