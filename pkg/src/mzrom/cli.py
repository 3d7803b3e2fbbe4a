"""Command-line experiment runner.

Commands mirror the pipeline stages: ``generate`` writes snapshot CSVs,
``reconstruct`` solves operators and writes them, ``predict`` marches the
learned model over the test initial conditions, and ``convergence``,
``finite-memory``, ``regularization``, ``diagnostics`` reproduce the
experiment tables.  Exit codes: 0 on success, 2 for configuration errors,
3 for numerical-stage failures.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import io as mzio
from .ensemble import mask_partial
from .exceptions import ConfigError, MzromError
from .experiments import (
    ExperimentConfig,
    generate_pair,
    predict_for_system,
    reconstruct_full,
    run_convergence,
    run_diagnostics,
    run_finite_memory,
    run_regularization,
)
from .metrics import error_Phi
from .predict import history_cost_estimate
from .reconstruct import solve_R_per_step, solve_finite_memory, solve_partial_regularized
from .reconstruct import solve_R_global

ENV_OUTPUT = "MZROM_OUTPUT_DIR"
HISTORY_WARN_FLOPS = 5e11


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mzrom",
        description="Reconstruct memory-kernel reduced models from snapshot data",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("generate", "integrate the configured case and write snapshot CSVs"),
        ("reconstruct", "solve the configured inverse problem and write operators"),
        ("predict", "march the reconstructed model over the test initial data"),
        ("convergence", "reproduce the error-vs-dt table for one case"),
        ("finite-memory", "sweep the memory support bound"),
        ("regularization", "sweep the time-smoothing weights on partial data"),
        ("diagnostics", "identifiability and conditioning reports"),
    ]:
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, help="JSON experiment config")
        cmd.add_argument("--output", default=None,
                         help=f"output directory (default: config value or ${ENV_OUTPUT})")
        cmd.add_argument("--seed", type=int, default=None,
                         help="override the training seed")
        cmd.add_argument("--threads", type=int, default=1,
                         help="worker threads for independent sweep cells")
    return parser


def _resolve_output(cfg: ExperimentConfig, cli_output):
    return cfg.resolve_output(cli_output or cfg.output_dir or os.environ.get(ENV_OUTPUT) or ".")


def _data_dirs(out: Path, cfg: ExperimentConfig, nt: int):
    stem = cfg.case.replace(":", "_")
    base = out / "data" / f"{stem}_nt{nt}"
    return base / "train", base / "test"


def _ensure_data(cfg: ExperimentConfig, out: Path, nt: int):
    train_dir, test_dir = _data_dirs(out, cfg, nt)
    if (train_dir / "meta.txt").exists() and (test_dir / "meta.txt").exists():
        return mzio.read_ensemble(train_dir), mzio.read_ensemble(test_dir)
    ens, ens_test = generate_pair(cfg, nt)
    if cfg.mode in ("partial", "partial_regularized"):
        mzio.write_ensemble(train_dir, mask_partial(ens))
    else:
        mzio.write_ensemble(train_dir, ens)
    mzio.write_ensemble(test_dir, ens_test)
    return mzio.read_ensemble(train_dir), mzio.read_ensemble(test_dir)


def _cmd_generate(cfg: ExperimentConfig, out: Path, threads: int):
    for nt in cfg.nt_list:
        _ensure_data(cfg, out, nt)
        print(f"wrote snapshot data for {cfg.case} at N_T={nt} under {out}")
    return 0


def _operator_dir(out: Path, cfg: ExperimentConfig, nt: int) -> Path:
    stem = cfg.case.replace(":", "_")
    return out / "operators" / f"{stem}_nt{nt}_{cfg.mode}"


def _cmd_reconstruct(cfg: ExperimentConfig, out: Path, threads: int):
    nt = cfg.nt_list[0]
    ens, _ = _ensure_data(cfg, out, nt)
    sys_ = cfg.system()
    extra = {"mode": cfg.mode, "config_hash": cfg.config_hash()}
    if cfg.mode == "full":
        ops, _ = reconstruct_full(ens, sys_, cfg.scheme)
    elif cfg.mode == "partial":
        from .reconstruct import solve_partial_greedy

        ops = solve_partial_greedy(ens, cfg.scheme, merge_r_into_k0=True).operators
    elif cfg.mode == "partial_regularized":
        lr, lk = cfg.lambda_r[0], cfg.lambda_k[0]
        ops = solve_partial_regularized(ens, lr, lk, cfg.scheme).operators
        extra.update({"lambda_R": lr, "lambda_K": lk})
    else:  # finite_memory
        if sys_.time_invariant:
            r, _, _ = solve_R_global(ens, cfg.scheme)
            r_seq = np.broadcast_to(r, (nt, ens.d, ens.d))
        else:
            r_seq = solve_R_per_step(ens, cfg.scheme)[0]
        m = max(1, int(round(cfg.m_fraction_list[0] * nt)))
        report = solve_finite_memory(ens, r_seq, m, cfg.scheme,
                                     max_iter=cfg.lsqr_max_iter)
        ops = report.operators
        extra.update({"m_support": m,
                      "lsqr_iterations": int(report.lsqr_iterations.max())})
    op_dir = _operator_dir(out, cfg, nt)
    mzio.write_operator_sequence(op_dir, ops, source="reconstruction", extra_meta=extra)
    print(f"wrote operators to {op_dir}")
    return 0


def _cmd_predict(cfg: ExperimentConfig, out: Path, threads: int):
    nt = cfg.nt_list[0]
    op_dir = _operator_dir(out, cfg, nt)
    if not (op_dir / "meta.txt").exists():
        _cmd_reconstruct(cfg, out, threads)
    ops = mzio.read_operator_sequence(op_dir)
    _, ens_test = _ensure_data(cfg, out, nt)
    flops = history_cost_estimate(ops.grid, ops.d) * ens_test.n_traj
    if flops > HISTORY_WARN_FLOPS:
        print(f"warning: history sums estimated at {flops:.2e} flops; "
              "this march is quadratic in the step count", file=sys.stderr)
    pred = predict_for_system(ops, ens_test)
    stem = cfg.case.replace(":", "_")
    pred_dir = out / "predictions" / f"{stem}_nt{nt}_{cfg.mode}"
    pred_dir.mkdir(parents=True, exist_ok=True)
    mzio._write_snapshot_file(pred_dir / "phi_pred.csv", pred, ops.grid.nodes)
    mzio.write_metadata(pred_dir / "meta.txt", {
        "source": "prediction", "case": cfg.case, "scheme": cfg.scheme,
        "mode": cfg.mode, "config_hash": cfg.config_hash(),
    })
    err = error_Phi(pred, ens_test.phi, ops.grid, cfg.scheme)
    print(f"wrote predictions to {pred_dir} (relative trajectory error {err:.3e})")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig.from_file(args.config)
        if args.seed is not None:
            raw = dict(cfg.raw)
            raw["seed_train"] = args.seed
            cfg = ExperimentConfig.from_dict(raw)
        out = _resolve_output(cfg, args.output)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        if args.command == "generate":
            return _cmd_generate(cfg, out, args.threads)
        if args.command == "reconstruct":
            return _cmd_reconstruct(cfg, out, args.threads)
        if args.command == "predict":
            return _cmd_predict(cfg, out, args.threads)
        if args.command == "convergence":
            run_convergence(cfg, out)
        elif args.command == "finite-memory":
            run_finite_memory(cfg, out, threads=args.threads)
        elif args.command == "regularization":
            run_regularization(cfg, out, threads=args.threads)
        elif args.command == "diagnostics":
            run_diagnostics(cfg, out)
        print(f"wrote {args.command} artifacts to {out}")
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except MzromError as exc:
        print(f"{args.command} failed: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
