"""Command-line interface.

Config files are JSON with up to four sections (documented in the README):
``problem``, ``model``, ``training``, ``matrix``.  Subcommands consume the
sections they need and write CSV/JSON outputs for the plotting toolkit.
"""

import os

for _var in ("OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "OMP_NUM_THREADS",
             "NUMEXPR_NUM_THREADS"):
    os.environ.setdefault(_var, "1")  # keep runs bit-reproducible

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import bench
from .bench import (ExperimentMatrix, landscape_slice, probe_intermediates,
                    problem_from_config, run_matrix, success_ratio,
                    write_landscape_table, write_probe_table, write_ratio_tables,
                    write_success_table)
from .errors import ConfigurationError
from .networks import build_model, load_checkpoint, save_checkpoint
from .pde import BoundaryFamily
from .refsolve import SolverConfig, solve_cached
from .training import TrainConfig, train


def _load_config(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _require(cfg: dict, section: str) -> dict:
    if section not in cfg:
        raise ConfigurationError(f"config file is missing the {section!r} section")
    return cfg[section]


def _solver_config(cfg: dict) -> SolverConfig:
    sub = cfg.get("reference", {})
    return SolverConfig(nx=sub.get("nx", 513), dt=sub.get("dt", 1e-4),
                        save_every=sub.get("save_every", 10))


def cmd_train(args) -> int:
    cfg = _load_config(args.config)
    problem = problem_from_config(_require(cfg, "problem"))
    model_cfg = _require(cfg, "model")
    train_cfg = _require(cfg, "training")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    reference = solve_cached(problem, _solver_config(cfg), args.cache)
    model = build_model(model_cfg["kind"], model_cfg["params"], model_cfg["arch"],
                        model_cfg.get("seed", 0))
    config = TrainConfig(
        epochs=train_cfg["epochs"], n_points=train_cfg["n_points"],
        seed=train_cfg.get("seed", 0), eval_every=train_cfg.get("eval_every", 100),
        lr0=train_cfg.get("lr0", 0.01),
        lr_floor_factor=train_cfg.get("lr_floor_factor", 0.1),
        adaptive_weights=train_cfg.get("adaptive_weights", True),
        resample=train_cfg.get("resample", True),
        mse_grid=train_cfg.get("mse_grid", 101))
    result = train(model, problem, config, reference)
    result.log.to_csv(out / "metrics.csv")
    (out / "summary.json").write_text(json.dumps(
        {**result.summary, "problem": _require(cfg, "problem")},
        sort_keys=True, indent=2))
    save_checkpoint(model, out / "checkpoint.json", config.epochs)
    print(f"final MSE {result.log.final_mse():.3e} "
          f"({result.log.resample_count()} resamples) -> {out}")
    return 0


def cmd_reference(args) -> int:
    cfg = _load_config(args.config)
    problem = problem_from_config(_require(cfg, "problem"))
    solution = solve_cached(problem, _solver_config(cfg), args.cache)
    print(f"reference for {problem.label()}: {solution.u.shape[0]} time rows x "
          f"{solution.u.shape[1]} nodes")
    return 0


def cmd_experiment(args) -> int:
    cfg = _load_config(args.config)
    m = _require(cfg, "matrix")
    families = tuple(BoundaryFamily(f["family"], f.get("c")) if isinstance(f, dict)
                     else BoundaryFamily(f) for f in m["families"])
    matrix = ExperimentMatrix(
        l_values=tuple(m["L"]), n_values=tuple(m["N"]), families=families,
        param_counts=tuple(m["param_counts"]), point_counts=tuple(m["point_counts"]),
        seeds=tuple(m["seeds"]), kinds=tuple(m.get("kinds", ["cpinn", "qpinn"])),
        epochs=m.get("epochs", {"cpinn": 100_000, "qpinn": 20_000}),
        eval_every=m.get("eval_every", 100),
        success_threshold=m.get("success_threshold", bench.DEFAULT_SUCCESS_THRESHOLD),
        mse_grid=m.get("mse_grid", 101),
        cpinn_depths=tuple(m.get("cpinn_depths", bench.CPINN_DEPTHS)),
        qpinn_coder_depths=tuple(m.get("qpinn_coder_depths", bench.QPINN_CODER_DEPTHS)))
    records = run_matrix(matrix, args.out, parallelism=args.parallel,
                         cache_dir=args.cache, solver=_solver_config(cfg))
    print(f"{len(records)} representative records -> {args.out}")
    return 0


def cmd_ratios(args) -> int:
    records = json.loads((Path(args.runs) / "records.json").read_text())
    done = write_ratio_tables(records, args.runs)
    print(f"ratio tables for {len(done)} cells -> {args.runs}")
    return 0


def cmd_success(args) -> int:
    records = json.loads((Path(args.runs) / "records.json").read_text())
    report = success_ratio(records, threshold=args.threshold)
    write_success_table(report, Path(args.runs) / "success.csv")
    print(f"success table ({len(report.rows)} groups) -> {args.runs}/success.csv")
    return 0


def cmd_landscape(args) -> int:
    model, _ = load_checkpoint(args.checkpoint)
    cfg = _load_config(args.config)
    problem = problem_from_config(_require(cfg, "problem"))
    reference = solve_cached(problem, _solver_config(cfg), args.cache)
    slice_ = landscape_slice(model, reference, args.i, args.j,
                             args.half_width, args.resolution,
                             eval_grid=args.eval_grid)
    write_landscape_table(slice_, args.out)
    print(f"landscape {slice_.mse.shape} (center MSE {slice_.center_mse:.3e}) "
          f"-> {args.out}")
    return 0


def cmd_probe(args) -> int:
    model, _ = load_checkpoint(args.checkpoint)
    probe = probe_intermediates(model, args.grid)
    write_probe_table(probe, args.out)
    print(f"intermediate signals on a {args.grid}x{args.grid} grid -> {args.out}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pinnlab",
        description="Train and compare classical and hybrid quantum-classical "
                    "PINNs on a parametrized 1-D PDE family.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run a single training")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--cache", default=None, help="reference-solution cache dir")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("reference", help="build/cache a reference solution")
    p.add_argument("--config", required=True)
    p.add_argument("--cache", required=True)
    p.set_defaults(fn=cmd_reference)

    p = sub.add_parser("experiment", help="run a configuration matrix")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--cache", default=None)
    p.add_argument("--parallel", type=int, default=1)
    p.set_defaults(fn=cmd_experiment)

    p = sub.add_parser("ratios", help="epoch/MSE ratio tables from a run dir")
    p.add_argument("--runs", required=True)
    p.set_defaults(fn=cmd_ratios)

    p = sub.add_parser("success", help="success-ratio table from a run dir")
    p.add_argument("--runs", required=True)
    p.add_argument("--threshold", type=float, default=bench.DEFAULT_SUCCESS_THRESHOLD)
    p.set_defaults(fn=cmd_success)

    p = sub.add_parser("landscape", help="MSE slice over two parameters")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--cache", default=None)
    p.add_argument("--i", type=int, required=True)
    p.add_argument("--j", type=int, required=True)
    p.add_argument("--half-width", type=float, default=1.0)
    p.add_argument("--resolution", type=int, default=21)
    p.add_argument("--eval-grid", type=int, default=33)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_landscape)

    p = sub.add_parser("probe", help="encoder/circuit intermediate signals")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--grid", type=int, default=51)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_probe)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigurationError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
