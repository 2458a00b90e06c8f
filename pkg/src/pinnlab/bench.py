"""Experiment harness: run the configuration matrix, aggregate medians,
compute epoch/MSE/success ratios, export landscape slices and probes.

A matrix cell is one (PDE, parameter count, collocation count) combination;
for each cell every cPINN hidden depth in 1..6 and every qPINN coder depth in
{0, 1} is trained per seed, and the representative record per kind is the
candidate with the lowest median final MSE across seeds.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DivergenceError, StructuralError
from .networks import ModelHandle, build_model, hybrid_signals
from .pde import BoundaryFamily, Domain, PdeProblem
from .refsolve import SolverConfig, mse as reference_mse, solve_cached
from .training import MetricsLog, TrainConfig, train

CPINN_DEPTHS = (1, 2, 3, 4, 5, 6)
QPINN_CODER_DEPTHS = (0, 1)
DEFAULT_SUCCESS_THRESHOLD = 1e-2
THRESHOLDS_PER_DECADE = 8


# --------------------------------------------------------------------------
# matrix description


@dataclass(frozen=True)
class ExperimentMatrix:
    l_values: tuple[float, ...]
    n_values: tuple[float, ...]
    families: tuple[BoundaryFamily, ...]
    param_counts: tuple[int, ...]
    point_counts: tuple[int, ...]
    seeds: tuple[int, ...]
    kinds: tuple[str, ...] = ("cpinn", "qpinn")
    epochs: dict = field(default_factory=lambda: {"cpinn": 100_000, "qpinn": 20_000})
    eval_every: int = 100
    success_threshold: float = DEFAULT_SUCCESS_THRESHOLD
    mse_grid: int = 101
    cpinn_depths: tuple[int, ...] = CPINN_DEPTHS
    qpinn_coder_depths: tuple[int, ...] = QPINN_CODER_DEPTHS

    def __post_init__(self):
        for kind in self.kinds:
            if kind not in ("cpinn", "qpinn"):
                raise ConfigurationError(f"unknown model kind {kind!r}")
            if kind not in self.epochs:
                raise ConfigurationError(f"missing epoch budget for {kind!r}")

    def cells(self) -> list["Cell"]:
        out = []
        for lin in self.l_values:
            for nonlin in self.n_values:
                for fam in self.families:
                    problem = PdeProblem(lin, nonlin, fam, Domain())
                    for n_params in self.param_counts:
                        for n_points in self.point_counts:
                            out.append(Cell(problem, n_params, n_points))
        return out

    def candidates(self, kind: str) -> tuple[int, ...]:
        return self.cpinn_depths if kind == "cpinn" else self.qpinn_coder_depths


@dataclass(frozen=True)
class Cell:
    problem: PdeProblem
    n_params: int
    n_points: int

    @property
    def cell_id(self) -> str:
        return f"{self.problem.label()}_p{self.n_params}_n{self.n_points}"


def run_seed_for(cell_id: str, kind: str, arch: int, seed: int) -> int:
    """Stable per-run seed derived from the run coordinates."""
    key = f"{cell_id}|{kind}|a{arch}|s{seed}".encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:4], "big")


# --------------------------------------------------------------------------
# matrix execution


def _problem_config(problem: PdeProblem) -> dict:
    return {"L": problem.lin, "N": problem.nonlin, "family": problem.family.name,
            "c": problem.family.c}


def problem_from_config(cfg: dict) -> PdeProblem:
    return PdeProblem(cfg["L"], cfg["N"], BoundaryFamily(cfg["family"], cfg.get("c")),
                      Domain())


def _run_task(task: dict) -> dict:
    """Worker: train one (cell, kind, arch, seed) run and write its outputs."""
    csv_path = Path(task["csv_path"])
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    record = {
        "cell_id": task["cell_id"],
        "kind": task["kind"],
        "arch": task["arch"],
        "seed": task["seed"],
        "run_seed": task["run_seed"],
        "csv_path": str(csv_path),
        "summary_path": task["summary_path"],
    }
    try:
        problem = problem_from_config(task["problem"])
        solver = SolverConfig(**task["solver"])
        reference = solve_cached(problem, solver, task["cache_dir"])
        ss = np.random.SeedSequence(task["run_seed"])
        model_seed, train_seed = (int(s) for s in ss.generate_state(2))
        model = build_model(task["kind"], task["n_params"], task["arch"], model_seed)
        cfg = TrainConfig(epochs=task["epochs"], n_points=task["n_points"],
                          seed=train_seed, eval_every=task["eval_every"],
                          mse_grid=task["mse_grid"],
                          adaptive_weights=task.get("adaptive_weights", True),
                          resample=task.get("resample", True))
        result = train(model, problem, cfg, reference)
    except (DivergenceError, ConfigurationError) as err:
        record.update(status="aborted", final_mse=None, error=str(err))
        summary = {**record, "problem": task["problem"]}
    else:
        result.log.to_csv(csv_path)
        record.update(status="ok", final_mse=result.log.final_mse())
        summary = {**record, **result.summary, "problem": task["problem"],
                   "actual_params": model.actual}
    Path(task["summary_path"]).write_text(json.dumps(summary, sort_keys=True, indent=2))
    return record


def _single_thread_blas_env() -> None:
    for var in ("OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "OMP_NUM_THREADS",
                "NUMEXPR_NUM_THREADS"):
        os.environ.setdefault(var, "1")


def run_matrix(matrix: ExperimentMatrix, out_dir, parallelism: int = 1,
               cache_dir=None, solver: SolverConfig = SolverConfig()) -> list[dict]:
    """Execute every run of the matrix and write per-run and merged outputs.

    Returns the representative cell records (one per cell and kind).
    """
    _single_thread_blas_env()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cache_dir = Path(cache_dir) if cache_dir else out_dir / "references"

    cells = matrix.cells()
    for cell in cells:  # solve references up front, sequentially
        solve_cached(cell.problem, solver, cache_dir)

    tasks = []
    for cell in cells:
        for kind in matrix.kinds:
            for arch in matrix.candidates(kind):
                for seed in matrix.seeds:
                    run_name = f"{kind}_a{arch}_s{seed}"
                    run_dir = out_dir / "runs" / cell.cell_id
                    tasks.append({
                        "cell_id": cell.cell_id,
                        "problem": _problem_config(cell.problem),
                        "solver": {"nx": solver.nx, "dt": solver.dt,
                                   "save_every": solver.save_every},
                        "cache_dir": str(cache_dir),
                        "kind": kind,
                        "arch": arch,
                        "seed": seed,
                        "run_seed": run_seed_for(cell.cell_id, kind, arch, seed),
                        "n_params": cell.n_params,
                        "n_points": cell.n_points,
                        "epochs": matrix.epochs[kind],
                        "eval_every": matrix.eval_every,
                        "mse_grid": matrix.mse_grid,
                        "csv_path": str(run_dir / f"{run_name}.csv"),
                        "summary_path": str(run_dir / f"{run_name}.summary.json"),
                    })

    if parallelism > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            run_records = list(pool.map(_run_task, tasks))
    else:
        run_records = [_run_task(t) for t in tasks]

    records = select_representatives(run_records)
    (out_dir / "records.json").write_text(json.dumps(records, sort_keys=True, indent=2))
    write_median_table(records, out_dir / "medians.csv")
    return records


def _lower_median(values: list[float]) -> float:
    vals = sorted(values)
    return vals[(len(vals) - 1) // 2]


def select_representatives(run_records: list[dict]) -> list[dict]:
    """Per (cell, kind): keep the candidate arch with the lowest median final
    MSE across seeds; aborted runs count as infinitely bad but stay recorded."""
    groups: dict[tuple[str, str], dict[int, list[dict]]] = {}
    for rec in run_records:
        by_arch = groups.setdefault((rec["cell_id"], rec["kind"]), {})
        by_arch.setdefault(rec["arch"], []).append(rec)
    out = []
    for (cell_id, kind), by_arch in sorted(groups.items()):
        scored = []
        for arch, runs in sorted(by_arch.items()):
            finals = [r["final_mse"] if r["status"] == "ok" and r["final_mse"] is not None
                      else float("inf") for r in runs]
            scored.append((_lower_median(finals), arch, runs))
        best = min(scored, key=lambda s: (s[0], s[1]))
        out.append({
            "cell_id": cell_id,
            "kind": kind,
            "arch": best[1],
            "median_final_mse": None if np.isinf(best[0]) else best[0],
            "runs": best[2],
            "all_runs": [r for runs in by_arch.values() for r in runs],
        })
    return out


# --------------------------------------------------------------------------
# aggregation


def median_curve(logs: list[MetricsLog]) -> tuple[np.ndarray, np.ndarray]:
    """Per cadence epoch, the (lower) median MSE across runs."""
    if not logs:
        raise StructuralError("need at least one metrics log")
    curves = [log.mse_curve() for log in logs]
    epochs = curves[0][0]
    for e, _ in curves[1:]:
        if not np.array_equal(e, epochs):
            raise StructuralError("metrics logs do not share an evaluation cadence")
    stacked = np.stack([m for _, m in curves])
    k = stacked.shape[0]
    med = np.sort(stacked, axis=0)[(k - 1) // 2]
    return epochs, med


def record_median_curve(record: dict) -> tuple[np.ndarray, np.ndarray]:
    logs = [MetricsLog.from_csv(r["csv_path"]) for r in record["runs"]
            if r["status"] == "ok"]
    if not logs:
        raise StructuralError(f"no completed runs in record {record['cell_id']}")
    return median_curve(logs)


def epochs_to_reach(curve: tuple[np.ndarray, np.ndarray], threshold: float):
    """First cadence epoch whose MSE is at or below the threshold, else None."""
    epochs, mses = curve
    if len(epochs) == 0:
        raise StructuralError("empty MSE curve")
    hits = np.nonzero(mses <= threshold)[0]
    return int(epochs[hits[0]]) if hits.size else None


@dataclass
class EpochRatioEntry:
    threshold: float
    epochs_qpinn: int | None
    epochs_cpinn: int | None
    ratio: float | None

    @property
    def status(self) -> str:
        if self.epochs_qpinn is None and self.epochs_cpinn is None:
            return "both_not_reached"
        if self.epochs_qpinn is None:
            return "qpinn_not_reached"
        if self.epochs_cpinn is None:
            return "cpinn_not_reached"
        return "ok"


@dataclass
class RatioCurves:
    epoch_ratio: list[EpochRatioEntry]
    mse_ratio: list[tuple[int, float, float, float]]  # epoch, mse_q, mse_c, q/c
    general_accuracy_limit: float
    empty_threshold_range: bool = False


def threshold_ladder(hi: float, lo: float,
                     per_decade: int = THRESHOLDS_PER_DECADE) -> np.ndarray:
    """Descending log-spaced thresholds covering [lo, hi]."""
    if lo > hi:
        return np.zeros(0)
    if lo == hi:
        return np.array([hi])
    decades = np.log10(hi) - np.log10(lo)
    count = max(2, int(np.ceil(per_decade * decades)) + 1)
    return np.logspace(np.log10(hi), np.log10(lo), count)


def ratio_curves(q_curve, c_curve) -> RatioCurves:
    """Training-efficiency ratios of a qPINN curve against a cPINN curve."""
    qe, qm = q_curve
    ce, cm = c_curve
    if len(qe) == 0 or len(ce) == 0:
        raise StructuralError("ratio curves need non-empty MSE curves")

    common, qi, ci = np.intersect1d(qe, ce, return_indices=True)
    mse_ratio = [(int(e), float(qm[a]), float(cm[b]), float(qm[a] / cm[b]))
                 for e, a, b in zip(common, qi, ci)]

    hi = max(qm[0], cm[0])
    lo = min(qm[-1], cm[-1])
    ladder = threshold_ladder(hi, lo)
    entries = []
    for thr in ladder:
        eq = epochs_to_reach(q_curve, thr)
        ec = epochs_to_reach(c_curve, thr)
        if eq is None or ec is None:
            ratio = None
        elif ec > 0:
            ratio = eq / ec
        else:  # both reached before any training: equal; one-sided zero: inf
            ratio = 1.0 if eq == 0 else float("inf")
        entries.append(EpochRatioEntry(float(thr), eq, ec, ratio))
    return RatioCurves(entries, mse_ratio, general_accuracy_limit=float(qm[-1]),
                       empty_threshold_range=(ladder.size == 0))


@dataclass
class SuccessReport:
    rows: list[dict]  # {family, n_points, kind, successes, total, ratio}
    threshold: float


def success_ratio(records: list[dict], run_summaries: dict | None = None,
                  threshold: float = DEFAULT_SUCCESS_THRESHOLD) -> SuccessReport:
    """Fraction of representative runs with final MSE at or below threshold,
    grouped by (family, collocation count, kind)."""
    groups: dict[tuple, list[bool]] = {}
    for record in records:
        for run in record["runs"]:
            summary = json.loads(Path(run["summary_path"]).read_text())
            family = summary["problem"]["family"]
            n_points = summary.get("n_points")
            if n_points is None:  # aborted before training began
                n_points = int(record["cell_id"].rsplit("_n", 1)[1])
            key = (family, n_points, record["kind"])
            ok = run["status"] == "ok" and run["final_mse"] is not None \
                and run["final_mse"] <= threshold
            groups.setdefault(key, []).append(ok)
    rows = []
    for (family, n_points, kind), flags in sorted(groups.items()):
        rows.append({
            "family": family,
            "n_points": n_points,
            "kind": kind,
            "successes": int(sum(flags)),
            "total": len(flags),
            "ratio": float(sum(flags)) / len(flags),
        })
    return SuccessReport(rows, threshold)


# --------------------------------------------------------------------------
# probes


@dataclass
class LandscapeSlice:
    i: int
    j: int
    theta_i: np.ndarray
    theta_j: np.ndarray
    mse: np.ndarray  # (len(theta_i), len(theta_j))
    center_mse: float
    eval_grid: int


def landscape_slice(model: ModelHandle, reference, i: int, j: int,
                    half_width: float, resolution: int,
                    eval_grid: int = 33) -> LandscapeSlice:
    """MSE over a 2-parameter grid with all other parameters frozen."""
    n = len(model.params)
    if not (0 <= i < n and 0 <= j < n) or i == j:
        raise StructuralError("landscape needs two distinct valid parameter indices")
    if resolution < 1 or half_width < 0:
        raise ConfigurationError("resolution must be >= 1 and half-width >= 0")
    vals = model.params.values
    ci, cj = vals[i], vals[j]
    if half_width == 0 or resolution == 1:
        ti = np.array([ci])
        tj = np.array([cj])
    else:
        ti = np.linspace(ci - half_width, ci + half_width, resolution)
        tj = np.linspace(cj - half_width, cj + half_width, resolution)
    out = np.empty((ti.size, tj.size))
    try:
        for a, va in enumerate(ti):
            for b, vb in enumerate(tj):
                vals[i], vals[j] = va, vb
                out[a, b] = reference_mse(model, reference, grid=eval_grid)
    finally:
        vals[i], vals[j] = ci, cj
    center = reference_mse(model, reference, grid=eval_grid)
    return LandscapeSlice(i, j, ti, tj, out, center, eval_grid)


def probe_intermediates(model: ModelHandle, grid_n: int, domain: Domain = Domain()):
    """Encoder outputs i_j and circuit outputs o_j on a uniform (t, x) grid."""
    tt, xx = np.meshgrid(np.linspace(0.0, domain.t_max, grid_n),
                         np.linspace(domain.x_lo, domain.x_hi, grid_n),
                         indexing="ij")
    i_sig, o_sig = hybrid_signals(model, tt.ravel(), xx.ravel())
    return {"t": tt.ravel(), "x": xx.ravel(), "i": i_sig, "o": o_sig}


# --------------------------------------------------------------------------
# merged tables


def write_median_table(records: list[dict], path) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["cell_id", "kind", "arch", "epoch", "mse_median"])
    for record in sorted(records, key=lambda r: (r["cell_id"], r["kind"])):
        try:
            epochs, med = record_median_curve(record)
        except StructuralError:
            continue
        for e, m in zip(epochs, med):
            w.writerow([record["cell_id"], record["kind"], record["arch"],
                        int(e), repr(float(m))])
    Path(path).write_text(buf.getvalue())


def write_ratio_tables(records: list[dict], out_dir) -> list[str]:
    """Pair representative qPINN/cPINN records per cell and write both ratio
    tables; returns the cells processed."""
    out_dir = Path(out_dir)
    by_cell: dict[str, dict[str, dict]] = {}
    for record in records:
        by_cell.setdefault(record["cell_id"], {})[record["kind"]] = record

    eb = io.StringIO()
    ew = csv.writer(eb, lineterminator="\n")
    ew.writerow(["cell_id", "threshold", "epochs_qpinn", "epochs_cpinn",
                 "epoch_ratio", "status"])
    mb = io.StringIO()
    mw = csv.writer(mb, lineterminator="\n")
    mw.writerow(["cell_id", "epoch", "mse_qpinn", "mse_cpinn", "mse_ratio"])

    done = []
    for cell_id, kinds in sorted(by_cell.items()):
        if "cpinn" not in kinds or "qpinn" not in kinds:
            continue
        rc = ratio_curves(record_median_curve(kinds["qpinn"]),
                          record_median_curve(kinds["cpinn"]))
        for e in rc.epoch_ratio:
            ew.writerow([cell_id, repr(e.threshold),
                         "" if e.epochs_qpinn is None else e.epochs_qpinn,
                         "" if e.epochs_cpinn is None else e.epochs_cpinn,
                         "" if e.ratio is None else repr(e.ratio), e.status])
        for epoch, mq, mc, ratio in rc.mse_ratio:
            mw.writerow([cell_id, epoch, repr(mq), repr(mc), repr(ratio)])
        done.append(cell_id)
    (out_dir / "epoch_ratios.csv").write_text(eb.getvalue())
    (out_dir / "mse_ratios.csv").write_text(mb.getvalue())
    return done


def write_success_table(report: SuccessReport, path) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["family", "n_points", "kind", "successes", "total", "ratio",
                "threshold"])
    for row in report.rows:
        w.writerow([row["family"], row["n_points"], row["kind"], row["successes"],
                    row["total"], repr(row["ratio"]), repr(report.threshold)])
    Path(path).write_text(buf.getvalue())


def write_landscape_table(slice_: LandscapeSlice, path) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["theta_i", "theta_j", "mse"])
    for a, va in enumerate(slice_.theta_i):
        for b, vb in enumerate(slice_.theta_j):
            w.writerow([repr(float(va)), repr(float(vb)),
                        repr(float(slice_.mse[a, b]))])
    Path(path).write_text(buf.getvalue())


def write_probe_table(probe: dict, path) -> None:
    nq = probe["i"].shape[0]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "x"] + [f"i{j}" for j in range(nq)] + [f"o{j}" for j in range(nq)])
    for k in range(probe["t"].size):
        row = [repr(float(probe["t"][k])), repr(float(probe["x"][k]))]
        row += [repr(float(probe["i"][j, k])) for j in range(nq)]
        row += [repr(float(probe["o"][j, k])) for j in range(nq)]
        w.writerow(row)
    Path(path).write_text(buf.getvalue())
