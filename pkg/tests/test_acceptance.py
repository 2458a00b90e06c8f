"""Acceptance suite: every criterion at its stated tolerance.

Each test prints one PASS/FAIL line.  The last three tests train real
networks at desk scale (the spec's scaled-down substitute for the full
campaign); the headline-reproduction test runs for hours.  Set
PINNLAB_ACCEPTANCE_DIR to keep the training outputs, otherwise pytest tmp
dirs are used.
"""

import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import pytest
from scipy.stats import qmc

from pinnlab.autodiff import JetVar, ParamVector, Tape, check_grad
from pinnlab.bench import (ExperimentMatrix, epochs_to_reach, median_curve,
                           ratio_curves, run_matrix)
from pinnlab.networks import build_model
from pinnlab.pde import (BoundaryFamily, Domain, PdeProblem,
                         weighted_loss_on_tape)
from pinnlab.qsim import CircuitLayout, circuit_on_tape, jet_scalar, run_circuit
from pinnlab.refsolve import SolverConfig, solve, solve_cached
from pinnlab.sampling import (CollocationSampler, CollocationSet, SobolStream,
                              should_resample)
from pinnlab.training import MetricsLog, TrainConfig, train

PASS = "PASS"
FAIL = "FAIL"


def report(name: str, ok: bool, detail: str) -> None:
    print(f"[acceptance] {PASS if ok else FAIL} {name}: {detail}", flush=True)
    assert ok, f"{name}: {detail}"


def out_root(tmp_path_factory, label):
    env = os.environ.get("PINNLAB_ACCEPTANCE_DIR")
    if env:
        path = Path(env) / label
        path.mkdir(parents=True, exist_ok=True)
        return path
    return tmp_path_factory.mktemp(label)


# -- criterion 1 -------------------------------------------------------------


def test_criterion_1_gradient_correctness():
    t0 = time.perf_counter()
    problem = PdeProblem(0.1, 1.0, BoundaryFamily("xsin"), Domain())
    sampler = CollocationSampler(256, 0, problem.domain)
    small = CollocationSet(sampler.train.interior[:8], sampler.train.initial[:8],
                           sampler.train.boundary[:8])
    worst = 0.0
    cases = [("cpinn", t, d, s) for s, (t, d) in enumerate(
        [(100, 1), (100, 2), (150, 3), (150, 4), (200, 5), (200, 6),
         (250, 1), (250, 2), (250, 3), (250, 4)])]
    cases += [("qpinn", t, dc, s + 10) for s, (t, dc) in enumerate(
        [(100, 0), (150, 0), (200, 0), (250, 0), (150, 1),
         (200, 1), (250, 1), (250, 1), (200, 0), (100, 0)])]
    for kind, target, arch, seed in cases:
        model = build_model(kind, target, arch, seed=seed)

        def build(tape, params):
            total, _ = weighted_loss_on_tape(tape, model, problem, small,
                                             1.3, 0.8)
            return total

        worst = max(worst, check_grad(build, model.params, step=1e-5))
    elapsed = time.perf_counter() - t0
    report("criterion 1 (gradient correctness)",
           worst < 1e-4 and elapsed < 120,
           f"max rel err {worst:.2e} over 20 models in {elapsed:.0f}s")


# -- criterion 2 -------------------------------------------------------------


def test_criterion_2_parameter_shift():
    t0 = time.perf_counter()
    layout = CircuitLayout(n_q=3, depth=3)
    rng = np.random.default_rng(0)
    thetas = rng.uniform(0, 2 * np.pi, layout.n_angles)
    inputs = rng.uniform(-1, 1, 3)
    worst = 0.0
    for q in range(3):
        p = ParamVector(thetas.copy())
        tape = Tape(p)
        x = JetVar(tape, inputs.reshape(3, 1), None, None, None)
        e = circuit_on_tape(tape, layout, x, 0)
        g = tape.backward(tape.comp(tape.row(e, q), "v"))
        for k in range(layout.n_angles):
            shift = np.zeros(layout.n_angles)
            shift[k] = np.pi / 2
            jets = [jet_scalar(v) for v in inputs]
            ps = (run_circuit(layout, jets, thetas + shift)[q].v
                  - run_circuit(layout, jets, thetas - shift)[q].v) / 2.0
            worst = max(worst, abs(g[k] - ps))
    elapsed = time.perf_counter() - t0
    report("criterion 2 (parameter-shift cross-check)",
           worst < 1e-10 and elapsed < 30,
           f"max abs err {worst:.2e} over {3 * layout.n_angles} comparisons "
           f"in {elapsed:.1f}s")


# -- criterion 3 -------------------------------------------------------------


class _SineMode:
    name = "sine-mode"
    c = None

    def initial_condition(self, x):
        return np.sin(np.pi * np.asarray(x, dtype=np.float64))

    def forcing(self, t):
        return np.zeros_like(np.asarray(t, dtype=np.float64))

    def boundary_values(self, domain):
        return 0.0, 0.0


def test_criterion_3_reference_solver():
    t0 = time.perf_counter()
    worst = 0.0
    for lin in (0.01, 0.03, 0.1, 0.3, 1.0):
        problem = PdeProblem(lin, 0.0, _SineMode(), Domain())
        sol = solve(problem, SolverConfig())
        err = abs(sol.sample(1.0, 0.5) - math.exp(-lin * math.pi ** 2))
        worst = max(worst, err)
    # order-2 self-convergence for the nonlinear operator
    problem = PdeProblem(0.1, 1.0, BoundaryFamily("xsin"), Domain())
    fine = solve(problem, SolverConfig(nx=513, dt=5e-4, save_every=200))
    errs = []
    for nx in (65, 129):
        coarse = solve(problem, SolverConfig(nx=nx, dt=5e-4, save_every=200))
        step = 512 // (nx - 1)
        errs.append(np.max(np.abs(coarse.u[-1] - fine.u[-1][::step])))
    ratio = errs[0] / errs[1]
    elapsed = time.perf_counter() - t0
    report("criterion 3 (reference-solver validity)",
           worst < 1e-3 and 3.0 < ratio < 5.5 and elapsed < 600,
           f"heat-mode max err {worst:.2e}, N=1 refinement ratio {ratio:.2f} "
           f"in {elapsed:.0f}s")


# -- criterion 7 -------------------------------------------------------------


def test_criterion_7_resample_trigger():
    grid_ok = True
    for train_loss in (1e-6, 1e-3, 0.1, 1.0, 10.0):
        for factor in (0.0, 0.5, 0.9, 1.0, 1.05, 1.1, 1.1000001, 1.2, 10.0):
            expected = factor > 1.1
            got = should_resample(train_loss, factor * train_loss)
            grid_ok = grid_ok and (got is expected)
    boundary = should_resample(0.10, 0.11)
    fires = should_resample(0.10, 0.12)
    report("criterion 7 (resample trigger)",
           grid_ok and boundary is False and fires is True,
           "fires iff val > 1.1*train; (0.10, 0.11) stays quiet")


# -- criterion 8 -------------------------------------------------------------


def test_criterion_8_pipeline_determinism(tmp_path_factory):
    matrix = ExperimentMatrix(
        l_values=(0.1,), n_values=(1.0,), families=(BoundaryFamily("xsin"),),
        param_counts=(100,), point_counts=(256,), seeds=(0,),
        epochs={"cpinn": 100, "qpinn": 100}, eval_every=50, mse_grid=41,
        cpinn_depths=(1, 2), qpinn_coder_depths=(0,))
    solver = SolverConfig(nx=65, dt=1e-3, save_every=10)
    outs = []
    for run in range(2):
        out = tmp_path_factory.mktemp(f"det{run}")
        run_matrix(matrix, out, parallelism=1, solver=solver)
        outs.append(out)
    csvs_a = sorted((outs[0] / "runs").rglob("*.csv"))
    csvs_b = sorted((outs[1] / "runs").rglob("*.csv"))
    identical = len(csvs_a) == len(csvs_b) > 0 and all(
        a.read_bytes() == b.read_bytes() for a, b in zip(csvs_a, csvs_b))
    report("criterion 8 (pipeline determinism)", identical,
           f"{len(csvs_a)} metrics logs byte-identical across reruns")


# -- criterion 9 -------------------------------------------------------------


def test_criterion_9_sobol_reference():
    ref = qmc.Sobol(2, scramble=False).random(16)
    got = SobolStream(2).take(8)
    exact = np.array_equal(got, ref[1:9])
    report("criterion 9 (Sobol correctness)", exact,
           "first 8 canonical 2-D points match the reference "
           "direction-number implementation exactly")


# -- training-scale criteria --------------------------------------------------


def _train_task(task):
    problem = PdeProblem(task["L"], task["N"], BoundaryFamily("xsin"), Domain())
    reference = solve_cached(problem, SolverConfig(), task["cache"])
    model = build_model(task["kind"], task["target"], task["arch"], task["model_seed"])
    config = TrainConfig(epochs=task["epochs"], n_points=task["n_points"],
                         seed=task["train_seed"],
                         adaptive_weights=task.get("adaptive_weights", True),
                         resample=task.get("resample", True))
    result = train(model, problem, config, reference)
    result.log.to_csv(task["csv_path"])
    return task["csv_path"]


def _run_pool(tasks, workers=2):
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_train_task, tasks))


def test_criterion_5_adaptive_weights(tmp_path_factory):
    out = out_root(tmp_path_factory, "criterion5")
    cache = out / "cache"
    epochs = 10_000
    tasks = []
    for adaptive in (True, False):
        for seed in (0, 1, 2):
            name = f"{'adaptive' if adaptive else 'fixed'}_s{seed}.csv"
            tasks.append({
                "L": 0.1, "N": 0.0, "kind": "cpinn", "target": 250, "arch": 2,
                "model_seed": seed, "train_seed": 100 + seed, "epochs": epochs,
                "n_points": 1024, "adaptive_weights": adaptive,
                "cache": str(cache), "csv_path": str(out / name),
            })
    _run_pool(tasks)

    def median_curves(prefix):
        # per cadence epoch, medians across seeds of the cited figure's
        # metric (MSE) and of the raw unweighted loss sum
        mses, raws = [], []
        for seed in (0, 1, 2):
            log = MetricsLog.from_csv(out / f"{prefix}_s{seed}.csv")
            rows = [r for r in log.rows if r.epoch % 100 == 0 and r.epoch > 0]
            mses.append([r.mse for r in rows])
            raws.append([r.loss_pde + r.loss_t + r.loss_x for r in rows])
        med = lambda a: np.sort(np.array(a), axis=0)[(len(a) - 1) // 2]
        return np.arange(100, epochs + 1, 100), med(mses), med(raws)

    # The comparison metric is the one plotted by the figure this criterion
    # cites (training progress measured as MSE); the runs' own weighted
    # totals are scaled by different weights and are not comparable.
    e, adaptive_mse, adaptive_raw = median_curves("adaptive")
    _, fixed_mse, fixed_raw = median_curves("fixed")
    after = e > 1000
    frac = float(np.mean(adaptive_mse[after] <= fixed_mse[after]))
    frac_raw = float(np.mean(adaptive_raw[after] <= fixed_raw[after]))
    report("criterion 5 (adaptive-weights effect)", frac >= 0.8,
           f"adaptive at-or-below fixed at {frac:.0%} of cadence checkpoints "
           f"after epoch 1000 (median of 3 seeds, {epochs} epochs; "
           f"final MSE {adaptive_mse[-1]:.2e} vs {fixed_mse[-1]:.2e}; "
           f"raw-loss fraction for reference: {frac_raw:.0%})")


def test_criterion_6_resampling_effect(tmp_path_factory):
    out = out_root(tmp_path_factory, "criterion6")
    cache = out / "cache"
    epochs = 20_000
    variants = [("on256", 256, True), ("off256", 256, False), ("on1024", 1024, True)]
    tasks = []
    for name, n_points, resample in variants:
        for seed in (0, 1, 2):
            tasks.append({
                "L": 0.1, "N": 0.0, "kind": "cpinn", "target": 250, "arch": 2,
                "model_seed": seed, "train_seed": 200 + seed, "epochs": epochs,
                "n_points": n_points, "resample": resample,
                "cache": str(cache), "csv_path": str(out / f"{name}_s{seed}.csv"),
            })
    _run_pool(tasks)

    def median_final(name):
        finals = [MetricsLog.from_csv(out / f"{name}_s{seed}.csv").final_mse()
                  for seed in (0, 1, 2)]
        return sorted(finals)[1]

    on256 = median_final("on256")
    off256 = median_final("off256")
    on1024 = median_final("on1024")
    ok = (on256 <= 3.0 * on1024) and (off256 > on256)
    report("criterion 6 (resampling effect)", ok,
           f"median final MSE: 256+resample {on256:.2e}, 256 fixed {off256:.2e}, "
           f"1024+resample {on1024:.2e}")


def test_criterion_4_headline_reproduction(tmp_path_factory):
    out = out_root(tmp_path_factory, "criterion4")
    matrix = ExperimentMatrix(
        l_values=(0.1,), n_values=(1.0,), families=(BoundaryFamily("xsin"),),
        param_counts=(250,), point_counts=(1024,), seeds=(0, 1, 2),
        epochs={"cpinn": 100_000, "qpinn": 20_000})
    records = run_matrix(matrix, out, parallelism=2)
    by_kind = {r["kind"]: r for r in records}
    curves = {}
    for kind, record in by_kind.items():
        logs = [MetricsLog.from_csv(r["csv_path"]) for r in record["runs"]
                if r["status"] == "ok"]
        curves[kind] = median_curve(logs)
    q_reach = epochs_to_reach(curves["qpinn"], 1e-3)
    c_reach = epochs_to_reach(curves["cpinn"], 1e-3)
    q_final = curves["qpinn"][1][-1]
    c_final = curves["cpinn"][1][-1]
    both_reach = q_reach is not None and c_reach is not None
    ratio = (q_reach / c_reach) if both_reach and c_reach > 0 else float("inf")
    report("criterion 4 (headline qualitative reproduction)",
           both_reach and ratio < 0.5,
           f"epochs to MSE<=1e-3: qPINN {q_reach} vs cPINN {c_reach} "
           f"(ratio {ratio if both_reach else float('nan'):.3f}); final median MSE "
           f"q={q_final:.2e} c={c_final:.2e}; "
           f"archs: qPINN coder depth {by_kind['qpinn']['arch']}, "
           f"cPINN depth {by_kind['cpinn']['arch']}")
