"""Adam training loop with adaptive loss weights, resampling, and metrics.

Epoch structure (fixed): recompute adaptive weights on the full training set,
run 4 optimizer steps on contiguous quarter-slices of each point set, evaluate
train (epoch mean of batch losses) and validation losses with this epoch's
weights, apply the resampling trigger, and at cadence epochs compute the MSE
against the reference solution.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autodiff import ParamVector, Tape
from .errors import ConfigurationError, DivergenceError, StructuralError
from .networks import ModelHandle
from .pde import LossBreakdown, PdeProblem, loss_terms, weighted_loss_on_tape
from .sampling import CollocationSampler, CollocationSet, should_resample

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
WEIGHT_NORM_FLOOR = 1e-12


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def for_params(cls, n: int) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n))


def adam_step(state: AdamState, params: ParamVector, grad: np.ndarray,
              lr: float) -> tuple[AdamState, ParamVector]:
    """Standard bias-corrected Adam update (in place)."""
    if grad.shape != params.values.shape:
        raise StructuralError("gradient and parameter lengths differ")
    if not np.all(np.isfinite(grad)):
        raise DivergenceError("non-finite gradient in optimizer step")
    state.step += 1
    state.m *= ADAM_BETA1
    state.m += (1.0 - ADAM_BETA1) * grad
    state.v *= ADAM_BETA2
    state.v += (1.0 - ADAM_BETA2) * grad * grad
    mhat = state.m / (1.0 - ADAM_BETA1 ** state.step)
    vhat = state.v / (1.0 - ADAM_BETA2 ** state.step)
    params.values -= lr * mhat / (np.sqrt(vhat) + ADAM_EPS)
    return state, params


@dataclass(frozen=True)
class LrSchedule:
    """Exponential decay from lr0 at epoch 0 to lr0*floor_factor at budget."""

    budget: int
    lr0: float = 0.01
    floor_factor: float = 0.1

    def lr_at(self, epoch: int) -> float:
        if self.budget <= 0:
            return self.lr0
        return self.lr0 * self.floor_factor ** (epoch / self.budget)


@dataclass
class AdaptiveWeights:
    w_bounds: float = 1.0
    w_pde: float = 1.0


def _term_grad_norms(model: ModelHandle, problem: PdeProblem,
                     train: CollocationSet) -> tuple[float, float, float, float]:
    """(|grad L_bounds|, |grad L_pde|, L_bounds, L_pde) on the full train set."""
    from .pde import bounds_terms_on_tape, pde_term_on_tape

    tape = Tape(model.params)
    l_t, l_x = bounds_terms_on_tape(tape, model, problem, train)
    l_bounds = tape.wsum([l_t, l_x], [1.0, 1.0])
    g_bounds = tape.backward(l_bounds).copy()
    tape2 = Tape(model.params)
    l_pde = pde_term_on_tape(tape2, model, problem, train)
    g_pde = tape2.backward(l_pde)
    return (float(np.linalg.norm(g_bounds)), float(np.linalg.norm(g_pde)),
            l_bounds.value(), l_pde.value())


def update_weights(model: ModelHandle, problem: PdeProblem, train: CollocationSet,
                   previous: AdaptiveWeights | None = None) -> AdaptiveWeights:
    """Inverse gradient-norm weights; a floored norm keeps the previous weight."""
    previous = previous or AdaptiveWeights()
    nb, npde, _, _ = _term_grad_norms(model, problem, train)
    wb = previous.w_bounds if nb < WEIGHT_NORM_FLOOR else 1.0 / nb
    wp = previous.w_pde if npde < WEIGHT_NORM_FLOOR else 1.0 / npde
    return AdaptiveWeights(wb, wp)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    n_points: int
    seed: int
    batches: int = 4
    eval_every: int = 100
    lr0: float = 0.01
    lr_floor_factor: float = 0.1
    adaptive_weights: bool = True
    resample: bool = True
    mse_grid: int = 101

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigurationError("epoch budget must be non-negative")
        if self.epochs and self.epochs < self.eval_every:
            raise ConfigurationError("epoch budget below the evaluation cadence")
        if self.n_points % self.batches:
            raise ConfigurationError("batch count must divide the collocation count")

    def sampler_seed(self) -> int:
        return int(np.random.SeedSequence(self.seed).generate_state(2)[1])


@dataclass
class MetricsRow:
    epoch: int
    lr: float
    w_bounds: float
    w_pde: float
    loss_pde: float
    loss_t: float
    loss_x: float
    loss_train: float
    loss_val: float
    mse: float | None
    resampled: bool


CSV_HEADER = ["epoch", "lr", "w_bounds", "w_pde", "loss_pde", "loss_t",
              "loss_x", "loss_train", "loss_val", "mse", "resampled"]


class MetricsLog:
    """Per-epoch training record; the unit of all downstream analysis."""

    def __init__(self, rows: list[MetricsRow] | None = None):
        self.rows = rows or []

    def append(self, row: MetricsRow) -> None:
        if self.rows and row.epoch <= self.rows[-1].epoch:
            raise StructuralError("metrics rows must be strictly ordered by epoch")
        self.rows.append(row)

    def mse_curve(self) -> tuple[np.ndarray, np.ndarray]:
        pts = [(r.epoch, r.mse) for r in self.rows if r.mse is not None]
        if not pts:
            return np.zeros(0, dtype=int), np.zeros(0)
        e, m = zip(*pts)
        return np.array(e, dtype=int), np.array(m)

    def final_mse(self) -> float | None:
        for r in reversed(self.rows):
            if r.mse is not None:
                return r.mse
        return None

    def resample_count(self) -> int:
        return sum(1 for r in self.rows if r.resampled)

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow([
                r.epoch, repr(float(r.lr)), repr(float(r.w_bounds)),
                repr(float(r.w_pde)), repr(float(r.loss_pde)),
                repr(float(r.loss_t)), repr(float(r.loss_x)),
                repr(float(r.loss_train)), repr(float(r.loss_val)),
                "" if r.mse is None else repr(float(r.mse)),
                int(r.resampled),
            ])
        return buf.getvalue()

    def to_csv(self, path) -> None:
        Path(path).write_text(self.to_csv_text())

    @classmethod
    def from_csv(cls, path) -> "MetricsLog":
        rows = []
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != CSV_HEADER:
                raise ConfigurationError(f"unexpected metrics header in {path}")
            for rec in reader:
                rows.append(MetricsRow(
                    epoch=int(rec["epoch"]), lr=float(rec["lr"]),
                    w_bounds=float(rec["w_bounds"]), w_pde=float(rec["w_pde"]),
                    loss_pde=float(rec["loss_pde"]), loss_t=float(rec["loss_t"]),
                    loss_x=float(rec["loss_x"]), loss_train=float(rec["loss_train"]),
                    loss_val=float(rec["loss_val"]),
                    mse=float(rec["mse"]) if rec["mse"] else None,
                    resampled=rec["resampled"] == "1"))
        return cls(rows)


@dataclass
class TrainResult:
    model: ModelHandle
    log: MetricsLog
    summary: dict


def _batch_view(s: CollocationSet, k: int, n_batches: int) -> CollocationSet:
    n = s.n // n_batches
    sl = slice(k * n, (k + 1) * n)
    return CollocationSet(s.interior[sl], s.initial[sl], s.boundary[sl])


def _eval_losses(model, problem, sets, weights) -> tuple[LossBreakdown, float]:
    br = loss_terms(model, problem, sets)
    return br, br.weighted(weights.w_bounds, weights.w_pde)


def train(model: ModelHandle, problem: PdeProblem, config: TrainConfig,
          reference=None) -> TrainResult:
    """Run the full training loop; deterministic for a fixed (seed, config)."""
    from .refsolve import mse as reference_mse

    t_start = time.perf_counter()
    schedule = LrSchedule(config.epochs, config.lr0, config.lr_floor_factor)
    sampler = CollocationSampler(config.n_points, config.sampler_seed(),
                                 problem.domain)
    adam = AdamState.for_params(len(model.params))
    weights = AdaptiveWeights(1.0, 1.0)
    log = MetricsLog()

    def mse_now() -> float | None:
        if reference is None:
            return None
        return reference_mse(model, reference, grid=config.mse_grid)

    br0, train_w0 = _eval_losses(model, problem, sampler.train, weights)
    _, val_w0 = _eval_losses(model, problem, sampler.validation, weights)
    log.append(MetricsRow(0, schedule.lr_at(0), weights.w_bounds, weights.w_pde,
                          br0.l_pde, br0.l_t, br0.l_x, train_w0, val_w0,
                          mse_now(), False))

    last_good = model.params.values.copy()
    last_good_epoch = 0

    for epoch in range(1, config.epochs + 1):
        if config.adaptive_weights:
            weights = update_weights(model, problem, sampler.train, weights)
        lr = schedule.lr_at(epoch - 1)

        sum_pde = sum_t = sum_x = sum_total = 0.0
        for k in range(config.batches):
            batch = _batch_view(sampler.train, k, config.batches)
            tape = Tape(model.params)
            total, br = weighted_loss_on_tape(tape, model, problem, batch,
                                              weights.w_bounds, weights.w_pde)
            total_val = total.value()
            if not math.isfinite(total_val):
                raise DivergenceError(
                    f"non-finite loss at epoch {epoch}, batch {k}",
                    epoch=epoch,
                    checkpoint=(last_good_epoch, last_good))
            g = tape.backward(total)
            try:
                adam_step(adam, model.params, g, lr)
            except DivergenceError as err:
                raise DivergenceError(
                    f"{err} (epoch {epoch}, batch {k})", epoch=epoch,
                    checkpoint=(last_good_epoch, last_good)) from err
            sum_pde += br.l_pde
            sum_t += br.l_t
            sum_x += br.l_x
            sum_total += total_val

        nb = config.batches
        train_w = sum_total / nb
        _, val_w = _eval_losses(model, problem, sampler.validation, weights)

        resampled = False
        if config.resample and should_resample(train_w, val_w):
            sampler.resample()
            resampled = True

        at_cadence = (epoch % config.eval_every == 0) or (epoch == config.epochs)
        mse = mse_now() if at_cadence else None
        log.append(MetricsRow(epoch, lr, weights.w_bounds, weights.w_pde,
                              sum_pde / nb, sum_t / nb, sum_x / nb,
                              train_w, val_w, mse, resampled))
        if at_cadence:
            last_good = model.params.values.copy()
            last_good_epoch = epoch

    summary = {
        "epochs": config.epochs,
        "n_points": config.n_points,
        "seed": config.seed,
        "batches": config.batches,
        "eval_every": config.eval_every,
        "lr_schedule": {"form": "lr0 * floor_factor**(epoch/budget)",
                        "lr0": config.lr0, "floor_factor": config.lr_floor_factor},
        "adaptive_weights": config.adaptive_weights,
        "resample": config.resample,
        "kind": model.kind,
        "target_params": model.target,
        "actual_params": model.actual,
        "final_mse": log.final_mse(),
        "resample_count": log.resample_count(),
        "wall_time_s": time.perf_counter() - t_start,
    }
    return TrainResult(model, log, summary)
