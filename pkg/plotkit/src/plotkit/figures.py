"""Renderers for the six figure kinds.

All figures are built headless (Agg) with fixed styling so identical inputs
give pixel-identical files.  ``build_figure`` returns the matplotlib Figure
(used by tests to inspect contents); ``render`` writes it to disk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .schemas import SchemaError, read_probe_table, read_table

FIGURE_KINDS = ("training-curves", "epoch-ratio", "mse-ratio", "success",
                "landscape", "probe")

plt.rcParams.update({
    "figure.figsize": (6.4, 4.2),
    "figure.dpi": 110,
    "savefig.dpi": 110,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "plotkit",
})


@dataclass
class FigureRequest:
    kind: str
    inputs: list
    output: str
    log_x: bool = True
    log_y: bool = True
    title: str | None = None
    color_by_final: bool = False

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise SchemaError(f"unknown figure kind {self.kind!r}; "
                              f"choose one of {FIGURE_KINDS}")
        if not self.inputs:
            raise SchemaError("a figure request needs at least one input file")


def _f(value, default=math.nan):
    return float(value) if value not in ("", None) else default


def _segments(xs, ys):
    """Split a sequence at missing entries so gaps stay gaps."""
    seg_x, seg_y, out = [], [], []
    for x, y in zip(xs, ys):
        if x is None or y is None or not (math.isfinite(x) and math.isfinite(y)):
            if seg_x:
                out.append((seg_x, seg_y))
                seg_x, seg_y = [], []
        else:
            seg_x.append(x)
            seg_y.append(y)
    if seg_x:
        out.append((seg_x, seg_y))
    return out


def _final_qpinn_mse(request) -> dict:
    """Optional line coloring by the final qPINN MSE (from a ratio table)."""
    if not request.color_by_final or len(request.inputs) < 2:
        return {}
    rows = read_table(request.inputs[1], "mse_ratios")
    finals = {}
    for row in rows:
        finals[row["cell_id"]] = _f(row["mse_qpinn"])
    return finals


def _colors(keys, finals):
    if finals:
        vals = np.array([finals.get(k, math.nan) for k in keys])
        ok = np.isfinite(vals)
        if ok.any():
            lo, hi = np.nanmin(vals[ok]), np.nanmax(vals[ok])
            span = math.log10(hi / lo) if hi > lo > 0 else 1.0
            cmap = plt.get_cmap("viridis")
            return {k: cmap(0.0 if span == 0 else
                            (math.log10(v / lo) / span if v > 0 else 0.0))
                    for k, v in zip(keys, vals)}
    cycle = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    return {k: cycle[i % len(cycle)] for i, k in enumerate(keys)}


def _training_curves(request, ax):
    rows = read_table(request.inputs[0], "medians")
    series = {}
    for row in rows:
        key = (row["cell_id"], row["kind"])
        series.setdefault(key, []).append((int(row["epoch"]),
                                           _f(row["mse_median"])))
    for (cell, kind), pts in sorted(series.items()):
        pts.sort()
        label = f"{kind} {cell}" if len({c for c, _ in series}) > 1 else kind
        ax.plot([p[0] for p in pts], [p[1] for p in pts],
                lw=1.4, label=label,
                ls="-" if kind == "qpinn" else "--")
    ax.set_xlabel("epochs")
    ax.set_ylabel("median MSE")
    if series:
        ax.legend(fontsize=7)


def _epoch_ratio(request, ax):
    rows = read_table(request.inputs[0], "epoch_ratios")
    finals = _final_qpinn_mse(request)
    cells = sorted({row["cell_id"] for row in rows})
    colors = _colors(cells, finals)
    for cell in cells:
        sel = [row for row in rows if row["cell_id"] == cell]
        ratios = [_f(row["epoch_ratio"]) if row["status"] == "ok" else None
                  for row in sel]
        thresholds = [_f(row["threshold"]) for row in sel]
        for seg_x, seg_y in _segments(ratios, thresholds):
            ax.plot(seg_x, seg_y, lw=1.3, color=colors[cell])
    ax.axvline(1.0, color="k", ls="--", lw=1.0, label="equal performance")
    ax.set_xlabel("epoch ratio (qPINN / cPINN)")
    ax.set_ylabel("MSE threshold")
    ax.legend(fontsize=7)


def _mse_ratio(request, ax):
    rows = read_table(request.inputs[0], "mse_ratios")
    finals = _final_qpinn_mse(request)
    cells = sorted({row["cell_id"] for row in rows})
    colors = _colors(cells, finals)
    for cell in cells:
        sel = [(int(row["epoch"]), _f(row["mse_ratio"]))
               for row in rows if row["cell_id"] == cell]
        sel.sort()
        xs = [e for e, _ in sel]
        ys = [r for _, r in sel]
        for seg_x, seg_y in _segments(xs, ys):
            ax.plot(seg_x, seg_y, lw=1.3, color=colors[cell])
    ax.axhline(1.0, color="k", ls="--", lw=1.0, label="equal performance")
    ax.set_xlabel("epochs")
    ax.set_ylabel("MSE ratio (qPINN / cPINN)")
    ax.legend(fontsize=7)


def _success(request, ax):
    rows = read_table(request.inputs[0], "success")
    groups = sorted({(row["family"], int(row["n_points"])) for row in rows})
    kinds = sorted({row["kind"] for row in rows})
    width = 0.8 / max(1, len(kinds))
    for k, kind in enumerate(kinds):
        xs, ys = [], []
        for g, (family, n_points) in enumerate(groups):
            for row in rows:
                if (row["family"], int(row["n_points"])) == (family, n_points) \
                        and row["kind"] == kind:
                    xs.append(g + k * width)
                    ys.append(_f(row["ratio"]))
        ax.bar(xs, ys, width=width * 0.95, label=kind)
    ax.set_xticks([g + 0.4 - width / 2 for g in range(len(groups))])
    ax.set_xticklabels([f"{fam}\nn={n}" for fam, n in groups], fontsize=7)
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("success ratio")
    ax.legend(fontsize=7)
    request.log_x = False
    request.log_y = False


def _landscape(request, ax):
    rows = read_table(request.inputs[0], "landscape")
    ti = sorted({_f(row["theta_i"]) for row in rows})
    tj = sorted({_f(row["theta_j"]) for row in rows})
    grid = np.full((len(ti), len(tj)), math.nan)
    index_i = {v: k for k, v in enumerate(ti)}
    index_j = {v: k for k, v in enumerate(tj)}
    for row in rows:
        grid[index_i[_f(row["theta_i"])], index_j[_f(row["theta_j"])]] = \
            _f(row["mse"])
    finite = grid[np.isfinite(grid)]
    norm = None
    if finite.size and finite.min() > 0:
        norm = matplotlib.colors.LogNorm(vmin=finite.min(), vmax=finite.max())
    mesh = ax.pcolormesh(tj, ti, grid, shading="nearest", norm=norm,
                         cmap="viridis")
    ax.figure.colorbar(mesh, ax=ax, label="MSE")
    ax.set_xlabel("theta_j")
    ax.set_ylabel("theta_i")
    request.log_x = False
    request.log_y = False


def _probe(request, fig):
    table = read_probe_table(request.inputs[0])
    rows = table["rows"]
    ts = np.array([float(r["t"]) for r in rows])
    xs = np.array([float(r["x"]) for r in rows])
    n = int(round(math.sqrt(len(rows))))
    signals = table["signals"]
    half = len(signals) // 2
    axes = fig.subplots(2, half, squeeze=False)
    for k, sig in enumerate(signals):
        ax = axes[k // half][k % half]
        vals = np.array([float(r[sig]) for r in rows]).reshape(n, n)
        mesh = ax.pcolormesh(xs.reshape(n, n)[0], ts.reshape(n, n)[:, 0],
                             vals, shading="nearest", cmap="coolwarm")
        ax.set_title(sig, fontsize=8)
        ax.set_xticks([])
        ax.set_yticks([])
    fig.suptitle("encoder outputs (top) and circuit outputs (bottom)",
                 fontsize=9)


def build_figure(request: FigureRequest):
    """Construct the figure for a request without touching the inputs."""
    for path in request.inputs:
        if not Path(path).exists():
            raise SchemaError(f"input file {path} does not exist")
    fig = plt.figure()
    if request.kind == "probe":
        _probe(request, fig)
    else:
        ax = fig.add_subplot(1, 1, 1)
        {"training-curves": _training_curves,
         "epoch-ratio": _epoch_ratio,
         "mse-ratio": _mse_ratio,
         "success": _success,
         "landscape": _landscape}[request.kind](request, ax)
        if request.log_x:
            ax.set_xscale("log")
        if request.log_y:
            ax.set_yscale("log")
        if request.title:
            ax.set_title(request.title, fontsize=9)
        fig.tight_layout()
    return fig


def render(request: FigureRequest) -> str:
    """Render the request to its output path (PNG or SVG by extension)."""
    fig = build_figure(request)
    out = Path(request.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, metadata={"Date": None} if out.suffix == ".svg" else None)
    plt.close(fig)
    return str(out)
