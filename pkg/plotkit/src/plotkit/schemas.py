"""CSV schemas of the training-lab outputs consumed by the figure renderers.

Each figure kind reads exactly one documented table; files with missing or
unknown columns are rejected with the offending column named.
"""

from __future__ import annotations

import csv
from pathlib import Path

SCHEMAS = {
    "medians": ["cell_id", "kind", "arch", "epoch", "mse_median"],
    "epoch_ratios": ["cell_id", "threshold", "epochs_qpinn", "epochs_cpinn",
                     "epoch_ratio", "status"],
    "mse_ratios": ["cell_id", "epoch", "mse_qpinn", "mse_cpinn", "mse_ratio"],
    "success": ["family", "n_points", "kind", "successes", "total", "ratio",
                "threshold"],
    "landscape": ["theta_i", "theta_j", "mse"],
    # probe files carry 2 coordinates plus one column per signal (i0.., o0..)
}


class SchemaError(ValueError):
    """An input table does not match its documented schema."""


def read_table(path, schema: str) -> list[dict]:
    """Read a CSV against a fixed schema; unknown columns are rejected."""
    expected = SCHEMAS[schema]
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        names = reader.fieldnames or []
        for col in names:
            if col not in expected:
                raise SchemaError(f"{path}: unknown column {col!r} "
                                  f"(expected {expected})")
        for col in expected:
            if col not in names:
                raise SchemaError(f"{path}: missing column {col!r}")
        return list(reader)


def read_probe_table(path) -> dict:
    """Probe tables: t, x then i0..i(n-1), o0..o(n-1) signal columns."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        names = list(reader.fieldnames or [])
        if names[:2] != ["t", "x"]:
            offending = names[0] if names else "<empty>"
            raise SchemaError(f"{path}: probe tables start with t,x "
                              f"(got {offending!r})")
        signals = names[2:]
        n = len(signals) // 2
        want = [f"i{j}" for j in range(n)] + [f"o{j}" for j in range(n)]
        for col in signals:
            if col not in want:
                raise SchemaError(f"{path}: unknown column {col!r}")
        rows = list(reader)
    return {"signals": signals, "rows": rows}
