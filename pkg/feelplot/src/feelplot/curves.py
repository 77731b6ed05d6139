"""Metrics-CSV reading and curve preparation.

The only contract with the simulator is its CSV schema: one row per round
with the columns below. Nothing here imports the simulator.
"""

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = ["SCHEMA", "SchemaError", "CurveSpec", "read_metrics", "moving_average"]

SCHEMA = ["round", "selected", "acc", "loss", "dl_bits_total",
          "ul_bits_total", "q_dl_min", "q_dl_max", "q_ul_min", "q_ul_max"]


class SchemaError(ValueError):
    pass


@dataclass(frozen=True)
class CurveSpec:
    label: str
    path: str
    window: int = 1  # centered moving-average width; <= 1 plots raw values

    def __post_init__(self):
        if self.window < 0:
            raise ValueError("smoothing window must be nonnegative")


def read_metrics(path):
    """Parse one metrics CSV into column arrays, validating the schema."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    if not rows:
        raise SchemaError(f"{path}: empty file, expected header {SCHEMA}")
    header = rows[0]
    for column in SCHEMA:
        if column not in header:
            raise SchemaError(f"{path}: missing column '{column}' "
                              f"(header was {header})")
    extra = [c for c in header if c not in SCHEMA]
    if extra:
        raise SchemaError(f"{path}: unexpected columns {extra}")
    idx = {c: header.index(c) for c in SCHEMA}
    body = rows[1:]
    if not body:
        raise SchemaError(f"{path}: no data rows")
    return {
        "round": np.array([int(r[idx["round"]]) for r in body]),
        "acc": np.array([float(r[idx["acc"]]) for r in body]),
        "loss": np.array([float(r[idx["loss"]]) for r in body]),
    }


def moving_average(values, window: int):
    """Centered moving average with edge truncation; window <= 1 is identity."""
    values = np.asarray(values, dtype=float)
    if window <= 1:
        return values.copy()
    half_lo = (window - 1) // 2
    half_hi = window // 2
    out = np.empty_like(values)
    n = values.size
    for i in range(n):
        lo = max(0, i - half_lo)
        hi = min(n, i + half_hi + 1)
        out[i] = values[lo:hi].mean()
    return out
