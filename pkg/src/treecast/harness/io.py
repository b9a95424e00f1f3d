"""CSV and sidecar output with a fixed schema.

One row per aggregated point. Floats are serialized with repr() so
equal doubles produce equal bytes; the newline is always "\n". The JSON
sidecar carries the full config verbatim plus version and CI method, so
a run can be reproduced from its outputs alone.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

from .stats import CI_METHOD

CSV_COLUMNS = ("experiment", "b", "t", "epsilon", "rho_or_budget", "strategy",
               "trials", "metric_name", "mean", "ci_low", "ci_high", "seed")


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    b: int
    t: int
    epsilon: float
    rho_or_budget: str
    strategy: str
    trials: int
    metric_name: str
    mean: float
    ci_low: float
    ci_high: float
    seed: int


def _fmt(value) -> str:
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return repr(value)
    return str(value)


def format_rows(rows) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for row in rows:
        lines.append(",".join(_fmt(getattr(row, col)) for col in CSV_COLUMNS))
    return "\n".join(lines) + "\n"


def write_csv(path: str, rows) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_rows(rows))


def write_sidecar(path: str, config_raw: dict, version: str,
                  report: dict | None = None) -> None:
    """JSON sidecar: config echoed verbatim, software version, CI method,
    and the experiment's free-form report (verdicts, regression constants)."""
    payload = {
        "version": version,
        "ci_method": CI_METHOD,
        "config": dict(config_raw),
        "report": report or {},
    }
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
