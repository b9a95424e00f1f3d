"""Flat key=value experiment configs.

Format: one `key=value` per line, `#` comments, blank lines ignored.
Keys carry a section prefix: `experiment.` for experiment parameters and
`run.` for orchestration (seed, workers, out). Bare keys are shorthand:
`seed`, `workers` and `out` resolve to the run section, anything else to
the experiment section, so `trials=10` on the command line overrides
`experiment.trials` in a file.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

_RUN_KEYS = ("seed", "workers", "out")


class ConfigError(ValueError):
    """Bad or missing configuration; the message names the key."""


def _normalize(key: str) -> str:
    if key.startswith("experiment.") or key.startswith("run."):
        section, _, rest = key.partition(".")
        if not rest:
            raise ConfigError(f"empty key after section prefix: {key!r}")
        if section == "run" and rest not in _RUN_KEYS:
            raise ConfigError(f"unknown run key: {key!r}")
        return key
    if key in _RUN_KEYS:
        return f"run.{key}"
    return f"experiment.{key}"


def parse_pairs(pairs, source: str) -> dict[str, str]:
    """key=value strings -> normalized dict; later entries win."""
    out: dict[str, str] = {}
    for raw in pairs:
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{source}: expected key=value, got {raw!r}")
        key = key.strip()
        if not key:
            raise ConfigError(f"{source}: empty key in {raw!r}")
        out[_normalize(key)] = value.strip()
    return out


@dataclass
class ExperimentConfig:
    """Parsed config: experiment name, run settings, raw parameter strings.

    `raw` preserves every normalized key=value pair (file order, then
    overrides) and is what the JSON sidecar echoes.
    """

    name: str
    seed: int = 0
    workers: int = 1
    out_dir: str = "out"
    params: dict[str, str] = field(default_factory=dict)
    raw: dict[str, str] = field(default_factory=dict)

    # --- typed accessors; every failure names the offending key ---

    def _fetch(self, key: str, default):
        if key in self.params:
            return self.params[key]
        if default is _REQUIRED:
            raise ConfigError(f"missing required key: experiment.{key}")
        return default

    def get_str(self, key: str, default=None) -> str:
        value = self._fetch(key, _REQUIRED if default is None else default)
        return str(value)

    def get_int(self, key: str, default=None, lo: int | None = None) -> int:
        value = self._fetch(key, _REQUIRED if default is None else default)
        try:
            parsed = int(value)
        except (TypeError, ValueError):
            raise ConfigError(f"experiment.{key}: expected integer, got {value!r}")
        if lo is not None and parsed < lo:
            raise ConfigError(f"experiment.{key}: must be >= {lo}, got {parsed}")
        return parsed

    def get_float(self, key: str, default=None,
                  lo: float | None = None, hi: float | None = None,
                  lo_open: bool = False, hi_open: bool = False) -> float:
        value = self._fetch(key, _REQUIRED if default is None else default)
        try:
            parsed = float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"experiment.{key}: expected number, got {value!r}")
        if lo is not None and (parsed < lo or (lo_open and parsed == lo)):
            raise ConfigError(
                f"experiment.{key}: out of range, {parsed} vs lower bound {lo}")
        if hi is not None and (parsed > hi or (hi_open and parsed == hi)):
            raise ConfigError(
                f"experiment.{key}: out of range, {parsed} vs upper bound {hi}")
        return parsed

    def get_int_list(self, key: str, default=None) -> list[int]:
        value = self._fetch(key, _REQUIRED if default is None else default)
        if isinstance(value, list):
            return value
        try:
            return [int(part) for part in str(value).split(",") if part.strip()]
        except ValueError:
            raise ConfigError(f"experiment.{key}: expected comma-separated integers")

    def get_float_list(self, key: str, default=None) -> list[float]:
        value = self._fetch(key, _REQUIRED if default is None else default)
        if isinstance(value, list):
            return value
        try:
            return [float(part) for part in str(value).split(",") if part.strip()]
        except ValueError:
            raise ConfigError(f"experiment.{key}: expected comma-separated numbers")


class _Required:
    pass


_REQUIRED = _Required()


def from_mapping(mapping: dict[str, str]) -> ExperimentConfig:
    """Build an ExperimentConfig from normalized key=value pairs."""
    params = {k.removeprefix("experiment."): v
              for k, v in mapping.items() if k.startswith("experiment.")}
    name = params.pop("name", None)
    if name is None:
        raise ConfigError("missing required key: experiment.name")

    def run_value(key, default):
        return mapping.get(f"run.{key}", default)

    try:
        seed = int(run_value("seed", 0))
    except ValueError:
        raise ConfigError(f"run.seed: expected integer, got {run_value('seed', 0)!r}")
    if seed < 0:
        raise ConfigError(f"run.seed: must be non-negative, got {seed}")
    workers_raw = run_value("workers", os.environ.get("TREECAST_WORKERS", "1"))
    try:
        workers = int(workers_raw)
    except ValueError:
        raise ConfigError(f"run.workers: expected integer, got {workers_raw!r}")
    if workers < 1:
        raise ConfigError(f"run.workers: must be >= 1, got {workers}")
    out_dir = str(run_value("out", "out"))
    return ExperimentConfig(name=name, seed=seed, workers=workers,
                            out_dir=out_dir, params=params, raw=dict(mapping))


def load_config(path: str, overrides=()) -> ExperimentConfig:
    """Read a config file and apply key=value overrides last."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    merged = parse_pairs(lines, source=path)
    merged.update(parse_pairs(overrides, source="override"))
    return from_mapping(merged)
