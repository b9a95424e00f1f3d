"""Draw figures from harness result tables.

Input is the fixed 12-column CSV written by the experiment harness; this
package consumes that contract and nothing else (no import of the
simulation code). Four figure kinds are supported:

  decay          metric against depth t, log-scale y
  contraction    per-level damage profile, linear y by default
  ks_sweep       metric against depth with one series per b*eps^2 value
  damage_vs_rho  metric against the permission rate, with the eps/4 and
                 4*eps/(1+2*eps) reference budgets marked

Series carry 95% confidence bands; a series with a single point is drawn
as a marker with an error bar. Rendering is deterministic for a fixed
matplotlib install: the SVG id salt is pinned and the date metadata is
stripped, so identical inputs give identical bytes.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

COLUMNS = ("experiment", "b", "t", "epsilon", "rho_or_budget", "strategy",
           "trials", "metric_name", "mean", "ci_low", "ci_high", "seed")

FIGURE_KINDS = ("decay", "contraction", "ks_sweep", "damage_vs_rho")

SVG_HASHSALT = "treecast-plots"
BAND_ALPHA = 0.22


class SchemaError(ValueError):
    """The CSV input does not satisfy the result-table contract."""


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    csv_paths: tuple[str, ...]
    out: str
    metric: str | None = None
    logy: bool | None = None
    title: str | None = None

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise ValueError(
                f"kind: expected one of {', '.join(FIGURE_KINDS)}, "
                f"got '{self.kind}'")
        if not self.csv_paths:
            raise ValueError("csv_paths: at least one CSV is required")
        if not self.out:
            raise ValueError("out: output path is required")


def spec_from_file(path: str) -> FigureSpec:
    """Load a FigureSpec from a JSON file.

    Keys: kind, csv (string or list), out; optional metric, logy, title.
    Unknown keys are rejected so typos fail loudly.
    """
    with open(path) as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: spec must be a JSON object")
    allowed = {"kind", "csv", "out", "metric", "logy", "title"}
    for key in raw:
        if key not in allowed:
            raise ValueError(f"{path}: unknown spec key '{key}'")
    for key in ("kind", "csv", "out"):
        if key not in raw:
            raise ValueError(f"{path}: missing spec key '{key}'")
    paths = raw["csv"]
    if isinstance(paths, str):
        paths = [paths]
    if (not isinstance(paths, list) or not paths
            or not all(isinstance(p, str) for p in paths)):
        raise ValueError(f"{path}: 'csv' must be a path or list of paths")
    logy = raw.get("logy")
    if logy is not None and not isinstance(logy, bool):
        raise ValueError(f"{path}: 'logy' must be true or false")
    return FigureSpec(kind=raw["kind"], csv_paths=tuple(paths),
                      out=raw["out"], metric=raw.get("metric"),
                      logy=logy, title=raw.get("title"))


def _parse_field(rec, name, conv, path):
    try:
        return conv(rec[name])
    except (TypeError, ValueError):
        raise SchemaError(
            f"{path}: column '{name}': cannot parse {rec[name]!r}") from None


def load_rows(paths) -> list[dict]:
    """Read and type one or more result CSVs, validating the schema."""
    rows = []
    for path in paths:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            for col in COLUMNS:
                if col not in header:
                    raise SchemaError(f"{path}: missing column '{col}'")
            count = 0
            for rec in reader:
                rows.append({
                    "experiment": rec["experiment"],
                    "b": _parse_field(rec, "b", int, path),
                    "t": _parse_field(rec, "t", int, path),
                    "epsilon": _parse_field(rec, "epsilon", float, path),
                    "rho_or_budget": rec["rho_or_budget"],
                    "strategy": rec["strategy"],
                    "metric_name": rec["metric_name"],
                    "mean": _parse_field(rec, "mean", float, path),
                    "ci_low": _parse_field(rec, "ci_low", float, path),
                    "ci_high": _parse_field(rec, "ci_high", float, path),
                })
                count += 1
            if count == 0:
                raise SchemaError(f"{path}: zero rows")
    return rows


@dataclass
class Series:
    label: str
    x: np.ndarray
    y: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    sort_key: tuple = field(default_factory=tuple)


def _rho_value(row):
    try:
        return float(row["rho_or_budget"])
    except ValueError:
        raise SchemaError(
            "column 'rho_or_budget': non-numeric value "
            f"{row['rho_or_budget']!r}; a budget sweep needs numeric "
            "permission rates") from None


def _collect_series(rows, kind) -> list[Series]:
    if kind == "damage_vs_rho":
        keyf = lambda r: (r["experiment"], r["metric_name"], r["b"],
                          r["epsilon"], r["strategy"], r["t"])
        xf = _rho_value
    else:
        keyf = lambda r: (r["experiment"], r["metric_name"], r["b"],
                          r["epsilon"], r["strategy"], r["rho_or_budget"])
        xf = lambda r: r["t"]

    groups: dict[tuple, list] = {}
    for row in rows:
        groups.setdefault(keyf(row), []).append(row)

    # label with the fields that actually vary between groups
    keys = sorted(groups)
    varying = [len({k[i] for k in keys}) > 1 for i in range(len(keys[0]))]
    out = []
    for key in keys:
        grp = sorted(groups[key], key=xf)
        if kind == "ks_sweep":
            b, eps = key[2], key[3]
            label = f"b*eps^2 = {b * eps * eps:g}"
        elif kind == "damage_vs_rho":
            label = f"t = {key[5]}"
            if varying[1]:
                label = f"{key[1]}, {label}"
        else:
            parts = [key[1]]
            if varying[3]:
                parts.append(f"eps = {key[3]:g}")
            if varying[5]:
                parts.append(f"rho = {key[5]}")
            if varying[2]:
                parts.append(f"b = {key[2]}")
            label = ", ".join(parts)
        out.append(Series(
            label=label,
            x=np.array([xf(r) for r in grp], dtype=float),
            y=np.array([r["mean"] for r in grp]),
            lo=np.array([r["ci_low"] for r in grp]),
            hi=np.array([r["ci_high"] for r in grp]),
            sort_key=key))
    return out


_XLABEL = {"decay": "depth t", "contraction": "level",
           "ks_sweep": "depth t", "damage_vs_rho": "permission rate rho"}


def build_figure(spec: FigureSpec):
    """Assemble the matplotlib Figure for a spec without saving it."""
    rows = load_rows(spec.csv_paths)
    if spec.metric is not None:
        present = sorted({r["metric_name"] for r in rows})
        if spec.metric not in present:
            raise SchemaError(
                f"metric_name '{spec.metric}' not present "
                f"(found: {', '.join(present)})")
        rows = [r for r in rows if r["metric_name"] == spec.metric]
    series = _collect_series(rows, spec.kind)

    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for s in series:
        if len(s.x) == 1:
            yerr = np.array([[max(s.y[0] - s.lo[0], 0.0)],
                             [max(s.hi[0] - s.y[0], 0.0)]])
            ax.errorbar(s.x, s.y, yerr=yerr, fmt="o", capsize=3,
                        markersize=4.5, label=s.label)
        else:
            line, = ax.plot(s.x, s.y, "o-", markersize=3.5,
                            linewidth=1.3, label=s.label)
            ax.fill_between(s.x, s.lo, s.hi, alpha=BAND_ALPHA,
                            color=line.get_color(), linewidth=0)

    if spec.kind == "damage_vs_rho":
        for eps in sorted({s.sort_key[3] for s in series}):
            ax.axvline(eps / 4, color="0.3", linestyle="--", linewidth=1.0,
                       label=f"eps/4 = {eps / 4:g}")
            xi = 4 * eps / (1 + 2 * eps)
            ax.axvline(xi, color="0.3", linestyle=":", linewidth=1.2,
                       label=f"xi(eps) = {xi:g}")

    # decay plots are always logarithmic; elsewhere the spec decides
    logy = True if spec.kind == "decay" else bool(spec.logy)
    if logy:
        ax.set_yscale("log")

    metrics = sorted({r["metric_name"] for r in rows})
    ax.set_xlabel(_XLABEL[spec.kind])
    ax.set_ylabel(metrics[0] if len(metrics) == 1 else "mean")
    if spec.title:
        ax.set_title(spec.title)
    if len(series) > 1 or spec.kind == "damage_vs_rho":
        ax.legend(fontsize=8, frameon=False)
    ax.grid(True, alpha=0.3, linewidth=0.5)
    fig.tight_layout()
    return fig


def render(spec: FigureSpec) -> str:
    """Draw the figure and write it to spec.out (.svg or .png)."""
    suffix = spec.out.rsplit(".", 1)[-1].lower() if "." in spec.out else ""
    if suffix not in ("svg", "png"):
        raise ValueError(f"out: expected a .svg or .png path, got '{spec.out}'")
    fig = build_figure(spec)
    try:
        with matplotlib.rc_context({"svg.hashsalt": SVG_HASHSALT}):
            metadata = {"Date": None} if suffix == "svg" else None
            fig.savefig(spec.out, metadata=metadata)
    finally:
        plt.close(fig)
    return spec.out
