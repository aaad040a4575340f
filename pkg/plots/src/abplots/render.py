"""Violin and bias-summary charts from experiment CSV exports.

Input files follow the exporter's schemas:

    raw:     scenario,design,estimator,replication,estimate
    summary: scenario,design,estimator,mean,sd,bias,ci_low,ci_high,true_gte

Rendering is deterministic: a fixed style seed drives the point jitter and
the SVG id hash salt, so identical inputs give identical vector output.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

RAW_COLUMNS = ("scenario", "design", "estimator", "replication", "estimate")
SUMMARY_COLUMNS = (
    "scenario", "design", "estimator", "mean", "sd", "bias", "ci_low", "ci_high", "true_gte",
)
DESIGN_ORDER = ("SW", "IR", "PR", "SR")
STYLE_SEED = 20240115
POINT_COLOR = "#1f77b4"
REFERENCE_COLOR = "#d62728"


class SchemaError(ValueError):
    """Input CSV does not match the expected export schema."""


@dataclass(frozen=True)
class PanelSpec:
    """One violin panel: a raw export, its true-effect value, and the target."""

    csv_path: str
    true_gte: float
    out_path: str
    title: str | None = None
    estimator: str = "ipw"
    fmt: str = "svg"


def _read_rows(path: str, required: tuple[str, ...]) -> list[dict]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            for column in required:
                if column not in header:
                    raise SchemaError(f"{path}: missing required column '{column}'")
            return list(reader)
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc


def load_panel_estimates(path: str, estimator: str) -> dict[str, np.ndarray]:
    """Per-design estimate vectors from a raw export, in display order."""
    rows = _read_rows(path, RAW_COLUMNS)
    by_design: dict[str, list[float]] = {}
    for row in rows:
        if row["estimator"] != estimator:
            continue
        value = float(row["estimate"])
        if math.isnan(value):
            continue  # undefined replications (single-group assignments)
        by_design.setdefault(row["design"], []).append(value)
    if not by_design:
        raise SchemaError(f"{path}: no rows for estimator '{estimator}'")
    ordered = [d for d in DESIGN_ORDER if d in by_design]
    ordered += sorted(set(by_design) - set(DESIGN_ORDER))
    out = {}
    for design in ordered:
        values = np.asarray(by_design[design])
        if values.size < 2:
            raise SchemaError(
                f"{path}: design {design} has {values.size} replication(s); need at least 2"
            )
        out[design] = values
    return out


def _deterministic_figure():
    plt.rcParams["svg.hashsalt"] = str(STYLE_SEED)
    return plt.subplots(figsize=(6.0, 4.0), dpi=100)


def _save(fig, out_path: str, fmt: str) -> None:
    if fmt not in ("svg", "png"):
        raise SchemaError(f"unsupported output format '{fmt}'")
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, format=fmt, metadata={"Date": None} if fmt == "svg" else None)
    plt.close(fig)


def render_violin(panel: PanelSpec) -> str:
    """One violin per design with jittered estimate points and a red
    horizontal line at the supplied true effect. Returns the output path."""
    estimates = load_panel_estimates(panel.csv_path, panel.estimator)
    fig, ax = _deterministic_figure()
    positions = np.arange(1, len(estimates) + 1)
    parts = ax.violinplot(
        list(estimates.values()), positions=positions, showextrema=False, widths=0.8
    )
    for body in parts["bodies"]:
        body.set_facecolor("#9ecae1")
        body.set_alpha(0.6)
    jitter_rng = np.random.default_rng(STYLE_SEED)
    for pos, values in zip(positions, estimates.values()):
        x = pos + jitter_rng.uniform(-0.08, 0.08, size=values.size)
        ax.plot(x, values, linestyle="", marker="o", markersize=2.5,
                color=POINT_COLOR, alpha=0.65, zorder=3)
    ax.axhline(panel.true_gte, color=REFERENCE_COLOR, linewidth=1.2, zorder=2,
               label="true GTE")
    ax.set_xticks(positions)
    ax.set_xticklabels(list(estimates))
    ax.set_xlabel("design")
    ax.set_ylabel(f"{panel.estimator} estimate")
    if panel.title:
        ax.set_title(panel.title)
    ax.legend(loc="best", fontsize=8)
    _save(fig, panel.out_path, panel.fmt)
    return panel.out_path


def render_summary(
    csv_path: str,
    out_path: str,
    estimator: str = "ipw",
    title: str | None = None,
    fmt: str = "svg",
) -> str:
    """Bar chart of empirical bias per design with CI whiskers."""
    rows = [r for r in _read_rows(csv_path, SUMMARY_COLUMNS) if r["estimator"] == estimator]
    if not rows:
        raise SchemaError(f"{csv_path}: no rows for estimator '{estimator}'")
    rows.sort(key=lambda r: (DESIGN_ORDER.index(r["design"])
                             if r["design"] in DESIGN_ORDER else len(DESIGN_ORDER)))
    designs = [r["design"] for r in rows]
    bias = np.array([float(r["bias"]) for r in rows])
    gte = np.array([float(r["true_gte"]) for r in rows])
    low = np.array([float(r["ci_low"]) for r in rows]) - gte
    high = np.array([float(r["ci_high"]) for r in rows]) - gte
    errors = np.vstack([bias - low, high - bias])
    errors = np.where(np.isfinite(errors), errors, 0.0)
    fig, ax = _deterministic_figure()
    positions = np.arange(len(designs))
    ax.bar(positions, bias, color="#9ecae1", edgecolor=POINT_COLOR,
           yerr=errors, capsize=4, error_kw={"ecolor": "#444444", "elinewidth": 1.0})
    ax.axhline(0.0, color=REFERENCE_COLOR, linewidth=1.0)
    ax.set_xticks(positions)
    ax.set_xticklabels(designs)
    ax.set_xlabel("design")
    ax.set_ylabel(f"empirical bias ({estimator})")
    if title:
        ax.set_title(title)
    _save(fig, out_path, fmt)
    return out_path
