"""Treatment-effect estimators and true-effect references."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .demand import essinf_matrix, overage_grid, sample_matrix
from .errors import AnalyticInvalidError, InvalidInputError, UndefinedEstimatorError
from .inventory import Scenario, SimTrace, pure_arm_levels, simulate_batch

_GTE_MC_CHUNK = 256


@dataclass(frozen=True)
class EstimateResult:
    """A single estimate of the global treatment effect."""

    value: float
    design: str
    replication: int | None = None


@dataclass(frozen=True)
class GteReference:
    """The true effect, either closed-form or Monte Carlo with a 95% CI."""

    value: float
    method: str
    ci_halfwidth: float = 0.0
    reps: int | None = None

    def __post_init__(self):
        if self.ci_halfwidth < 0:
            raise InvalidInputError("ci_halfwidth must be nonnegative")


def _profits_and_w(trace, assignment):
    profits = trace.profit_matrix if isinstance(trace, SimTrace) else np.asarray(trace, dtype=float)
    w = np.asarray(getattr(assignment, "w", assignment))
    if profits.shape != w.shape:
        raise InvalidInputError("profit and assignment shapes must match")
    return profits, w


def _design_label(assignment) -> str:
    design = getattr(assignment, "design", None)
    return design.label if design is not None else "custom"


def ipw_estimate(trace, assignment, p: float, replication: int | None = None) -> EstimateResult:
    """Inverse-probability-weighted contrast of per-cell profits."""
    if not 0.0 < p < 1.0:
        raise InvalidInputError("p must lie strictly inside (0, 1)")
    profits, w = _profits_and_w(trace, assignment)
    value = float(np.mean(w * profits / p - (1 - w) * profits / (1.0 - p)))
    return EstimateResult(value=value, design=_design_label(assignment), replication=replication)


def ipw_batch(profits: np.ndarray, w: np.ndarray, p: float) -> np.ndarray:
    """Per-replication IPW estimates for (R, N, H) stacks."""
    if not 0.0 < p < 1.0:
        raise InvalidInputError("p must lie strictly inside (0, 1)")
    return np.mean(w * profits / p - (1 - w) * profits / (1.0 - p), axis=(1, 2))


def diff_in_means(trace, assignment, replication: int | None = None) -> EstimateResult:
    """Treated-cell mean profit minus control-cell mean profit."""
    profits, w = _profits_and_w(trace, assignment)
    treated = w.astype(bool)
    if treated.all() or not treated.any():
        raise UndefinedEstimatorError("both a treated and a control cell are required")
    value = float(profits[treated].mean() - profits[~treated].mean())
    return EstimateResult(value=value, design=_design_label(assignment), replication=replication)


def expected_sales_profit(scenario: Scenario, levels: np.ndarray) -> np.ndarray:
    """E margin*min(level, D) per cell for an (N, H) level grid."""
    overage = overage_grid(scenario.demand, levels)
    return scenario.margins[:, None] * (levels - overage)


def order_up_to_always_reached(scenario: Scenario, levels: np.ndarray, essinf: np.ndarray) -> bool:
    """Whether a fixed level path keeps carryover below next period's level."""
    if np.any(scenario.initial_inventory > levels[:, 0]):
        return False
    if scenario.horizon == 1:
        return True
    gap = levels[:, :-1] - essinf[:, :-1]
    return bool(np.all(gap <= levels[:, 1:] + 1e-12))


def true_gte_analytic(scenario: Scenario) -> GteReference:
    """Closed-form GTE, valid when both pure arms always reach their levels."""
    treated, control = pure_arm_levels(scenario)
    essinf = essinf_matrix(scenario.demand, scenario.horizon)
    for arm_levels, label in ((treated, "treated"), (control, "control")):
        if not order_up_to_always_reached(scenario, arm_levels, essinf):
            raise AnalyticInvalidError(
                f"the {label} arm may carry inventory above a later level; "
                "the closed form does not apply - use true_gte_mc"
            )
    cells = expected_sales_profit(scenario, treated) - expected_sales_profit(scenario, control)
    return GteReference(value=float(cells.mean()), method="analytic")


def true_gte_mc(scenario: Scenario, reps: int, rng: np.random.Generator) -> GteReference:
    """Monte Carlo GTE with common demand draws for the two arms."""
    if reps < 2:
        raise InvalidInputError("reps must be >= 2")
    n, h = scenario.n_items, scenario.horizon
    ones = np.ones((n, h), dtype=np.int8)
    zeros = np.zeros((n, h), dtype=np.int8)
    diffs = np.empty(reps)
    done = 0
    while done < reps:
        chunk = min(_GTE_MC_CHUNK, reps - done)
        demand = np.stack([sample_matrix(scenario.demand, h, rng) for _ in range(chunk)])
        gt = simulate_batch(scenario, ones, demand).sum(axis=(1, 2))
        gc = simulate_batch(scenario, zeros, demand).sum(axis=(1, 2))
        diffs[done : done + chunk] = (gt - gc) / (n * h)
        done += chunk
    mean = float(diffs.mean())
    halfwidth = float(1.96 * diffs.std(ddof=1) / np.sqrt(reps))
    return GteReference(value=mean, method="monte-carlo", ci_halfwidth=halfwidth, reps=reps)
