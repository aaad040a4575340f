"""Closed-form bias oracles and exact brute-force references.

The closed forms evaluate the expected IPW estimate minus the true effect for
each design, using analytic per-cell demand expectations. The brute-force
routines enumerate every assignment realization and every discrete demand
path through the full simulator, providing an independent check.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .demand import Discrete, overage_curve, overage_grid, quantile_grid, shift_matrix
from .designs import DesignKind, DesignSpec, inclusion_probability, sample_rollout_periods
from .errors import InvalidInputError, ResourceLimitError
from .estimators import expected_sales_profit, ipw_batch
from .inventory import (
    Scenario,
    Verdict,
    check_assumption1,
    check_assumption2_sw,
    check_assumption3,
    effective_level_matrix,
    extreme_level_matrices,
    pure_arm_levels,
    simulate_batch,
)

ENUM_MAX_ITEMS = 20
ATOM_BUDGET = 10_000_000
_DIST_MERGE_THRESHOLD = 4096
_TERM_ATOL = 1e-9


@dataclass(frozen=True, eq=False)
class BiasReport:
    """Bias of the IPW estimator under one design, with its decomposition."""

    design: DesignKind
    bias: float
    terms: dict[str, float]
    assumptions: dict[str, bool]
    condition10: bool
    mode: str
    std_error: float | None = None

    def __post_init__(self):
        total = sum(self.terms.values())
        if abs(total - self.bias) > _TERM_ATOL * max(1.0, abs(self.bias)):
            raise InvalidInputError("bias must equal the sum of its terms")


def check_condition10(scenario: Scenario) -> Verdict:
    """Largest possible level stays below the newsvendor quantile, per cell."""
    hi, _ = extreme_level_matrices(scenario)
    ratios = scenario.margins / scenario.prices
    thresholds = quantile_grid(scenario.demand, scenario.horizon, ratios)
    cells = hi <= thresholds + 1e-12 * np.maximum(1.0, np.abs(thresholds))
    return Verdict(ok=bool(cells.all()), cells=cells)


def lemma1_beta_bar(control_levels, capacity: float, alpha: float = 1.0) -> float:
    """Largest affine offset keeping scaled treated levels above control.

    For treatment levels alpha * control + beta with total control demand
    below capacity, offsets up to the returned bound preserve the level
    dominance after proportional scaling; the bound is infinite when every
    control level fits under an equal share of capacity.
    """
    s = np.asarray(control_levels, dtype=float)
    if s.ndim != 1 or np.any(s < 0):
        raise InvalidInputError("control levels must be a nonnegative vector")
    if alpha < 1.0:
        raise InvalidInputError("alpha must be >= 1")
    total = float(s.sum())
    if not total < capacity:
        raise InvalidInputError("total control level must be strictly below capacity")
    n = s.size
    peak = float(s.max())
    if peak <= capacity / n:
        return float("inf")
    return alpha * (capacity - total) / (n - capacity / peak)


def _sw_assumptions(scenario: Scenario) -> dict[str, bool]:
    return {
        "assumption1": check_assumption1(scenario).ok,
        "assumption2": check_assumption2_sw(scenario).ok,
    }


def bias_sw(scenario: Scenario, p: float = 0.5) -> BiasReport:
    """Switchback bias: minus the carryover-cost gap between the pure arms.

    The final expression does not depend on p; the argument is kept for
    signature symmetry with the other oracles.
    """
    del p
    treated, control = pure_arm_levels(scenario)
    ov_gap = overage_grid(scenario.demand, treated) - overage_grid(scenario.demand, control)
    carry = scenario.costs[:, None] * ov_gap
    value = -float(carry[:, : scenario.horizon - 1].sum()) / (scenario.n_items * scenario.horizon)
    return BiasReport(
        design=DesignKind.SW,
        bias=value,
        terms={"carryover": value},
        assumptions=_sw_assumptions(scenario),
        condition10=check_condition10(scenario).ok,
        mode="closed-form",
    )


def _others_delta_distribution(scenario: Scenario, n: int, t: int, q: float):
    """Distribution of the other items' blended level sum above all-control.

    Each other item independently contributes its treatment-minus-control gap
    with probability q. Returns (values, probs); exact, with equal sums
    merged.
    """
    s_c = scenario.control_schedule[:, t - 1]
    s_t = scenario.treatment_schedule[:, t - 1]
    deltas = np.delete(s_t - s_c, n)
    values = np.zeros(1)
    probs = np.ones(1)
    for delta in deltas:
        if delta == 0.0 or q == 0.0:
            continue
        if q == 1.0:
            values = values + delta
            continue
        values = np.concatenate([values, values + delta])
        probs = np.concatenate([probs * (1.0 - q), probs * q])
        if values.size > _DIST_MERGE_THRESHOLD:
            values, inverse = np.unique(values, return_inverse=True)
            probs = np.bincount(inverse, weights=probs)
    return values, probs


def _scaled_own_levels(scenario: Scenario, own: float, base: float, delta_values: np.ndarray):
    totals = base + delta_values
    cap = scenario.capacity
    factors = np.where(totals > cap, cap / np.maximum(totals, 1e-300), 1.0)
    return factors * own


def _conditional_tables(scenario: Scenario, q_by_period: np.ndarray):
    """Per-cell conditional expectations given the item's own arm.

    ``q_by_period[t-1]`` is the probability any *other* item is treated in
    period t. Returns four (N, H) grids: expected sales profit given own arm
    treated / control, and expected leftover overage given treated / control.
    """
    n_items, horizon = scenario.n_items, scenario.horizon
    if n_items > ENUM_MAX_ITEMS:
        raise ResourceLimitError(
            f"enumeration over 2^(N-1) co-assignments is capped at N <= {ENUM_MAX_ITEMS}; "
            "use mode='mc'"
        )
    model = scenario.demand
    margins = scenario.margins
    prof1 = np.empty((n_items, horizon))
    prof0 = np.empty((n_items, horizon))
    over1 = np.empty((n_items, horizon))
    over0 = np.empty((n_items, horizon))
    for t in range(1, horizon + 1):
        s_c = scenario.control_schedule[:, t - 1]
        s_t = scenario.treatment_schedule[:, t - 1]
        sum_c = s_c.sum()
        q = float(q_by_period[t - 1])
        for n in range(n_items):
            delta_values, probs = _others_delta_distribution(scenario, n, t, q)
            lv1 = _scaled_own_levels(scenario, s_t[n], sum_c - s_c[n] + s_t[n], delta_values)
            lv0 = _scaled_own_levels(scenario, s_c[n], sum_c, delta_values)
            ov1 = overage_curve(model, n, t, lv1)
            ov0 = overage_curve(model, n, t, lv0)
            over1[n, t - 1] = probs @ ov1
            over0[n, t - 1] = probs @ ov0
            prof1[n, t - 1] = probs @ (margins[n] * (lv1 - ov1))
            prof0[n, t - 1] = probs @ (margins[n] * (lv0 - ov0))
    return prof1, prof0, over1, over0


def _conditional_grids_from_draw(scenario: Scenario, w: np.ndarray):
    """Conditional level grids (own arm forced) for one draw of everyone else."""
    blended = np.where(w.astype(bool), scenario.treatment_schedule, scenario.control_schedule)
    colsums = blended.sum(axis=0)[None, :]
    cap = scenario.capacity
    totals1 = colsums - blended + scenario.treatment_schedule
    totals0 = colsums - blended + scenario.control_schedule
    k1 = np.where(totals1 > cap, cap / np.maximum(totals1, 1e-300), 1.0)
    k0 = np.where(totals0 > cap, cap / np.maximum(totals0, 1e-300), 1.0)
    return k1 * scenario.treatment_schedule, k0 * scenario.control_schedule


def _ir_pr_terms_enumerate(scenario: Scenario, p: float):
    treated, control = pure_arm_levels(scenario)
    pure1 = expected_sales_profit(scenario, treated)
    pure0 = expected_sales_profit(scenario, control)
    q = np.full(scenario.horizon, p)
    prof1, prof0, over1, over0 = _conditional_tables(scenario, q)
    cells = scenario.n_items * scenario.horizon
    term_treated = float((prof1 - pure1).sum()) / cells
    term_control = -float((prof0 - pure0).sum()) / cells
    carry = scenario.costs[:, None] * (over1 - over0)
    term_switch = -float(carry[:, : scenario.horizon - 1].sum()) / cells
    return term_treated, term_control, term_switch


def _ir_pr_terms_mc(scenario: Scenario, p: float, kind: DesignKind, reps: int, rng):
    """Per-replication samples of the three term columns (treated, control,
    switching); callers keep the columns their design actually sums."""
    treated, control = pure_arm_levels(scenario)
    pure1 = expected_sales_profit(scenario, treated)
    pure0 = expected_sales_profit(scenario, control)
    n_items, horizon = scenario.n_items, scenario.horizon
    cells = n_items * horizon
    samples = np.empty((reps, 3))
    for r in range(reps):
        if kind is DesignKind.IR:
            rows = rng.random(n_items) < p
            w = np.broadcast_to(rows[:, None], (n_items, horizon))
        else:
            w = rng.random((n_items, horizon)) < p
        lv1, lv0 = _conditional_grids_from_draw(scenario, w)
        prof1 = expected_sales_profit(scenario, lv1)
        prof0 = expected_sales_profit(scenario, lv0)
        over1 = overage_grid(scenario.demand, lv1)
        over0 = overage_grid(scenario.demand, lv0)
        carry = scenario.costs[:, None] * (over1 - over0)
        samples[r, 0] = (prof1 - pure1).sum() / cells
        samples[r, 1] = -(prof0 - pure0).sum() / cells
        samples[r, 2] = -carry[:, : horizon - 1].sum() / cells
    return samples


def bias_ir(
    scenario: Scenario,
    p: float,
    mode: str = "enumerate",
    mc_reps: int = 2000,
    rng: np.random.Generator | None = None,
) -> BiasReport:
    """Item-level randomization bias: conditional-arm profit gaps."""
    se = None
    if mode == "enumerate":
        term_treated, term_control, _ = _ir_pr_terms_enumerate(scenario, p)
    elif mode == "mc":
        rng = rng if rng is not None else np.random.default_rng(0)
        samples = _ir_pr_terms_mc(scenario, p, DesignKind.IR, mc_reps, rng)
        term_treated, term_control = (float(v) for v in samples[:, :2].mean(axis=0))
        se = float(samples[:, :2].sum(axis=1).std(ddof=1) / np.sqrt(mc_reps))
    else:
        raise InvalidInputError("mode must be 'enumerate' or 'mc'")
    terms = {"treated_vs_gt": term_treated, "control_vs_gc": term_control}
    return BiasReport(
        design=DesignKind.IR,
        bias=term_treated + term_control,
        terms=terms,
        assumptions={"assumption3": check_assumption3(scenario).ok},
        condition10=check_condition10(scenario).ok,
        mode=mode,
        std_error=se,
    )


def bias_pr(
    scenario: Scenario,
    p: float,
    mode: str = "enumerate",
    mc_reps: int = 2000,
    rng: np.random.Generator | None = None,
) -> BiasReport:
    """Pairwise randomization bias: the item-level gaps plus a switching term."""
    se = None
    if mode == "enumerate":
        term_treated, term_control, term_switch = _ir_pr_terms_enumerate(scenario, p)
    elif mode == "mc":
        rng = rng if rng is not None else np.random.default_rng(0)
        samples = _ir_pr_terms_mc(scenario, p, DesignKind.PR, mc_reps, rng)
        term_treated, term_control, term_switch = (float(v) for v in samples.mean(axis=0))
        se = float(samples.sum(axis=1).std(ddof=1) / np.sqrt(mc_reps))
    else:
        raise InvalidInputError("mode must be 'enumerate' or 'mc'")
    terms = {
        "treated_vs_gt": term_treated,
        "control_vs_gc": term_control,
        "switching": term_switch,
    }
    return BiasReport(
        design=DesignKind.PR,
        bias=sum(terms.values()),
        terms=terms,
        assumptions={"assumption3": check_assumption3(scenario).ok},
        condition10=check_condition10(scenario).ok,
        mode=mode,
        std_error=se,
    )


def _is_stationary(scenario: Scenario) -> bool:
    model = scenario.demand
    stationary_demand = model.trend_slope == 0.0 and not np.any(model.amplitude != 0.0)
    stationary_levels = bool(
        np.all(scenario.control_schedule == scenario.control_schedule[:, :1])
        and np.all(scenario.treatment_schedule == scenario.treatment_schedule[:, :1])
    )
    return stationary_demand and stationary_levels


def bias_sr(
    scenario: Scenario,
    design: DesignSpec,
    mode: str = "enumerate",
    mc_reps: int = 2000,
    rng: np.random.Generator | None = None,
) -> BiasReport:
    """Staggered rollout bias: four terms over the random switch periods."""
    if design.kind is not DesignKind.SR or design.sr_weights is None:
        raise InvalidInputError("bias_sr needs an SR design with weights")
    weights = design.sr_weights
    if weights.size != scenario.horizon:
        raise InvalidInputError("sr_weights length must equal the horizon")
    p = inclusion_probability(design)
    if not 0.0 < p < 1.0:
        raise InvalidInputError("SR weights must give a treated fraction inside (0, 1)")
    n_items, horizon = scenario.n_items, scenario.horizon
    cells = n_items * horizon
    treated, control = pure_arm_levels(scenario)
    pure1 = expected_sales_profit(scenario, treated)
    pure0 = expected_sales_profit(scenario, control)
    mixed = (1.0 - p) * pure1 + p * pure0
    # q[t-1] = probability an item is already treated in period t
    q = np.concatenate([[0.0], np.cumsum(weights)[:-1]])
    se = None
    if mode == "enumerate":
        prof1, prof0, _, over0 = _conditional_tables(scenario, q)
        costs = scenario.costs
        term_leftover = float(
            (costs[:, None] * over0[:, : horizon - 1] * weights[None, : horizon - 1]).sum()
        ) / (cells * p * (1.0 - p))
        term_treated = float(((prof1 - pure1) * q[None, :]).sum()) / (cells * p)
        term_control = -float(((prof0 - pure0) * (1.0 - q)[None, :]).sum()) / (cells * (1.0 - p))
        time_weight = q / (cells * p) - (1.0 - q) / (cells * (1.0 - p))
        term_time = float((mixed * time_weight[None, :]).sum())
    elif mode == "mc":
        rng = rng if rng is not None else np.random.default_rng(0)
        samples = np.empty((mc_reps, 4))
        t_index = np.arange(1, horizon + 1)
        for r in range(mc_reps):
            last_control = sample_rollout_periods(weights, n_items, rng)
            w = t_index[None, :] > last_control[:, None]
            levels, _ = effective_level_matrix(scenario, w.astype(np.int8))
            prof = expected_sales_profit(scenario, levels)
            over = overage_grid(scenario.demand, levels)
            switch_cells = last_control != horizon
            rows = np.arange(n_items)[switch_cells]
            cols = last_control[switch_cells] - 1
            samples[r, 0] = (scenario.costs[rows] * over[rows, cols]).sum() / (
                cells * p * (1.0 - p)
            )
            samples[r, 1] = ((prof - pure1) * w).sum() / (cells * p)
            samples[r, 2] = -((prof - pure0) * ~w).sum() / (cells * (1.0 - p))
            samples[r, 3] = (mixed * w).sum() / (cells * p) - (mixed * ~w).sum() / (
                cells * (1.0 - p)
            )
        means = samples.mean(axis=0)
        se = float(samples.sum(axis=1).std(ddof=1) / np.sqrt(mc_reps))
        term_leftover, term_treated, term_control, term_time = (float(v) for v in means)
    else:
        raise InvalidInputError("mode must be 'enumerate' or 'mc'")
    terms = {
        "transition_leftover": term_leftover,
        "treated_vs_gt": term_treated,
        "control_vs_gc": term_control,
        "time_weighting": term_time,
    }
    return BiasReport(
        design=DesignKind.SR,
        bias=sum(terms.values()),
        terms=terms,
        assumptions={
            "assumption3": check_assumption3(scenario).ok,
            "stationary": _is_stationary(scenario),
        },
        condition10=check_condition10(scenario).ok,
        mode=mode,
        std_error=se,
    )


def _assignment_atoms(design: DesignSpec, n_items: int, horizon: int):
    """Yield every (matrix, probability) pair in the design's support."""
    kind, p = design.kind, design.p
    if kind is DesignKind.SW:
        for bits in itertools.product((0, 1), repeat=horizon):
            cols = np.array(bits, dtype=np.int8)
            prob = float(np.prod(np.where(cols == 1, p, 1.0 - p)))
            if prob == 0.0:
                continue
            yield np.broadcast_to(cols, (n_items, horizon)), prob
    elif kind is DesignKind.IR:
        for bits in itertools.product((0, 1), repeat=n_items):
            rows = np.array(bits, dtype=np.int8)
            prob = float(np.prod(np.where(rows == 1, p, 1.0 - p)))
            if prob == 0.0:
                continue
            yield np.broadcast_to(rows[:, None], (n_items, horizon)), prob
    elif kind is DesignKind.PR:
        for bits in itertools.product((0, 1), repeat=n_items * horizon):
            w = np.array(bits, dtype=np.int8).reshape(n_items, horizon)
            prob = float(np.prod(np.where(w.ravel() == 1, p, 1.0 - p)))
            if prob == 0.0:
                continue
            yield w, prob
    else:
        if design.sr_weights is None or design.sr_weights.size != horizon:
            raise InvalidInputError("SR design requires weights matching the horizon")
        support = [h for h in range(1, horizon + 1) if design.sr_weights[h - 1] > 0.0]
        t_index = np.arange(1, horizon + 1)
        for combo in itertools.product(support, repeat=n_items):
            last_control = np.array(combo)
            prob = float(np.prod(design.sr_weights[last_control - 1]))
            yield (t_index[None, :] > last_control[:, None]).astype(np.int8), prob


def _count_assignments(design: DesignSpec, n_items: int, horizon: int) -> int:
    kind = design.kind
    if kind is DesignKind.SW:
        return 2**horizon
    if kind is DesignKind.IR:
        return 2**n_items
    if kind is DesignKind.PR:
        return 2 ** (n_items * horizon)
    if design.sr_weights is None:
        raise InvalidInputError("SR design requires sr_weights")
    return int(np.count_nonzero(design.sr_weights)) ** n_items


def _demand_atoms(scenario: Scenario):
    """All discrete demand paths: (paths, probs) with paths shaped (P, N, H)."""
    noise = scenario.demand.noise
    if not isinstance(noise, Discrete):
        raise InvalidInputError("exact demand-path enumeration requires discrete demand")
    n_items, horizon = scenario.n_items, scenario.horizon
    shifts = shift_matrix(scenario.demand, horizon)
    values = shifts[:, :, None] + noise.support[None, None, :]
    if scenario.demand.clamp_at_zero:
        values = np.maximum(values, 0.0)
    k = noise.support.size
    cells = n_items * horizon
    count = k**cells
    idx = np.stack(np.unravel_index(np.arange(count), (k,) * cells), axis=1)
    flat_values = values.reshape(cells, k)
    paths = flat_values[np.arange(cells)[None, :], idx].reshape(count, n_items, horizon)
    probs = np.prod(noise.probs[idx], axis=1)
    return paths, probs


def _demand_path_count(scenario: Scenario) -> int:
    noise = scenario.demand.noise
    if not isinstance(noise, Discrete):
        raise InvalidInputError("exact demand-path enumeration requires discrete demand")
    return int(noise.support.size) ** (scenario.n_items * scenario.horizon)


def brute_force_expected_estimate(
    scenario: Scenario, design: DesignSpec, p: float | None = None
) -> float:
    """Exact E[IPW estimate] by enumerating assignments and demand paths."""
    n_items, horizon = scenario.n_items, scenario.horizon
    n_w = _count_assignments(design, n_items, horizon)
    n_paths = _demand_path_count(scenario)
    atoms = n_w * n_paths
    if atoms > ATOM_BUDGET:
        raise ResourceLimitError(
            f"{atoms} assignment x demand atoms exceed the budget of {ATOM_BUDGET}"
        )
    p_eff = p if p is not None else (
        inclusion_probability(design) if design.kind is DesignKind.SR else design.p
    )
    paths, probs = _demand_atoms(scenario)
    expected = 0.0
    for w, w_prob in _assignment_atoms(design, n_items, horizon):
        profits = simulate_batch(scenario, w, paths)
        estimates = ipw_batch(profits, w[None, :, :], p_eff)
        expected += w_prob * float(probs @ estimates)
    return expected


def brute_force_gte(scenario: Scenario) -> float:
    """Exact GTE by enumerating discrete demand paths through the simulator."""
    n_paths = _demand_path_count(scenario)
    if 2 * n_paths > ATOM_BUDGET:
        raise ResourceLimitError(f"{2 * n_paths} demand atoms exceed the budget of {ATOM_BUDGET}")
    paths, probs = _demand_atoms(scenario)
    shape = (scenario.n_items, scenario.horizon)
    gt = simulate_batch(scenario, np.ones(shape, dtype=np.int8), paths).sum(axis=(1, 2))
    gc = simulate_batch(scenario, np.zeros(shape, dtype=np.int8), paths).sum(axis=(1, 2))
    return float(probs @ (gt - gc)) / (scenario.n_items * scenario.horizon)
