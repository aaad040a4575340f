"""Multi-item lost-sales inventory dynamics under a shared capacity budget.

Each period: order up to the scaled target level, satisfy demand, carry the
leftover forward; leftovers at the end of the horizon earn their unit order
cost back as salvage, folded into the final period's profit. Items are
indexed 0-based, periods 1-based.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .demand import DemandModel, essinf_matrix
from .errors import InvalidInputError

CAPACITY_RTOL = 1e-9


@dataclass(frozen=True)
class ItemParams:
    """Unit economics of a single item."""

    sell_price: float
    order_cost: float

    def __post_init__(self):
        if not self.sell_price > self.order_cost > 0:
            raise InvalidInputError("need sell_price > order_cost > 0")


@dataclass(frozen=True, eq=False)
class Scenario:
    """A full problem instance: items, horizon, capacity, demand, schedules.

    ``control_schedule`` and ``treatment_schedule`` are (N, H) matrices of
    predetermined order-up-to levels; treatment must dominate control
    entrywise (the uniform-treatment requirement the bias analysis needs).
    """

    n_items: int
    horizon: int
    capacity: float
    items: tuple[ItemParams, ...]
    demand: DemandModel
    control_schedule: np.ndarray
    treatment_schedule: np.ndarray
    initial_inventory: np.ndarray | None = None
    name: str = "scenario"

    def __post_init__(self):
        if self.n_items < 1 or self.horizon < 1:
            raise InvalidInputError("need n_items >= 1 and horizon >= 1")
        if not self.capacity > 0:
            raise InvalidInputError("capacity must be positive")
        if len(self.items) != self.n_items:
            raise InvalidInputError("items must have one entry per item")
        shape = (self.n_items, self.horizon)
        for attr in ("control_schedule", "treatment_schedule"):
            mat = np.asarray(getattr(self, attr), dtype=float)
            if mat.shape != shape:
                raise InvalidInputError(f"{attr} must have shape {shape}")
            if np.any(mat < 0) or not np.all(np.isfinite(mat)):
                raise InvalidInputError(f"{attr} entries must be finite and >= 0")
            object.__setattr__(self, attr, mat)
        if np.any(self.control_schedule > self.treatment_schedule):
            raise InvalidInputError("control levels must not exceed treatment levels")
        if self.demand.n_items != self.n_items:
            raise InvalidInputError("demand model item count mismatch")
        x0 = self.initial_inventory
        x0 = np.zeros(self.n_items) if x0 is None else np.asarray(x0, dtype=float)
        if x0.shape != (self.n_items,) or np.any(x0 < 0):
            raise InvalidInputError("initial_inventory must be a nonnegative N-vector")
        object.__setattr__(self, "initial_inventory", x0)
        object.__setattr__(self, "items", tuple(self.items))

    @property
    def prices(self) -> np.ndarray:
        return np.array([it.sell_price for it in self.items])

    @property
    def costs(self) -> np.ndarray:
        return np.array([it.order_cost for it in self.items])

    @property
    def margins(self) -> np.ndarray:
        return self.prices - self.costs


@dataclass(frozen=True, eq=False)
class SystemState:
    """On-hand inventory at the start of a period (period in [1, H+1])."""

    period: int
    on_hand: np.ndarray


@dataclass(frozen=True, eq=False)
class PeriodRecord:
    """Everything realized in one period, after capacity scaling."""

    levels: np.ndarray
    post_order: np.ndarray
    orders: np.ndarray
    demand: np.ndarray
    profit: np.ndarray
    scale_factor: float


@dataclass(frozen=True, eq=False)
class SimTrace:
    """One simulated horizon; salvage is folded into the final record's profit."""

    records: tuple[PeriodRecord, ...]
    salvage: np.ndarray

    @property
    def profit_matrix(self) -> np.ndarray:
        """(N, H) per-cell profit, salvage included in the last column."""
        return np.column_stack([rec.profit for rec in self.records])

    @property
    def total_profit(self) -> float:
        return float(sum(rec.profit.sum() for rec in self.records))


def scale_base_stock(predetermined, capacity: float):
    """Shrink levels proportionally so their sum fits within capacity.

    Returns ``(levels, factor)`` with factor = min(1, capacity / sum); an
    all-zero input needs no scaling and keeps factor 1.
    """
    s = np.asarray(predetermined, dtype=float)
    if s.ndim != 1:
        raise InvalidInputError("levels must be a vector")
    if np.any(s < 0) or not np.all(np.isfinite(s)):
        raise InvalidInputError("levels must be finite and nonnegative")
    if not capacity > 0:
        raise InvalidInputError("capacity must be positive")
    total = float(s.sum())
    factor = 1.0 if total <= capacity else capacity / total
    return s * factor, factor


def effective_levels(scenario: Scenario, w, t: int) -> np.ndarray:
    """Realized order-up-to levels in period t under assignment column w."""
    w = np.asarray(w)
    if w.shape != (scenario.n_items,):
        raise InvalidInputError("assignment column must have one entry per item")
    if not 1 <= t <= scenario.horizon:
        raise InvalidInputError("period out of range")
    blended = np.where(
        w.astype(bool),
        scenario.treatment_schedule[:, t - 1],
        scenario.control_schedule[:, t - 1],
    )
    levels, _ = scale_base_stock(blended, scenario.capacity)
    return levels


def effective_level_matrix(scenario: Scenario, w_matrix) -> tuple[np.ndarray, np.ndarray]:
    """Realized levels for a whole assignment matrix.

    Returns ``(levels, factors)`` with shapes (N, H) and (H,).
    """
    w = np.asarray(w_matrix)
    shape = (scenario.n_items, scenario.horizon)
    if w.shape != shape:
        raise InvalidInputError(f"assignment matrix must have shape {shape}")
    blended = np.where(w.astype(bool), scenario.treatment_schedule, scenario.control_schedule)
    totals = blended.sum(axis=0)
    with np.errstate(divide="ignore"):
        factors = np.where(totals > scenario.capacity, scenario.capacity / totals, 1.0)
    return blended * factors[None, :], factors


def profit_plus(item: ItemParams, level: float, demand: float) -> float:
    """Margin earned on sold units when the order-up-to level is reached."""
    if level < 0 or demand < 0:
        raise InvalidInputError("level and demand must be nonnegative")
    return (item.sell_price - item.order_cost) * min(level, demand)


def step_period(
    state: SystemState,
    levels: np.ndarray,
    demand: np.ndarray,
    items: tuple[ItemParams, ...],
    scale_factor: float = 1.0,
) -> tuple[SystemState, PeriodRecord]:
    """Advance one period: order up to the levels, sell, carry leftovers."""
    x = np.asarray(state.on_hand, dtype=float)
    levels = np.asarray(levels, dtype=float)
    demand = np.asarray(demand, dtype=float)
    if not (x.shape == levels.shape == demand.shape == (len(items),)):
        raise InvalidInputError("state, levels, demand and items sizes must match")
    if np.any(x < 0) or np.any(levels < 0) or np.any(demand < 0):
        raise InvalidInputError("inventory, levels and demand must be nonnegative")
    prices = np.array([it.sell_price for it in items])
    costs = np.array([it.order_cost for it in items])
    orders = np.maximum(levels - x, 0.0)
    post_order = x + orders
    profit = prices * np.minimum(post_order, demand) - costs * orders
    carry = np.maximum(post_order - demand, 0.0)
    record = PeriodRecord(
        levels=levels,
        post_order=post_order,
        orders=orders,
        demand=demand,
        profit=profit,
        scale_factor=scale_factor,
    )
    return SystemState(period=state.period + 1, on_hand=carry), record


def simulate_horizon(scenario: Scenario, assignment, demand_trace) -> SimTrace:
    """Run the full horizon under an assignment matrix and demand trace."""
    w = getattr(assignment, "w", assignment)
    demand_trace = np.asarray(demand_trace, dtype=float)
    shape = (scenario.n_items, scenario.horizon)
    if demand_trace.shape != shape:
        raise InvalidInputError(f"demand trace must have shape {shape}")
    if np.any(demand_trace < 0):
        raise InvalidInputError("demand must be nonnegative")
    levels, factors = effective_level_matrix(scenario, w)
    state = SystemState(period=1, on_hand=scenario.initial_inventory)
    records = []
    for t in range(1, scenario.horizon + 1):
        state, record = step_period(
            state, levels[:, t - 1], demand_trace[:, t - 1], scenario.items, factors[t - 1]
        )
        records.append(record)
    salvage = scenario.costs * state.on_hand
    records[-1] = dataclasses.replace(records[-1], profit=records[-1].profit + salvage)
    return SimTrace(records=tuple(records), salvage=salvage)


def simulate_batch(scenario: Scenario, w, demand) -> np.ndarray:
    """Profit matrices for a batch of replications, shape (R, N, H).

    ``w`` may be a single (N, H) matrix broadcast across the batch or a
    (R, N, H) stack; ``demand`` is (R, N, H). Salvage is folded into the
    final period. Equivalent to stacking ``simulate_horizon`` outputs.
    """
    demand = np.asarray(demand, dtype=float)
    if demand.ndim != 3:
        raise InvalidInputError("batch demand must have shape (R, N, H)")
    reps = demand.shape[0]
    w = np.asarray(getattr(w, "w", w))
    if w.ndim == 2:
        levels, _ = effective_level_matrix(scenario, w)
        levels = np.broadcast_to(levels, (reps, *levels.shape))
    else:
        blended = np.where(w.astype(bool), scenario.treatment_schedule, scenario.control_schedule)
        totals = blended.sum(axis=1)
        factors = np.where(totals > scenario.capacity, scenario.capacity / totals, 1.0)
        levels = blended * factors[:, None, :]
    prices, costs = scenario.prices, scenario.costs
    x = np.broadcast_to(scenario.initial_inventory, (reps, scenario.n_items)).copy()
    profits = np.empty_like(demand)
    for t in range(scenario.horizon):
        lv, d = levels[:, :, t], demand[:, :, t]
        orders = np.maximum(lv - x, 0.0)
        post = x + orders
        profits[:, :, t] = prices * np.minimum(post, d) - costs * orders
        x = np.maximum(post - d, 0.0)
    profits[:, :, -1] += costs * x
    return profits


def extreme_levels(scenario: Scenario, n: int, t: int) -> tuple[float, float]:
    """Max and min realized level for item n in period t over all assignments.

    With treatment dominating control, the max is attained when only item n
    is treated and the min when only item n is in control.
    """
    s_c = scenario.control_schedule[:, t - 1]
    s_t = scenario.treatment_schedule[:, t - 1]
    others_control = s_c.sum() - s_c[n]
    others_treated = s_t.sum() - s_t[n]
    hi = _scaled_level(s_t[n], others_control + s_t[n], scenario.capacity)
    lo = _scaled_level(s_c[n], others_treated + s_c[n], scenario.capacity)
    return hi, lo


def _scaled_level(own: float, total: float, capacity: float) -> float:
    if total <= capacity:
        return float(own)
    return float(own * capacity / total)


def extreme_level_matrices(scenario: Scenario) -> tuple[np.ndarray, np.ndarray]:
    """(N, H) grids of the per-cell max and min levels over all assignments."""
    s_c, s_t = scenario.control_schedule, scenario.treatment_schedule
    sum_c = s_c.sum(axis=0)[None, :]
    sum_t = s_t.sum(axis=0)[None, :]
    total_hi = sum_c - s_c + s_t
    total_lo = sum_t - s_t + s_c
    cap = scenario.capacity
    hi = np.where(total_hi > cap, s_t * cap / np.maximum(total_hi, 1e-300), s_t)
    lo = np.where(total_lo > cap, s_c * cap / np.maximum(total_lo, 1e-300), s_c)
    return hi, lo


@dataclass(frozen=True, eq=False)
class Verdict:
    """Boolean check outcome with its per-cell breakdown."""

    ok: bool
    cells: np.ndarray


def pure_arm_levels(scenario: Scenario) -> tuple[np.ndarray, np.ndarray]:
    """Realized (N, H) levels under the all-treated and all-control arms."""
    ones = np.ones((scenario.n_items, scenario.horizon), dtype=np.int8)
    treated, _ = effective_level_matrix(scenario, ones)
    control, _ = effective_level_matrix(scenario, np.zeros_like(ones))
    return treated, control


_CHECK_ATOL = 1e-12


def check_assumption1(scenario: Scenario) -> Verdict:
    """Scaled all-treated levels dominate scaled all-control levels everywhere."""
    treated, control = pure_arm_levels(scenario)
    cells = control <= treated + _CHECK_ATOL * np.maximum(1.0, treated)
    return Verdict(ok=bool(cells.all()), cells=cells)


def _resolve_essinf(scenario: Scenario, essinf) -> np.ndarray:
    if essinf is None:
        return essinf_matrix(scenario.demand, scenario.horizon)
    essinf = np.asarray(essinf, dtype=float)
    if essinf.shape != (scenario.n_items, scenario.horizon):
        raise InvalidInputError("essinf matrix must have shape (N, H)")
    return essinf


def _transition_verdict(hi: np.ndarray, lo: np.ndarray, essinf: np.ndarray) -> Verdict:
    # hi/lo are (N, H) level extremes; the drop from any period-t level to the
    # next period's smallest level must be covered by guaranteed demand.
    if hi.shape[1] == 1:
        cells = np.ones((hi.shape[0], 0), dtype=bool)
        return Verdict(ok=True, cells=cells)
    gap = hi[:, :-1] - lo[:, 1:]
    cells = gap <= essinf[:, :-1] + _CHECK_ATOL * np.maximum(1.0, np.abs(gap))
    return Verdict(ok=bool(cells.all()), cells=cells)


def check_assumption2_sw(scenario: Scenario, essinf=None) -> Verdict:
    """Level drops between consecutive periods over the two pure arms are
    covered by the demand floor (so orders are placed every period)."""
    essinf = _resolve_essinf(scenario, essinf)
    treated, control = pure_arm_levels(scenario)
    hi = np.maximum(treated, control)
    lo = np.minimum(treated, control)
    return _transition_verdict(hi, lo, essinf)


def check_assumption3(scenario: Scenario, essinf=None) -> Verdict:
    """Same as the pure-arm transition check but over all 2^N assignments."""
    essinf = _resolve_essinf(scenario, essinf)
    hi, lo = extreme_level_matrices(scenario)
    return _transition_verdict(hi, lo, essinf)
