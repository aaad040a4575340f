"""Randomized small-instance generators for theorem-oracle testing.

Instances carry two-point discrete demand so the brute-force enumerators stay
exact, and are resampled until the requested assumption predicates verifiably
hold on the constructed scenario.
"""

import numpy as np

from invexp.demand import DemandModel, Discrete
from invexp.designs import DesignKind, DesignSpec
from invexp.inventory import (
    ItemParams,
    Scenario,
    check_assumption1,
    check_assumption2_sw,
    check_assumption3,
    extreme_level_matrices,
)
from invexp.oracles import check_condition10

P_CHOICES = (0.3, 0.5, 0.7)


def _draw_levels(rng, n_items, horizon, stationary):
    base_c = rng.uniform(0.5, 2.0, size=(n_items, 1))
    base_gap = rng.uniform(0.1, 0.9, size=(n_items, 1))
    if stationary:
        control = np.repeat(base_c, horizon, axis=1)
        gap = np.repeat(base_gap, horizon, axis=1)
    else:
        control = base_c + rng.uniform(-0.2, 0.2, size=(n_items, horizon))
        control = np.maximum(control, 0.05)
        gap = base_gap + rng.uniform(0.0, 0.3, size=(n_items, horizon))
    return control, control + gap


def random_instance(
    rng,
    require=("a3",),
    stationary=False,
    sandwich=False,
    max_items=4,
    max_horizon=3,
    max_cells=8,
    max_attempts=500,
):
    """One discrete-demand instance whose listed predicates verifiably hold.

    ``require`` entries: "a1", "a2", "a3", "c10". Returns (scenario, p).
    """
    require = set(require) | ({"c10"} if sandwich else set())
    for _ in range(max_attempts):
        n_items = int(rng.integers(1, max_items + 1))
        horizon = int(rng.integers(2, max_horizon + 1))
        if n_items * horizon > max_cells:
            continue
        control, treatment = _draw_levels(rng, n_items, horizon, stationary)
        prices = rng.uniform(1.5, 3.0, n_items)
        costs = prices * rng.uniform(0.3, 0.6, n_items)
        if "c10" in require:
            costs = prices * 0.5
        capacity = float(rng.uniform(0.55, 1.3) * treatment.sum(axis=0).max())
        probe = Scenario(
            n_items=n_items,
            horizon=horizon,
            capacity=capacity,
            items=tuple(ItemParams(r, c) for r, c in zip(prices, costs)),
            demand=DemandModel(n_items=n_items, noise=Discrete([1.0], [1.0])),
            control_schedule=control,
            treatment_schedule=treatment,
        )
        hi, lo = extreme_level_matrices(probe)
        max_drop = float((hi[:, :-1] - lo[:, 1:]).max()) if horizon > 1 else 0.0
        d_lo = max(0.0, max_drop) + rng.uniform(0.05, 0.4)
        if "c10" in require:
            # keep the low point under every level so leftovers can occur,
            # and push the newsvendor quantile to the high support point
            d_hi = float(hi.max()) + rng.uniform(0.1, 1.0)
            q_lo = rng.uniform(0.1, 0.45)
        else:
            d_hi = d_lo + rng.uniform(0.5, 2.0)
            q_lo = rng.uniform(0.2, 0.8)
        demand = DemandModel(
            n_items=n_items,
            noise=Discrete([d_lo, d_hi], [q_lo, 1.0 - q_lo]),
        )
        scenario = Scenario(
            n_items=n_items,
            horizon=horizon,
            capacity=capacity,
            items=probe.items,
            demand=demand,
            control_schedule=control,
            treatment_schedule=treatment,
        )
        checks = {
            "a1": lambda: check_assumption1(scenario).ok,
            "a2": lambda: check_assumption2_sw(scenario).ok,
            "a3": lambda: check_assumption3(scenario).ok,
            "c10": lambda: check_condition10(scenario).ok,
        }
        if all(checks[name]() for name in require):
            return scenario, float(rng.choice(P_CHOICES))
    raise RuntimeError("could not build an instance satisfying " + ", ".join(sorted(require)))


def random_sr_design(rng, scenario):
    """A staggered-rollout design with random feasible weights for the instance."""
    horizon = scenario.horizon
    for _ in range(200):
        raw = rng.uniform(0.05, 1.0, horizon)
        weights = raw / raw.sum()
        p = 1.0 - float(np.arange(1, horizon + 1) @ weights) / horizon
        if 0.1 <= p <= 0.9:
            return DesignSpec(DesignKind.SR, p, sr_weights=weights)
    raise RuntimeError("could not draw feasible rollout weights")
