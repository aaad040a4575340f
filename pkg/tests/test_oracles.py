import numpy as np
import pytest

from helpers import random_instance, random_sr_design
from invexp.demand import DemandModel, Discrete, Uniform
from invexp.designs import DesignKind, DesignSpec
from invexp.errors import InvalidInputError, ResourceLimitError
from invexp.inventory import ItemParams, Scenario
from invexp.oracles import (
    bias_ir,
    bias_pr,
    bias_sr,
    bias_sw,
    brute_force_expected_estimate,
    brute_force_gte,
    check_condition10,
    lemma1_beta_bar,
)


def make_scenario(control, treatment, capacity, demand=None, prices=None, costs=None):
    control = np.asarray(control, dtype=float)
    n_items, _ = control.shape
    prices = [3.0] * n_items if prices is None else prices
    costs = [1.0] * n_items if costs is None else costs
    if demand is None:
        demand = DemandModel(n_items=n_items, noise=Discrete([1.0], [1.0]))
    return Scenario(
        n_items=n_items,
        horizon=control.shape[1],
        capacity=capacity,
        items=tuple(ItemParams(r, c) for r, c in zip(prices, costs)),
        demand=demand,
        control_schedule=control,
        treatment_schedule=treatment,
    )


def theorem_toy():
    # N=1, H=2, control 1, treatment 2, demand == 1, sell 3 / cost 1
    return make_scenario([[1.0, 1.0]], [[2.0, 2.0]], 100.0)


# ------------------------------------------------------------------- bias_sw


def test_bias_sw_toy_instance():
    assert bias_sw(theorem_toy()).bias == pytest.approx(-0.5, abs=1e-12)


def test_bias_sw_equal_arms_zero():
    scen = make_scenario([[1.0, 1.0]], [[1.0, 1.0]], 10.0)
    assert bias_sw(scen).bias == 0.0


def test_bias_sw_single_period_zero():
    scen = make_scenario([[1.0]], [[2.0]], 10.0)
    assert bias_sw(scen).bias == 0.0


def test_bias_sw_is_p_free():
    scen = theorem_toy()
    assert bias_sw(scen, 0.2).bias == bias_sw(scen, 0.8).bias


def test_bias_sw_attaches_verdicts():
    report = bias_sw(theorem_toy())
    assert report.assumptions == {"assumption1": True, "assumption2": True}
    assert report.mode == "closed-form"


# ------------------------------------------------------------------- bias_ir


def test_bias_ir_single_item_loose_capacity():
    assert bias_ir(theorem_toy(), 0.5).bias == pytest.approx(0.0, abs=1e-12)


def test_bias_ir_worked_example():
    # conditional treated levels {4, 3}, control {2, 2}; demand == 2 sells the
    # same two units at every realized level, so the gap terms vanish
    demand = DemandModel(n_items=2, noise=Discrete([2.0], [1.0]))
    scen = make_scenario(
        [[2.0, 2.0], [2.0, 2.0]], [[4.0, 4.0], [4.0, 4.0]], 6.0, demand=demand
    )
    report = bias_ir(scen, 0.5)
    assert report.terms["treated_vs_gt"] == pytest.approx(0.0, abs=1e-12)
    assert report.terms["control_vs_gc"] == pytest.approx(0.0, abs=1e-12)
    assert report.bias == pytest.approx(0.0, abs=1e-12)


def test_bias_ir_enumerate_matches_mc():
    rng = np.random.default_rng(2)
    scen, p = random_instance(rng, require=("a3",))
    exact = bias_ir(scen, p).bias
    mc = bias_ir(scen, p, mode="mc", mc_reps=4000, rng=np.random.default_rng(5))
    assert abs(mc.bias - exact) < 4 * mc.std_error + 1e-12


def test_bias_ir_enumerate_caps_item_count():
    n = 25
    demand = DemandModel(n_items=n, noise=Discrete([1.0], [1.0]))
    scen = make_scenario(
        np.full((n, 2), 1.0), np.full((n, 2), 2.0), 30.0, demand=demand,
        prices=[3.0] * n, costs=[1.0] * n,
    )
    with pytest.raises(ResourceLimitError):
        bias_ir(scen, 0.5)


# ------------------------------------------------------------------- bias_pr


def test_bias_pr_single_item_equals_sw():
    scen = theorem_toy()
    report = bias_pr(scen, 0.5)
    assert report.terms["treated_vs_gt"] == pytest.approx(0.0, abs=1e-12)
    assert report.terms["control_vs_gc"] == pytest.approx(0.0, abs=1e-12)
    assert report.bias == pytest.approx(bias_sw(scen).bias, abs=1e-12)
    assert report.bias == pytest.approx(-0.5, abs=1e-12)


def test_bias_pr_equal_arms_zero():
    scen = make_scenario(np.full((2, 2), 1.0), np.full((2, 2), 1.0), 10.0)
    assert bias_pr(scen, 0.5).bias == pytest.approx(0.0, abs=1e-12)


def test_bias_pr_decomposition_sums_exactly():
    rng = np.random.default_rng(3)
    scen, p = random_instance(rng, require=("a3",))
    report = bias_pr(scen, p)
    assert report.bias == pytest.approx(sum(report.terms.values()), abs=1e-15)


def test_bias_pr_sandwich_under_condition10():
    rng = np.random.default_rng(4)
    for _ in range(10):
        scen, p = random_instance(rng, require=("a1", "a2", "a3"), sandwich=True)
        sw = bias_sw(scen, p).bias
        pr = bias_pr(scen, p).bias
        ir = bias_ir(scen, p).bias
        assert sw <= pr + 1e-12
        assert pr <= ir + 1e-12


# ------------------------------------------------------------------- bias_sr


def sr_toy():
    # N=1, H=2, control 2, treatment 3, demand == 1; the rollout switches
    # every item after period 1, leaving one unit unsold at the transition
    scen = make_scenario([[2.0, 2.0]], [[3.0, 3.0]], 100.0)
    design = DesignSpec(DesignKind.SR, 0.5, sr_weights=[1.0, 0.0])
    return scen, design


def test_bias_sr_toy_instance():
    scen, design = sr_toy()
    report = bias_sr(scen, design)
    assert report.bias == pytest.approx(2.0, abs=1e-12)
    assert report.terms["transition_leftover"] == pytest.approx(2.0, abs=1e-12)
    assert report.terms["treated_vs_gt"] == pytest.approx(0.0, abs=1e-12)
    assert report.terms["control_vs_gc"] == pytest.approx(0.0, abs=1e-12)
    assert report.terms["time_weighting"] == pytest.approx(0.0, abs=1e-12)


def test_bias_sr_equal_arms_no_leftovers_zero():
    # with demand covering the level every period, per-period profits are
    # time-constant and the rollout estimator is exactly unbiased
    demand = DemandModel(n_items=1, noise=Discrete([3.0], [1.0]))
    scen = make_scenario(np.full((1, 2), 2.0), np.full((1, 2), 2.0), 100.0, demand=demand)
    design = DesignSpec(DesignKind.SR, 0.5, sr_weights=[1.0, 0.0])
    assert bias_sr(scen, design).bias == pytest.approx(0.0, abs=1e-12)


def test_bias_sr_equal_arms_with_leftovers_still_biased():
    # equal arms do NOT null the rollout estimator when leftovers exist: the
    # first-period fill-up and the terminal salvage make per-period profits
    # time-varying, which the time-varying inclusion probability picks up;
    # exact enumeration agrees
    scen = make_scenario(np.full((1, 2), 2.0), np.full((1, 2), 2.0), 100.0)
    design = DesignSpec(DesignKind.SR, 0.5, sr_weights=[1.0, 0.0])
    report = bias_sr(scen, design)
    bf = brute_force_expected_estimate(scen, design) - brute_force_gte(scen)
    assert report.bias == pytest.approx(bf, abs=1e-12)
    assert report.bias == pytest.approx(2.0, abs=1e-12)
    assert report.bias >= 0.0  # stationary sign guarantee still holds


def test_bias_sr_nonstationary_trend_sign_free():
    # rising point-mass demand under constant levels: the bias follows the
    # trend through the time-weighting term, not the treatment
    demand = DemandModel(n_items=1, noise=Discrete([1.0], [1.0]), trend_slope=0.4)
    scen = make_scenario([[1.4, 1.4, 1.4]], [[1.5, 1.5, 1.5]], 100.0, demand=demand)
    design = DesignSpec(DesignKind.SR, 1.0 / 3.0, sr_weights=[0.0, 1.0, 0.0])
    report = bias_sr(scen, design)
    bf = brute_force_expected_estimate(scen, design) - brute_force_gte(scen)
    assert report.bias == pytest.approx(bf, abs=1e-9)
    assert not report.assumptions["stationary"]
    assert report.terms["time_weighting"] != 0.0


def test_bias_sr_enumerate_matches_mc():
    rng = np.random.default_rng(6)
    scen, _ = random_instance(rng, require=("a3",), stationary=True)
    design = random_sr_design(rng, scen)
    exact = bias_sr(scen, design).bias
    mc = bias_sr(scen, design, mode="mc", mc_reps=4000, rng=np.random.default_rng(8))
    assert abs(mc.bias - exact) < 4 * mc.std_error + 1e-12


def test_bias_sr_requires_sr_design():
    scen, _ = sr_toy()
    with pytest.raises(InvalidInputError):
        bias_sr(scen, DesignSpec(DesignKind.IR, 0.5))


# ------------------------------------------------------------- lemma1_beta_bar


def test_beta_bar_worked_example():
    assert lemma1_beta_bar([3.0, 1.0], 5.0, 1.0) == pytest.approx(3.0)


def test_beta_bar_infinite_when_levels_fit_equal_share():
    assert lemma1_beta_bar([1.0, 1.0], 5.0, 1.0) == float("inf")


def test_beta_bar_linear_in_alpha():
    assert lemma1_beta_bar([3.0, 1.0], 5.0, 2.0) == pytest.approx(6.0)


def test_beta_bar_rejects_saturated_control():
    with pytest.raises(InvalidInputError):
        lemma1_beta_bar([3.0, 2.0], 5.0, 1.0)


def test_beta_bar_boundary_matches_assumption1():
    # at the bound the scaled treated levels still dominate; just above, the
    # largest control item drops below its control level
    for beta, expected in ((3.0, True), (3.5, False)):
        scen = make_scenario(
            [[3.0], [1.0]], [[3.0 + beta], [1.0 + beta]], 5.0
        )
        from invexp.inventory import check_assumption1

        assert check_assumption1(scen).ok is expected


# ------------------------------------------------------------- check_condition10


def test_condition10_zero_levels():
    scen = make_scenario(np.zeros((2, 2)), np.zeros((2, 2)), 5.0)
    assert check_condition10(scen).ok


def test_condition10_uniform_threshold():
    demand = DemandModel(n_items=1, noise=Uniform(lower=[2.0], width=4.0))
    ok = make_scenario([[3.9]], [[3.9]], 100.0, demand=demand, prices=[2.0], costs=[1.0])
    assert check_condition10(ok).ok
    bad = make_scenario([[4.1]], [[4.1]], 100.0, demand=demand, prices=[2.0], costs=[1.0])
    assert not check_condition10(bad).ok


# ---------------------------------------------------------------- brute force


def test_brute_force_sw_toy():
    scen = theorem_toy()
    est = brute_force_expected_estimate(scen, DesignSpec(DesignKind.SW, 0.5))
    gte = brute_force_gte(scen)
    assert est - gte == pytest.approx(-0.5, abs=1e-12)
    assert gte == pytest.approx(0.0, abs=1e-12)


def test_brute_force_ir_toy():
    scen = theorem_toy()
    est = brute_force_expected_estimate(scen, DesignSpec(DesignKind.IR, 0.5))
    assert est == pytest.approx(0.0, abs=1e-12)


def test_brute_force_sr_point_mass_single_path():
    scen, design = sr_toy()
    est = brute_force_expected_estimate(scen, design)
    assert est == pytest.approx(2.0, abs=1e-12)


def test_brute_force_rejects_continuous_demand():
    demand = DemandModel(n_items=1, noise=Uniform(lower=[1.0], width=1.0))
    scen = make_scenario([[1.0]], [[2.0]], 5.0, demand=demand)
    with pytest.raises(InvalidInputError):
        brute_force_expected_estimate(scen, DesignSpec(DesignKind.SW, 0.5))


def test_brute_force_respects_atom_budget():
    demand = DemandModel(n_items=3, noise=Discrete([1.0, 2.0], [0.5, 0.5]))
    scen = make_scenario(
        np.full((3, 9), 1.0), np.full((3, 9), 2.0), 5.0, demand=demand,
        prices=[3.0] * 3, costs=[1.0] * 3,
    )
    with pytest.raises(ResourceLimitError):
        brute_force_expected_estimate(scen, DesignSpec(DesignKind.PR, 0.5))


# -------------------------------------------------- theorem-oracle equivalence


def test_sw_formula_matches_enumeration_randomized():
    rng = np.random.default_rng(10)
    for _ in range(15):
        scen, p = random_instance(rng, require=("a1", "a2"))
        design = DesignSpec(DesignKind.SW, p)
        bf = brute_force_expected_estimate(scen, design) - brute_force_gte(scen)
        formula = bias_sw(scen, p).bias
        assert bf == pytest.approx(formula, abs=1e-9)
        assert formula <= 1e-12


def test_ir_formula_matches_enumeration_randomized():
    rng = np.random.default_rng(11)
    for _ in range(15):
        scen, p = random_instance(rng, require=("a3",))
        design = DesignSpec(DesignKind.IR, p)
        bf = brute_force_expected_estimate(scen, design) - brute_force_gte(scen)
        formula = bias_ir(scen, p).bias
        assert bf == pytest.approx(formula, abs=1e-9)
        assert formula >= -1e-12


def test_pr_formula_matches_enumeration_randomized():
    rng = np.random.default_rng(12)
    for _ in range(15):
        scen, p = random_instance(rng, require=("a3",))
        design = DesignSpec(DesignKind.PR, p)
        bf = brute_force_expected_estimate(scen, design) - brute_force_gte(scen)
        report = bias_pr(scen, p)
        assert bf == pytest.approx(report.bias, abs=1e-9)
        assert report.bias <= bias_ir(scen, p).bias + 1e-12


def test_sr_formula_matches_enumeration_randomized():
    rng = np.random.default_rng(13)
    for _ in range(15):
        scen, _ = random_instance(rng, require=("a3",), stationary=True, max_items=3)
        design = random_sr_design(rng, scen)
        bf = brute_force_expected_estimate(scen, design) - brute_force_gte(scen)
        formula = bias_sr(scen, design).bias
        assert bf == pytest.approx(formula, abs=1e-9)
        assert formula >= -1e-12
