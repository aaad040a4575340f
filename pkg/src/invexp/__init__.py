"""Simulator and A/B-testing toolkit for capacity-constrained inventory systems."""

from .demand import (
    DemandModel,
    Discrete,
    Normal,
    Uniform,
    essential_infimum,
    essinf_matrix,
    expected_overage,
    mean_shift,
    quantile,
    sample,
    sample_matrix,
)
from .designs import (
    AssignmentMatrix,
    DesignKind,
    DesignSpec,
    generate,
    inclusion_probability,
    sr_distribution,
)
from .errors import (
    AnalyticInvalidError,
    InfeasibleWeightsError,
    InvalidDesignError,
    InvalidInputError,
    ResourceLimitError,
    UndefinedEstimatorError,
)
from .estimators import (
    EstimateResult,
    GteReference,
    diff_in_means,
    ipw_estimate,
    true_gte_analytic,
    true_gte_mc,
)
from .inventory import (
    ItemParams,
    PeriodRecord,
    Scenario,
    SimTrace,
    SystemState,
    Verdict,
    check_assumption1,
    check_assumption2_sw,
    check_assumption3,
    effective_levels,
    extreme_levels,
    profit_plus,
    scale_base_stock,
    simulate_horizon,
    step_period,
)
from .harness import (
    ResultSet,
    RngPolicy,
    ScenarioPreset,
    SummaryRow,
    build_scenario_41,
    build_scenario_42,
    default_designs,
    get_preset,
    run_experiment,
    summarize,
)
from .oracles import (
    BiasReport,
    bias_ir,
    bias_pr,
    bias_sr,
    bias_sw,
    brute_force_expected_estimate,
    brute_force_gte,
    check_condition10,
    lemma1_beta_bar,
)

__version__ = "0.1.0"
