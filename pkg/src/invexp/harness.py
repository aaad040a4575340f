"""Scenario presets, replicated experiment runs, and result exports."""

from __future__ import annotations

import json
import math
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .demand import DemandModel, Normal, Uniform, sample_matrix
from .designs import DesignKind, DesignSpec, generate, inclusion_probability, sr_distribution
from .errors import InvalidInputError, UndefinedEstimatorError
from .estimators import GteReference, diff_in_means, ipw_estimate, true_gte_mc
from .inventory import ItemParams, Scenario, simulate_horizon

# Table-driven parameters for the two preset families: items are split into
# four equal category blocks.
CATEGORY_MEANS = (4.0, 4.5, 5.0, 5.5)
CATEGORY_PRICES = (2.0, 1.75, 1.5, 1.25)  # unit order cost is half the price
CATEGORY_AMPLITUDES = (0.5, 0.6, 0.7, 0.8)
CATEGORY_PHASES = (0.0, -0.25, -0.5, -0.75)
CATEGORY_UNIFORM_LOWER = (3.5, 4.0, 4.5, 5.0)
UNIFORM_WIDTH = 3.0
NORMAL_STD = math.sqrt(1.5)  # "variance 1.5" reading; see README
CAPACITY_MIX = {"tight": 0.2, "medium": 0.5, "loose": 0.9}
QUANTILE_OFFSETS = {"low": (0.5, 0.0), "medium": (1.5, 1.0), "high": (3.0, 2.5)}
DEFAULT_ITEMS = 1400
DEFAULT_HORIZON = 15

RAW_HEADER = "scenario,design,estimator,replication,estimate"
SUMMARY_HEADER = "scenario,design,estimator,mean,sd,bias,ci_low,ci_high,true_gte"


@dataclass(frozen=True)
class RngPolicy:
    """Keyed, reproducible stream derivation from one master seed.

    Identical key tuples give identical streams; distinct tuples give
    statistically independent ones. With ``crn`` on, demand streams are keyed
    without the design so all designs in a replication share demand draws.
    """

    master_seed: int
    crn: bool = True

    def stream(self, *keys) -> np.random.Generator:
        entropy = [self.master_seed & 0xFFFFFFFF]
        for key in keys:
            if isinstance(key, str):
                entropy.append(zlib.crc32(key.encode("utf-8")))
            else:
                entropy.append(int(key) & 0xFFFFFFFF)
        return np.random.default_rng(np.random.SeedSequence(entropy))

    def demand_stream(self, scenario_name: str, design_label: str, rep: int) -> np.random.Generator:
        if self.crn:
            return self.stream(scenario_name, "demand", rep)
        return self.stream(scenario_name, design_label, "demand", rep)

    def assignment_stream(self, scenario_name: str, design_label: str, rep: int) -> np.random.Generator:
        return self.stream(scenario_name, design_label, "assignment", rep)


@dataclass(frozen=True, eq=False)
class ScenarioPreset:
    """A named, fully resolved scenario from one of the preset families."""

    name: str
    section: str
    setting: str
    level: str
    scenario: Scenario


def _category_array(values, n_items: int) -> np.ndarray:
    if n_items % 4 != 0:
        raise InvalidInputError("preset item counts must be divisible by 4")
    return np.repeat(np.asarray(values, dtype=float), n_items // 4)


def _seasonal_schedule(
    slope: float, amplitude: np.ndarray, phase: np.ndarray, base: np.ndarray, horizon: int
) -> np.ndarray:
    t = np.arange(1, horizon + 1, dtype=float)
    seasonal = (amplitude[:, None] / 2.0) * np.sin(2.0 * np.pi * (t[None, :] + phase[:, None]) / 7.0)
    return slope * t[None, :] + seasonal + base[:, None]


def mixed_capacity(treatment_schedule: np.ndarray, control_schedule: np.ndarray, weight: float) -> float:
    """Capacity as a weighted blend of the two arms' average period totals."""
    horizon = treatment_schedule.shape[1]
    per_item = weight * treatment_schedule.sum(axis=1) + (1.0 - weight) * control_schedule.sum(axis=1)
    return float(per_item.sum() / horizon)


def _normalize_setting(setting: str) -> str:
    setting = setting.replace("_", "-").lower()
    if setting in ("stationary",):
        return "stationary"
    if setting in ("non-stationary", "nonstationary"):
        return "nonstationary"
    raise InvalidInputError(f"unknown setting {setting!r}")


def build_scenario_41(
    setting: str,
    capacity_level: str,
    n_items: int = DEFAULT_ITEMS,
    horizon: int = DEFAULT_HORIZON,
    null_effect: bool = False,
) -> ScenarioPreset:
    """Normal-demand preset family; capacity level in {tight, medium, loose}."""
    setting = _normalize_setting(setting)
    if capacity_level not in CAPACITY_MIX:
        raise InvalidInputError(f"capacity level must be one of {sorted(CAPACITY_MIX)}")
    means = _category_array(CATEGORY_MEANS, n_items)
    prices = _category_array(CATEGORY_PRICES, n_items)
    stationary = setting == "stationary"
    amplitude = np.zeros(n_items) if stationary else _category_array(CATEGORY_AMPLITUDES, n_items)
    phase = np.zeros(n_items) if stationary else _category_array(CATEGORY_PHASES, n_items)
    trend = 0.0 if stationary else 0.1
    trend_t, trend_c = (0.0, 0.0) if stationary else (0.1, 0.05)
    demand = DemandModel(
        n_items=n_items,
        noise=Normal(mean=means, std_dev=NORMAL_STD),
        trend_slope=trend,
        amplitude=amplitude,
        phase=phase,
    )
    control = _seasonal_schedule(trend_c, amplitude, phase - 0.25, 0.8 * means, horizon)
    treatment = _seasonal_schedule(trend_t, amplitude, phase, means, horizon)
    if null_effect:
        treatment = control.copy()
    capacity = mixed_capacity(treatment, control, CAPACITY_MIX[capacity_level])
    name = f"fig2-{setting}-{capacity_level}" + ("-null" if null_effect else "")
    scenario = Scenario(
        n_items=n_items,
        horizon=horizon,
        capacity=capacity,
        items=tuple(ItemParams(b, b / 2.0) for b in prices),
        demand=demand,
        control_schedule=control,
        treatment_schedule=treatment,
        name=name,
    )
    return ScenarioPreset(name=name, section="4.1", setting=setting, level=capacity_level, scenario=scenario)


def build_scenario_42(
    setting: str,
    quantile_level: str,
    n_items: int = DEFAULT_ITEMS,
    horizon: int = DEFAULT_HORIZON,
    null_effect: bool = False,
) -> ScenarioPreset:
    """Uniform-demand preset family; quantile level in {low, medium, high}."""
    setting = _normalize_setting(setting)
    if quantile_level not in QUANTILE_OFFSETS:
        raise InvalidInputError(f"quantile level must be one of {sorted(QUANTILE_OFFSETS)}")
    lowers = _category_array(CATEGORY_UNIFORM_LOWER, n_items)
    prices = _category_array(CATEGORY_PRICES, n_items)
    stationary = setting == "stationary"
    amplitude = np.zeros(n_items) if stationary else _category_array(CATEGORY_AMPLITUDES, n_items)
    phase = np.zeros(n_items) if stationary else _category_array(CATEGORY_PHASES, n_items)
    trend = 0.0 if stationary else 0.1
    trend_t, trend_c = (0.0, 0.0) if stationary else (0.1, 0.05)
    demand = DemandModel(
        n_items=n_items,
        noise=Uniform(lower=lowers, width=UNIFORM_WIDTH),
        trend_slope=trend,
        amplitude=amplitude,
        phase=phase,
    )
    offset_t, offset_c = QUANTILE_OFFSETS[quantile_level]
    # Both arms share the phase here (only the level offsets differ).
    control = _seasonal_schedule(trend_c, amplitude, phase - 0.25, lowers + offset_c, horizon)
    treatment = _seasonal_schedule(trend_t, amplitude, phase - 0.25, lowers + offset_t, horizon)
    if null_effect:
        treatment = control.copy()
    capacity = mixed_capacity(treatment, control, CAPACITY_MIX["medium"])
    name = f"fig3-{setting}-{quantile_level}" + ("-null" if null_effect else "")
    scenario = Scenario(
        n_items=n_items,
        horizon=horizon,
        capacity=capacity,
        items=tuple(ItemParams(b, b / 2.0) for b in prices),
        demand=demand,
        control_schedule=control,
        treatment_schedule=treatment,
        name=name,
    )
    return ScenarioPreset(name=name, section="4.2", setting=setting, level=quantile_level, scenario=scenario)


def preset_names() -> list[str]:
    names = []
    for setting in ("stationary", "nonstationary"):
        for level in CAPACITY_MIX:
            names.append(f"fig2-{setting}-{level}")
            names.append(f"fig2-{setting}-{level}-null")
        for level in QUANTILE_OFFSETS:
            names.append(f"fig3-{setting}-{level}")
            names.append(f"fig3-{setting}-{level}-null")
    return names


def get_preset(name: str, n_items: int = DEFAULT_ITEMS, horizon: int = DEFAULT_HORIZON) -> ScenarioPreset:
    parts = name.split("-")
    null_effect = parts[-1] == "null"
    if null_effect:
        parts = parts[:-1]
    if len(parts) != 3:
        raise InvalidInputError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    family, setting, level = parts
    if family == "fig2":
        return build_scenario_41(setting, level, n_items, horizon, null_effect)
    if family == "fig3":
        return build_scenario_42(setting, level, n_items, horizon, null_effect)
    raise InvalidInputError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")


def default_designs(horizon: int, p: float = 0.5) -> list[DesignSpec]:
    """The four canonical designs at one treatment probability."""
    return [
        DesignSpec(DesignKind.SW, p),
        DesignSpec(DesignKind.IR, p),
        DesignSpec(DesignKind.PR, p),
        DesignSpec(DesignKind.SR, p, sr_weights=sr_distribution(p, horizon, "two-point")),
    ]


@dataclass(frozen=True)
class EstimateRow:
    design: str
    estimator: str
    replication: int
    estimate: float


@dataclass(frozen=True, eq=False)
class ResultSet:
    """Raw per-replication estimates plus the true-effect reference."""

    scenario: str
    designs: tuple[DesignSpec, ...]
    rows: tuple[EstimateRow, ...]
    gte: GteReference
    reps: int
    seed: int
    crn: bool

    def estimates(self, design_label: str, estimator: str) -> np.ndarray:
        return np.array(
            [r.estimate for r in self.rows if r.design == design_label and r.estimator == estimator]
        )


@dataclass(frozen=True)
class SummaryRow:
    scenario: str
    design: str
    estimator: str
    mean: float
    sd: float
    bias: float
    ci_low: float
    ci_high: float
    true_gte: float


def run_experiment(
    preset: ScenarioPreset | Scenario,
    designs: list[DesignSpec],
    reps: int,
    rng_policy: RngPolicy,
    threads: int = 1,
    gte_reps: int = 2000,
) -> ResultSet:
    """Replicate every design, compute both estimators, attach the reference.

    Output is bitwise identical for a fixed policy regardless of ``threads``:
    each replication derives its own streams and the assembly order is fixed.
    """
    if reps < 1:
        raise InvalidInputError("reps must be >= 1")
    scenario = preset.scenario if isinstance(preset, ScenarioPreset) else preset
    labels = [d.label for d in designs]
    if len(set(labels)) != len(labels):
        raise InvalidInputError("designs must have distinct kinds per run")
    name = scenario.name

    def one_rep(rep: int) -> dict[str, tuple[float, float]]:
        out = {}
        shared_demand = None
        for design in designs:
            rng_d = rng_policy.demand_stream(name, design.label, rep)
            if rng_policy.crn:
                if shared_demand is None:
                    shared_demand = sample_matrix(scenario.demand, scenario.horizon, rng_d)
                demand = shared_demand
            else:
                demand = sample_matrix(scenario.demand, scenario.horizon, rng_d)
            assignment = generate(
                design, scenario.n_items, scenario.horizon,
                rng_policy.assignment_stream(name, design.label, rep),
            )
            trace = simulate_horizon(scenario, assignment, demand)
            ipw = ipw_estimate(trace, assignment, inclusion_probability(design), rep).value
            try:
                dim = diff_in_means(trace, assignment, rep).value
            except UndefinedEstimatorError:
                dim = math.nan  # realized single-group matrix; see summarize
            out[design.label] = (ipw, dim)
        return out

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_rep = list(pool.map(one_rep, range(reps)))
    else:
        per_rep = [one_rep(rep) for rep in range(reps)]

    rows = []
    for design in designs:
        for rep in range(reps):
            ipw, dim = per_rep[rep][design.label]
            rows.append(EstimateRow(design.label, "ipw", rep, ipw))
            rows.append(EstimateRow(design.label, "diff_in_means", rep, dim))
    gte = true_gte_mc(scenario, gte_reps, rng_policy.stream(name, "gte"))
    return ResultSet(
        scenario=name,
        designs=tuple(designs),
        rows=tuple(rows),
        gte=gte,
        reps=reps,
        seed=rng_policy.master_seed,
        crn=rng_policy.crn,
    )


def summarize(results: ResultSet) -> list[SummaryRow]:
    """Per-(design, estimator) mean, spread and empirical bias.

    Undefined diff-in-means replications (NaN) are dropped from that
    estimator's statistics; a single valid replication leaves sd/CI as NaN.
    """
    if not results.rows:
        raise InvalidInputError("results must be nonempty")
    out = []
    for design in results.designs:
        for estimator in ("ipw", "diff_in_means"):
            values = results.estimates(design.label, estimator)
            values = values[~np.isnan(values)]
            if values.size == 0:
                # e.g. diff-in-means under IR with one item: every realized
                # assignment is single-group, so the estimator never exists
                out.append(
                    SummaryRow(results.scenario, design.label, estimator,
                               math.nan, math.nan, math.nan, math.nan, math.nan,
                               results.gte.value)
                )
                continue
            mean = float(values.mean())
            if values.size > 1:
                sd = float(values.std(ddof=1))
                half = 1.96 * sd / math.sqrt(values.size)
                ci_low, ci_high = mean - half, mean + half
            else:
                sd = math.nan
                ci_low = ci_high = math.nan
            out.append(
                SummaryRow(
                    scenario=results.scenario,
                    design=design.label,
                    estimator=estimator,
                    mean=mean,
                    sd=sd,
                    bias=mean - results.gte.value,
                    ci_low=ci_low,
                    ci_high=ci_high,
                    true_gte=results.gte.value,
                )
            )
    return out


def _fmt(value: float) -> str:
    return repr(float(value))


def write_raw_csv(results: ResultSet, path) -> None:
    lines = [RAW_HEADER]
    for row in results.rows:
        lines.append(
            f"{results.scenario},{row.design},{row.estimator},{row.replication},{_fmt(row.estimate)}"
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_summary_csv(summary_rows: list[SummaryRow], path) -> None:
    lines = [SUMMARY_HEADER]
    for row in summary_rows:
        lines.append(
            ",".join(
                [
                    row.scenario,
                    row.design,
                    row.estimator,
                    _fmt(row.mean),
                    _fmt(row.sd),
                    _fmt(row.bias),
                    _fmt(row.ci_low),
                    _fmt(row.ci_high),
                    _fmt(row.true_gte),
                ]
            )
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def to_json_document(results: ResultSet) -> dict:
    return {
        "scenario": results.scenario,
        "reps": results.reps,
        "seed": results.seed,
        "crn": results.crn,
        "true_gte": {
            "value": results.gte.value,
            "method": results.gte.method,
            "ci_halfwidth": results.gte.ci_halfwidth,
            "reps": results.gte.reps,
        },
        "raw": [
            {
                "design": r.design,
                "estimator": r.estimator,
                "replication": r.replication,
                "estimate": r.estimate,
            }
            for r in results.rows
        ],
        "summary": [vars(row) for row in summarize(results)],
    }


def write_json(results: ResultSet, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(to_json_document(results), fh, indent=2)
        fh.write("\n")
