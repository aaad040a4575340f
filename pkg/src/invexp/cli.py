"""Command-line entry point: runs, bias oracles, checks, figure reproduction.

Configuration is a JSON document; environment variables prefixed ``INVEXP_``
override file values, and command-line flags override both. Exit codes:
0 success, 2 configuration error, 3 enumeration resource limit, 4 runtime
failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import harness
from .demand import DemandModel, Discrete, Normal, Uniform
from .designs import DesignKind, DesignSpec, sr_distribution
from .errors import InvalidInputError, ResourceLimitError
from .harness import RngPolicy, ScenarioPreset, get_preset, run_experiment, summarize
from .inventory import (
    ItemParams,
    Scenario,
    check_assumption1,
    check_assumption2_sw,
    check_assumption3,
)
from .oracles import bias_ir, bias_pr, bias_sr, bias_sw, check_condition10

ENV_PREFIX = "INVEXP_"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RESOURCE = 3
EXIT_RUNTIME = 4


class ConfigError(Exception):
    """Configuration rejected; message carries the offending field path."""


def default_config() -> dict:
    return {
        "scenario": {"preset": "fig2-stationary-medium"},
        "designs": ["SW", "IR", "PR", "SR"],
        "reps": 250,
        "seed": 0,
        "crn": True,
        "p": 0.5,
        "gte_reps": 2000,
        "threads": 1,
        "mode": "enumerate",
        "mc_reps": 2000,
        "out": "results",
        "format": "csv",
    }


_SCALAR_KEYS = {
    "reps": int,
    "seed": int,
    "gte_reps": int,
    "threads": int,
    "mc_reps": int,
    "p": float,
    "crn": bool,
    "mode": str,
    "out": str,
    "format": str,
}

_SCENARIO_KEYS = {
    "preset",
    "name",
    "n_items",
    "horizon",
    "capacity",
    "items",
    "demand",
    "control_schedule",
    "treatment_schedule",
    "initial_inventory",
}

_DEMAND_KEYS = {
    "family",
    "mean",
    "std_dev",
    "lower",
    "width",
    "support",
    "probs",
    "trend_slope",
    "amplitude",
    "phase",
    "season_length",
    "clamp_at_zero",
}


def _check_keys(mapping: dict, allowed: set[str], where: str) -> None:
    unknown = sorted(set(mapping) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown} in {where}")


def validate_config(config: dict) -> None:
    if not isinstance(config, dict):
        raise ConfigError("config root must be an object")
    _check_keys(config, set(default_config()), "config root")
    for key, kind in _SCALAR_KEYS.items():
        if key in config:
            value = config[key]
            if kind is bool:
                if not isinstance(value, bool):
                    raise ConfigError(f"field '{key}' must be a boolean")
            elif kind in (int, float):
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise ConfigError(f"field '{key}' must be a number")
                if kind is int and int(value) != value:
                    raise ConfigError(f"field '{key}' must be an integer")
            elif not isinstance(value, str):
                raise ConfigError(f"field '{key}' must be a string")
    if "mode" in config and config["mode"] not in ("enumerate", "mc"):
        raise ConfigError("field 'mode' must be 'enumerate' or 'mc'")
    if "format" in config and config["format"] not in ("csv", "json"):
        raise ConfigError("field 'format' must be 'csv' or 'json'")
    if "scenario" in config:
        scenario = config["scenario"]
        if not isinstance(scenario, dict):
            raise ConfigError("field 'scenario' must be an object")
        _check_keys(scenario, _SCENARIO_KEYS, "scenario")
        if "preset" not in scenario:
            required = {"n_items", "horizon", "capacity", "items", "demand",
                        "control_schedule", "treatment_schedule"}
            missing = sorted(required - set(scenario))
            if missing:
                raise ConfigError(f"scenario is missing required field(s) {missing}")
            if not isinstance(scenario["demand"], dict):
                raise ConfigError("scenario.demand must be an object")
            _check_keys(scenario["demand"], _DEMAND_KEYS, "scenario.demand")
    if "designs" in config:
        designs = config["designs"]
        if not isinstance(designs, list) or not designs:
            raise ConfigError("field 'designs' must be a nonempty list")
        for i, entry in enumerate(designs):
            if isinstance(entry, str):
                if entry not in ("SW", "IR", "PR", "SR"):
                    raise ConfigError(f"designs[{i}] must be one of SW, IR, PR, SR")
            elif isinstance(entry, dict):
                _check_keys(entry, {"kind", "p", "sr_weights", "sr_shape", "sr_points"}, f"designs[{i}]")
                if entry.get("kind") not in ("SW", "IR", "PR", "SR"):
                    raise ConfigError(f"designs[{i}].kind must be one of SW, IR, PR, SR")
            else:
                raise ConfigError(f"designs[{i}] must be a string or an object")


def load_config(path: str) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        config = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    validate_config(config)
    return config


def _env_overrides() -> dict:
    out = {}
    for key, kind in _SCALAR_KEYS.items():
        raw = os.environ.get(ENV_PREFIX + key.upper())
        if raw is None:
            continue
        try:
            if kind is bool:
                out[key] = raw.strip().lower() in ("1", "true", "yes", "on")
            else:
                out[key] = kind(raw)
        except ValueError as exc:
            raise ConfigError(f"environment override {ENV_PREFIX}{key.upper()}={raw!r}: {exc}") from exc
    return out


def merge_config(args: argparse.Namespace) -> dict:
    config = default_config()
    if getattr(args, "config", None):
        file_config = load_config(args.config)
        config.update(file_config)
    config.update(_env_overrides())
    flag_map = {
        "reps": "reps",
        "seed": "seed",
        "threads": "threads",
        "out": "out",
        "fmt": "format",
        "p": "p",
        "mode": "mode",
        "gte_reps": "gte_reps",
        "mc_reps": "mc_reps",
    }
    for attr, key in flag_map.items():
        value = getattr(args, attr, None)
        if value is not None:
            config[key] = value
    if getattr(args, "crn", None) is not None:
        config["crn"] = args.crn == "on"
    if getattr(args, "preset", None):
        config["scenario"] = {"preset": args.preset}
    validate_config(config)
    return config


def _build_demand(spec: dict, n_items: int) -> DemandModel:
    family = spec.get("family")
    if family == "normal":
        noise = Normal(mean=np.asarray(spec["mean"], dtype=float), std_dev=float(spec["std_dev"]))
    elif family == "uniform":
        noise = Uniform(lower=np.asarray(spec["lower"], dtype=float), width=float(spec["width"]))
    elif family == "discrete":
        noise = Discrete(support=np.asarray(spec["support"], dtype=float),
                         probs=np.asarray(spec["probs"], dtype=float))
    else:
        raise ConfigError("scenario.demand.family must be 'normal', 'uniform' or 'discrete'")
    return DemandModel(
        n_items=n_items,
        noise=noise,
        trend_slope=float(spec.get("trend_slope", 0.0)),
        amplitude=np.asarray(spec.get("amplitude", 0.0), dtype=float),
        phase=np.asarray(spec.get("phase", 0.0), dtype=float),
        season_length=int(spec.get("season_length", 7)),
        clamp_at_zero=bool(spec.get("clamp_at_zero", True)),
    )


def _schedule_from_config(value, n_items: int, horizon: int, where: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full((n_items, horizon), float(arr))
    elif arr.ndim == 1:
        if arr.shape != (n_items,):
            raise ConfigError(f"{where}: a 1-D schedule must have one entry per item")
        arr = np.repeat(arr[:, None], horizon, axis=1)
    elif arr.shape != (n_items, horizon):
        raise ConfigError(f"{where}: schedule must be scalar, per-item, or N x H")
    return arr


def resolve_scenario(config: dict) -> ScenarioPreset:
    spec = config["scenario"]
    if "preset" in spec:
        return get_preset(spec["preset"])
    n_items = int(spec["n_items"])
    horizon = int(spec["horizon"])
    items_spec = spec["items"]
    if not isinstance(items_spec, list) or len(items_spec) != n_items:
        raise ConfigError("scenario.items must list one {sell_price, order_cost} per item")
    items = []
    for i, entry in enumerate(items_spec):
        _check_keys(entry, {"sell_price", "order_cost"}, f"scenario.items[{i}]")
        items.append(ItemParams(float(entry["sell_price"]), float(entry["order_cost"])))
    scenario = Scenario(
        n_items=n_items,
        horizon=horizon,
        capacity=float(spec["capacity"]),
        items=tuple(items),
        demand=_build_demand(spec["demand"], n_items),
        control_schedule=_schedule_from_config(spec["control_schedule"], n_items, horizon, "control_schedule"),
        treatment_schedule=_schedule_from_config(spec["treatment_schedule"], n_items, horizon, "treatment_schedule"),
        initial_inventory=spec.get("initial_inventory"),
        name=spec.get("name", "custom"),
    )
    return ScenarioPreset(name=scenario.name, section="custom", setting="custom", level="custom", scenario=scenario)


def resolve_designs(config: dict, horizon: int) -> list[DesignSpec]:
    out = []
    p_default = float(config["p"])
    for entry in config["designs"]:
        if isinstance(entry, str):
            kind = DesignKind(entry)
            p = p_default
            weights = sr_distribution(p, horizon, "two-point") if kind is DesignKind.SR else None
            out.append(DesignSpec(kind, p, sr_weights=weights))
        else:
            kind = DesignKind(entry["kind"])
            p = float(entry.get("p", p_default))
            weights = None
            if kind is DesignKind.SR:
                if "sr_weights" in entry:
                    weights = np.asarray(entry["sr_weights"], dtype=float)
                else:
                    shape = entry.get("sr_shape", "two-point")
                    points = entry.get("sr_points")
                    weights = sr_distribution(p, horizon, shape, points=tuple(points) if points else None)
            out.append(DesignSpec(kind, p, sr_weights=weights))
    return out


def cmd_run(args: argparse.Namespace) -> int:
    config = merge_config(args)
    preset = resolve_scenario(config)
    designs = resolve_designs(config, preset.scenario.horizon)
    policy = RngPolicy(master_seed=int(config["seed"]), crn=bool(config["crn"]))
    results = run_experiment(
        preset,
        designs,
        reps=int(config["reps"]),
        rng_policy=policy,
        threads=int(config["threads"]),
        gte_reps=int(config["gte_reps"]),
    )
    out_dir = Path(config["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    if config["format"] == "json":
        harness.write_json(results, out_dir / "results.json")
        print(f"wrote {out_dir / 'results.json'}")
    else:
        harness.write_raw_csv(results, out_dir / "raw.csv")
        harness.write_summary_csv(summarize(results), out_dir / "summary.csv")
        print(f"wrote {out_dir / 'raw.csv'} and {out_dir / 'summary.csv'}")
    print(f"true GTE = {results.gte.value:.6g} (+- {results.gte.ci_halfwidth:.2g}, "
          f"{results.gte.reps} reference reps)")
    for row in summarize(results):
        print(f"  {row.design:>2} {row.estimator:<14} mean={row.mean:+.6g} sd={row.sd:.4g} "
              f"bias={row.bias:+.6g}")
    return EXIT_OK


def cmd_bias(args: argparse.Namespace) -> int:
    config = merge_config(args)
    preset = resolve_scenario(config)
    scenario = preset.scenario
    designs = resolve_designs(config, scenario.horizon)
    mode = config["mode"]
    mc_reps = int(config["mc_reps"])
    rng = np.random.default_rng(int(config["seed"]))
    reports = []
    for design in designs:
        if design.kind is DesignKind.SW:
            report = bias_sw(scenario, design.p)
        elif design.kind is DesignKind.IR:
            report = bias_ir(scenario, design.p, mode=mode, mc_reps=mc_reps, rng=rng)
        elif design.kind is DesignKind.PR:
            report = bias_pr(scenario, design.p, mode=mode, mc_reps=mc_reps, rng=rng)
        else:
            report = bias_sr(scenario, design, mode=mode, mc_reps=mc_reps, rng=rng)
        reports.append(report)
        se = "" if report.std_error is None else f" (se {report.std_error:.3g})"
        print(f"{report.design.value}: bias {report.bias:+.9g}{se} terms {report.terms} "
              f"assumptions {report.assumptions} condition10={report.condition10}")
    if getattr(args, "out", None):
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        payload = [
            {
                "design": r.design.value,
                "bias": r.bias,
                "terms": r.terms,
                "assumptions": r.assumptions,
                "condition10": r.condition10,
                "mode": r.mode,
                "std_error": r.std_error,
            }
            for r in reports
        ]
        with open(out_dir / "bias.json", "w", encoding="utf-8") as fh:
            json.dump({"scenario": scenario.name, "reports": payload}, fh, indent=2)
            fh.write("\n")
        print(f"wrote {out_dir / 'bias.json'}")
    return EXIT_OK


def cmd_check(args: argparse.Namespace) -> int:
    config = merge_config(args)
    scenario = resolve_scenario(config).scenario
    checks = {
        "assumption1": check_assumption1(scenario),
        "assumption2_sw": check_assumption2_sw(scenario),
        "assumption3": check_assumption3(scenario),
        "condition10": check_condition10(scenario),
    }
    print(f"scenario {scenario.name}: N={scenario.n_items} H={scenario.horizon} "
          f"B={scenario.capacity:.6g}")
    for label, verdict in checks.items():
        failing = int(verdict.cells.size - verdict.cells.sum())
        detail = "all cells pass" if verdict.ok else f"{failing}/{verdict.cells.size} cells fail"
        if not verdict.ok:
            n_idx, t_idx = np.argwhere(~verdict.cells)[0]
            detail += f" (first: item {n_idx}, period {t_idx + 1})"
        print(f"  {label:<14} {'true' if verdict.ok else 'false':<5} {detail}")
    if getattr(args, "out", None):
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        payload = {
            label: {"ok": verdict.ok, "cells": verdict.cells.tolist()}
            for label, verdict in checks.items()
        }
        with open(out_dir / "check.json", "w", encoding="utf-8") as fh:
            json.dump({"scenario": scenario.name, "checks": payload}, fh, indent=2)
            fh.write("\n")
        print(f"wrote {out_dir / 'check.json'}")
    return EXIT_OK


_FIGURE_PANELS = {
    "fig2": [f"fig2-{s}-{c}" for s in ("stationary", "nonstationary") for c in ("tight", "medium", "loose")],
    "fig3": [f"fig3-{s}-{q}" for s in ("stationary", "nonstationary") for q in ("low", "medium", "high")],
}


def cmd_reproduce(args: argparse.Namespace) -> int:
    config = merge_config(args)
    panels = _FIGURE_PANELS[args.figure]
    if getattr(args, "variant", None):
        exact = f"{args.figure}-{args.variant}"
        if exact in panels:
            panels = [exact]
        else:
            panels = [p for p in panels if args.variant in p]
        if not panels:
            raise ConfigError(f"variant {args.variant!r} matches no {args.figure} panel")
    out_dir = Path(config["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    policy = RngPolicy(master_seed=int(config["seed"]), crn=bool(config["crn"]))
    manifest = {"figure": args.figure, "reps": int(config["reps"]), "seed": int(config["seed"]), "panels": []}
    for name in panels:
        preset = get_preset(name)
        designs = resolve_designs(config, preset.scenario.horizon)
        results = run_experiment(
            preset,
            designs,
            reps=int(config["reps"]),
            rng_policy=policy,
            threads=int(config["threads"]),
            gte_reps=int(config["gte_reps"]),
        )
        csv_path = out_dir / f"{name}.csv"
        harness.write_raw_csv(results, csv_path)
        manifest["panels"].append(
            {
                "name": name,
                "csv": csv_path.name,
                "true_gte": results.gte.value,
                "gte_ci_halfwidth": results.gte.ci_halfwidth,
            }
        )
        print(f"{name}: true GTE {results.gte.value:+.6g} -> {csv_path}")
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    print(f"wrote {out_dir / 'manifest.json'}")
    return EXIT_OK


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--preset", help="named scenario preset")
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--reps", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--threads", type=int)
    parser.add_argument("--out")
    parser.add_argument("--format", dest="fmt", choices=("csv", "json"))
    parser.add_argument("--crn", choices=("on", "off"))
    parser.add_argument("--p", type=float)
    parser.add_argument("--mode", choices=("enumerate", "mc"))
    parser.add_argument("--gte-reps", dest="gte_reps", type=int)
    parser.add_argument("--mc-reps", dest="mc_reps", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="invexp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run a replicated experiment and export results")
    _add_common(p_run)
    p_run.set_defaults(func=cmd_run)
    p_bias = sub.add_parser("bias", help="closed-form bias reports per design")
    _add_common(p_bias)
    p_bias.set_defaults(func=cmd_bias)
    p_check = sub.add_parser("check", help="assumption and condition verdicts")
    _add_common(p_check)
    p_check.set_defaults(func=cmd_check)
    p_rep = sub.add_parser("reproduce", help="run all panels of a figure")
    p_rep.add_argument("figure", choices=("fig2", "fig3"))
    p_rep.add_argument("--variant", help="substring filter, e.g. stationary-tight")
    _add_common(p_rep)
    p_rep.set_defaults(func=cmd_reproduce)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InvalidInputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceLimitError as exc:
        print(f"error: {exc}\nhint: retry with --mode mc", file=sys.stderr)
        return EXIT_RESOURCE
    except Exception as exc:  # pragma: no cover - defensive
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
