"""Command-line entry point wiring datasets, calibration, simulation,
scenarios and reports into reproducible runs.

Exit codes: 0 success, 2 data or configuration errors, 3 calibration
failure, 4 missing upstream artifacts (e.g. calibration.json).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import baseline, fixtures, flows, reports, scenarios
from .behavior import BehaviorParams
from .calibration import (CalibrationConfig, CalibrationError, calibrate, param_confidence,
                          split_panel)
from .dataio import ANCHOR_YEARS, Dataset, DataValidationError, FILE_COLUMNS, load_dataset
from .engine import SimulationContext, probability_profile, scenario_none
from .months import month_index, month_label, year_of
from .population import demographics_table, sender_demographics
from .runconfig import RunConfig, build_config, write_config_file

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_DATA = 2
EXIT_CALIBRATION = 3
EXIT_MISSING_ARTIFACT = 4


class ArtifactMissingError(RuntimeError):
    """A required upstream output (calibration.json) is absent."""


def _input_paths(config: RunConfig) -> list[Path]:
    return [Path(config.data_dir) / name for name in FILE_COLUMNS]


def _load(config: RunConfig) -> Dataset:
    return load_dataset(config.data_dir)


def _context(dataset: Dataset, config: RunConfig) -> SimulationContext:
    return SimulationContext(dataset, start=config.start, end=config.end,
                             clamp_delta_gdp=config.delta_gdp_clamp)


def _params_path(config: RunConfig, override: str | None) -> Path:
    return Path(override) if override else Path(config.output_dir) / "calibration.json"


def _load_params(config: RunConfig, override: str | None) -> tuple[BehaviorParams, Path]:
    path = _params_path(config, override)
    if not path.exists():
        raise ArtifactMissingError(f"calibrated parameters not found: {path}; run 'calibrate' first")
    payload = json.loads(path.read_text(encoding="utf-8"))
    return BehaviorParams(**payload["params"]), path


def _aggregate_bands(totals: np.ndarray, months: list[int], prefix: str) -> list:
    """Empirical bands for the all-months total and each calendar year."""
    bands = [flows.confidence_band(totals.sum(axis=1), f"{prefix}:total")]
    for year in sorted({year_of(m) for m in months}):
        cols = [i for i, m in enumerate(months) if year_of(m) == year]
        bands.append(flows.confidence_band(totals[:, cols].sum(axis=1), f"{prefix}:{year}"))
    return bands


def _band_rows(bands) -> list:
    return [[b.aggregate_id, b.level, b.lower, b.mean, b.upper] for b in bands]


# ---------------------------------------------------------------------------
# Commands

def cmd_fixtures_generate(config: RunConfig, args) -> int:
    dataset = fixtures.generate_fixture(
        config.data_dir, seed=config.seed, n_origins=args.origins,
        n_destinations=args.destinations, noise=args.noise, with_events=not args.no_events)
    write_config_file(config, Path(config.data_dir) / "run.config")
    print(f"wrote synthetic dataset to {config.data_dir}: "
          f"{len(dataset.corridors)} corridors, {len(dataset.disasters)} events, "
          f"{len(dataset.panel)} panel observations (plus a starter run.config)")
    return EXIT_OK


def cmd_build_population(config: RunConfig, args) -> int:
    dataset = _load(config)
    ctx = _context(dataset, config)
    out = Path(config.output_dir)

    pop_rows = (
        (o, d, sex, age, month_label(m), count)
        for (o, d, sex, age, m, count) in ctx.population.iter_rows()
        if config.start <= m <= config.end
    )
    pop_path = reports.write_csv(out / "population.csv",
                                 ("origin", "destination", "sex", "age", "month", "count"),
                                 pop_rows)
    demo_rows = [
        (d.origin, d.destination, month_label(d.month), d.age_symmetry, d.sex_symmetry,
         d.asymmetry, d.family)
        for d in demographics_table(ctx.population)
        if config.start <= d.month <= config.end
    ]
    demo_path = reports.write_csv(
        out / "demographics.csv",
        ("origin", "destination", "month", "age_symmetry", "sex_symmetry", "asymmetry", "family"),
        demo_rows)

    for year in ANCHOR_YEARS:
        total = sum(r.count for r in dataset.stocks if r.anchor_year == year)
        print(f"total stock {year}: {total}")
    print(f"population rows: months {month_label(config.start)}..{month_label(config.end)}")
    reports.write_manifest(out, "build-population", config.echo(), _input_paths(config),
                           [pop_path, demo_path])
    return EXIT_OK


def cmd_calibrate(config: RunConfig, args) -> int:
    dataset = _load(config)
    ctx = _context(dataset, config)
    panel = split_panel(dataset.panel, config.split_fraction, config.effective_split_seed)
    cal_config = CalibrationConfig(starts=config.starts, max_iter=config.max_iter,
                                   tol=config.tol, seed=config.seed, threads=config.threads)
    result = calibrate(ctx, panel, cal_config)
    cis = None
    if config.bootstrap_reps > 0:
        cis = param_confidence(result, panel, ctx, replicates=config.bootstrap_reps,
                               seed=config.seed, threads=config.threads)
    payload = {
        "params": result.params.as_dict(),
        "param_cis": cis,
        "train_sse": result.train_sse,
        "test_r2": result.test_r2,
        "iterations": result.iterations,
        "converged": result.converged,
        "n_train": result.n_train,
        "n_test": result.n_test,
        "n_excluded": result.n_excluded,
        "start_losses": result.start_losses,
        "seed": config.seed,
        "split_seed": config.effective_split_seed,
        "config": config.echo(),
    }
    out = Path(config.output_dir)
    path = reports.write_json(out / "calibration.json", payload)
    reports.write_manifest(out, "calibrate", config.echo(), _input_paths(config), [path])
    print(f"calibration: converged={result.converged} iterations={result.iterations} "
          f"train_sse={result.train_sse:.6g} test_r2={result.test_r2}")
    return EXIT_OK


def cmd_simulate(config: RunConfig, args) -> int:
    dataset = _load(config)
    params, params_path = _load_params(config, args.params)
    ctx = _context(dataset, config)
    out = Path(config.output_dir)

    grid = ctx.expected_flows(params)[:, ctx.window]
    months = list(ctx.window_months)
    flows_path = reports.write_csv(
        out / "flows.csv", ("sender", "recipient", "month", "amount_usd", "scenario_id"),
        reports.flow_rows(ctx.corridors, months, grid, "factual"))
    outputs = [flows_path]
    if config.band_draws:
        totals = flows.sample_monthly_totals(ctx, params, None, config.seed, config.band_draws)
        bands_path = reports.write_csv(out / "bands.csv",
                                       ("aggregate_id", "level", "lower", "mean", "upper"),
                                       _band_rows(_aggregate_bands(totals, months, "factual")))
        outputs.append(bands_path)
    reports.write_manifest(out, "simulate", config.echo(),
                           _input_paths(config) + [params_path], outputs)
    print(f"simulate: total expected flow {grid.sum():.6g} USD over "
          f"{month_label(config.start)}..{month_label(config.end)}")
    return EXIT_OK


def cmd_counterfactual(config: RunConfig, args) -> int:
    dataset = _load(config)
    params, params_path = _load_params(config, args.params)
    ctx = _context(dataset, config)
    out = Path(config.output_dir)

    result = scenarios.run_counterfactual(ctx, params)
    months = list(result.months)
    induced_rows = (
        ("no_disaster", dest, origin, month_label(m), float(result.induced[c, mi]))
        for c, (origin, dest) in enumerate(result.corridors)
        for mi, m in enumerate(months)
    )
    induced_path = reports.write_csv(
        out / "induced.csv", ("scenario_id", "sender", "recipient", "month", "amount_usd"),
        induced_rows)
    cf_path = reports.write_csv(
        out / "flows_counterfactual.csv",
        ("sender", "recipient", "month", "amount_usd", "scenario_id"),
        reports.flow_rows(result.corridors, months, result.counterfactual, "no_disaster"))
    outputs = [induced_path, cf_path]

    for grouping, name in (("income-group", "summary_income_group.csv"),
                           ("country", "summary_country.csv"),
                           ("year", "summary_year.csv")):
        rows = [
            (r.key, r.induced_usd, r.factual_usd, r.share_of_factual, r.per_capita, r.per_gdp)
            for r in scenarios.summarize(result, dataset, grouping)
        ]
        outputs.append(reports.write_csv(
            out / name,
            ("key", "induced_usd", "factual_usd", "share_of_factual", "per_capita", "per_gdp"),
            rows))

    if config.band_draws:
        # common random numbers: both runs consume identical per-corridor streams
        factual = flows.sample_monthly_totals(ctx, params, None, config.seed, config.band_draws)
        counter = flows.sample_monthly_totals(ctx, params, scenario_none(), config.seed,
                                              config.band_draws)
        outputs.append(reports.write_csv(
            out / "induced_bands.csv", ("aggregate_id", "level", "lower", "mean", "upper"),
            _band_rows(_aggregate_bands(factual - counter, months, "induced"))))

    reports.write_manifest(out, "counterfactual", config.echo(),
                           _input_paths(config) + [params_path], outputs)
    print(f"counterfactual: induced total {result.total_induced():.6g} USD "
          f"({100 * result.total_induced() / max(result.total_factual(), 1e-300):.3f}% of factual)")
    return EXIT_OK


def cmd_attribute(config: RunConfig, args) -> int:
    dataset = _load(config)
    params, params_path = _load_params(config, args.params)
    ctx = _context(dataset, config)
    out = Path(config.output_dir)
    convention = args.convention or config.attribution

    report = scenarios.attribute_by_hazard(ctx, params, convention)
    rows = [
        (h.hazard, h.induced_usd, h.affected_persons, h.usd_per_affected,
         h.induced_usd / report.total_factual if report.total_factual else 0.0)
        for h in report.per_hazard
    ]
    total_affected = sum(h.affected_persons for h in report.per_hazard)
    rows.append(("all", report.total_induced, total_affected,
                 report.total_induced / total_affected if total_affected else None,
                 report.share_of_total))
    attr_path = reports.write_csv(
        out / "attribution.csv",
        ("hazard", "induced_usd", "affected_persons", "usd_per_affected", "share_of_total"),
        rows)
    attr_json = reports.write_json(out / "attribution.json", {
        "convention": report.convention,
        "total_induced_usd": report.total_induced,
        "total_factual_usd": report.total_factual,
        "interaction_residual_usd": report.interaction_residual,
        "share_of_total": report.share_of_total,
        "per_hazard": {h.hazard: {"induced_usd": h.induced_usd,
                                  "affected_persons": h.affected_persons,
                                  "usd_per_affected": h.usd_per_affected}
                       for h in report.per_hazard},
    })

    event_rows = []
    for event in dataset.disasters:
        ev = scenarios.attribute_event(ctx, params, event.event_id)
        event_rows.append((ev.event_id, ev.induced_usd_12m, ev.baseline_usd_12m,
                           ev.relative_increase))
    events_path = reports.write_csv(
        out / "events.csv",
        ("event_id", "induced_usd_12m", "baseline_usd_12m", "relative_increase"), event_rows)

    reports.write_manifest(out, "attribute", config.echo(),
                           _input_paths(config) + [params_path],
                           [attr_path, attr_json, events_path])
    print(f"attribution ({convention}): induced {report.total_induced:.6g} USD, "
          f"residual {report.interaction_residual:.6g} USD")
    return EXIT_OK


def cmd_compare_baseline(config: RunConfig, args) -> int:
    dataset = _load(config)
    params, params_path = _load_params(config, args.params)
    ctx = _context(dataset, config)
    out = Path(config.output_dir)

    fit = baseline.calibrate_gravity(dataset.panel, dataset)
    gravity = baseline.gravity_flows(dataset, fit.beta_exp)
    grid = ctx.expected_flows(params)
    structural = {
        (dest, origin, m): float(grid[c, m])
        for c, (origin, dest) in enumerate(ctx.corridors)
        for m in ctx.window_months
    }
    report = baseline.compare_models(structural, gravity, dataset.panel)
    comp_path = reports.write_csv(
        out / "comparison.csv",
        ("sender", "recipient", "observed_usd", "structural_usd", "gravity_usd",
         "se_structural", "se_gravity"),
        [(r.sender, r.recipient, r.observed_usd, r.structural_usd, r.gravity_usd,
          r.se_structural, r.se_gravity) for r in report.rows])
    gravity_json = reports.write_json(out / "gravity.json", {
        "beta_exp": fit.beta_exp,
        "sse": fit.sse,
        "at_boundary": fit.at_boundary,
        "unimodal": fit.unimodal,
        "n_excluded_fit": fit.n_excluded,
        "n_excluded_compare": report.n_excluded,
        "mean_relative_error_ratio": report.mean_relative_error_ratio,
        "largest_overestimates": [list(c) for c in report.largest_overestimates],
        "largest_underestimates": [list(c) for c in report.largest_underestimates],
    })
    reports.write_manifest(out, "compare-baseline", config.echo(),
                           _input_paths(config) + [params_path], [comp_path, gravity_json])
    print(f"gravity exponent {fit.beta_exp:.4f}; "
          f"relative error ratio (structural/gravity): {report.mean_relative_error_ratio}")
    return EXIT_OK


def cmd_report(config: RunConfig, args) -> int:
    dataset = _load(config)
    params, params_path = _load_params(config, args.params)
    ctx = _context(dataset, config)
    out = Path(config.output_dir)

    cube = ctx.probability_cube(params)
    origins = sorted({o for o, _ in ctx.corridors})
    snapshot_months = [m for m in ctx.window_months if m % 12 == 11] or [config.end]
    profile_rows = []
    for origin in origins:
        for m in snapshot_months:
            for cum, p in probability_profile(ctx, params, origin, m, cube=cube):
                profile_rows.append((origin, "ALL", month_label(m), cum, p))
    profiles_path = reports.write_csv(
        out / "profiles.csv",
        ("origin", "destination_scope", "month", "cum_population_fraction", "probability"),
        profile_rows)

    cohorts = []
    probs = []
    for c, (origin, dest) in enumerate(ctx.corridors):
        for m in ctx.window_months:
            for cohort in ctx.population.cohorts(origin, dest, m):
                cohorts.append(cohort)
                probs.append(float(cube[c, m, cohort.age]))
    demo_rows = [
        (r.group, r.expected_senders, r.male_share, r.female_share, r.mean_age,
         r.share_20_39, r.share_under_40, r.empty)
        for r in sender_demographics(cohorts, probs, dataset)
    ]
    senders_path = reports.write_csv(
        out / "sender_demographics.csv",
        ("group", "expected_senders", "male_share", "female_share", "mean_age",
         "share_20_39", "share_under_40", "empty"), demo_rows)

    reports.write_manifest(out, "report", config.echo(),
                           _input_paths(config) + [params_path], [profiles_path, senders_path])
    print(f"report: {len(profile_rows)} profile points for {len(origins)} origins; "
          f"sender demographics over {len(cohorts)} cohorts")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing and dispatch

def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="run-config file (key = value lines)")
    parser.add_argument("--data-dir", help="input CSV directory")
    parser.add_argument("--output-dir", help="output directory")
    parser.add_argument("--seed", type=int, help="root random seed")
    parser.add_argument("--threads", type=int, help="worker processes for parallel stages")
    parser.add_argument("--start", help="first simulated month, YYYY-MM")
    parser.add_argument("--end", help="last simulated month, YYYY-MM")


def _add_params_flag(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--params", help="path to calibration.json (default: <output-dir>/calibration.json)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="remitsim",
                                     description="Remittance flow simulation and calibration engine")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fixtures", help="synthetic data utilities")
    fix_sub = p.add_subparsers(dest="subcommand", required=True)
    g = fix_sub.add_parser("generate", help="write a synthetic desk-scale dataset")
    _add_common(g)
    g.add_argument("--noise", type=float, default=0.0, help="multiplicative panel noise level")
    g.add_argument("--origins", type=int, default=10)
    g.add_argument("--destinations", type=int, default=5)
    g.add_argument("--no-events", action="store_true", help="omit disaster events")
    g.set_defaults(func=cmd_fixtures_generate)

    p = sub.add_parser("build-population", help="write population.csv and demographics.csv")
    _add_common(p)
    p.set_defaults(func=cmd_build_population)

    p = sub.add_parser("calibrate", help="fit behavioural parameters to the panel")
    _add_common(p)
    p.add_argument("--split-seed", type=int, help="seed for the train/test split")
    p.add_argument("--split-fraction", type=float, help="train share of the panel")
    p.add_argument("--starts", type=int, help="optimizer multi-starts")
    p.add_argument("--max-iter", type=int, help="iteration cap per start")
    p.add_argument("--tol", type=float, help="relative loss-change convergence threshold")
    p.add_argument("--bootstrap-reps", type=int, help="bootstrap replicates for parameter CIs")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("simulate", help="write factual flows.csv and bands.csv")
    _add_common(p)
    _add_params_flag(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("counterfactual", help="no-disaster counterfactual and induced flows")
    _add_common(p)
    _add_params_flag(p)
    p.set_defaults(func=cmd_counterfactual)

    p = sub.add_parser("attribute", help="per-hazard and per-event attribution")
    _add_common(p)
    _add_params_flag(p)
    p.add_argument("--convention", choices=("only_hazard", "leave_one_out"))
    p.set_defaults(func=cmd_attribute)

    p = sub.add_parser("compare-baseline", help="gravity-model baseline comparison")
    _add_common(p)
    _add_params_flag(p)
    p.set_defaults(func=cmd_compare_baseline)

    p = sub.add_parser("report", help="probability profiles and sender demographics")
    _add_common(p)
    _add_params_flag(p)
    p.set_defaults(func=cmd_report)
    return parser


def _config_from_args(args) -> RunConfig:
    overrides = dict(
        data_dir=Path(args.data_dir) if args.data_dir else None,
        output_dir=Path(args.output_dir) if args.output_dir else None,
        seed=args.seed,
        threads=args.threads,
    )
    if args.start:
        overrides["start"] = month_index(args.start)
    if args.end:
        overrides["end"] = month_index(args.end)
    for name in ("split_seed", "split_fraction", "starts", "max_iter", "tol", "bootstrap_reps"):
        if hasattr(args, name) and getattr(args, name) is not None:
            overrides[name] = getattr(args, name)
    return build_config(args.config, **overrides)


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        config = _config_from_args(args)
        return args.func(config, args)
    except DataValidationError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except CalibrationError as exc:
        print(f"calibration failed: {exc}", file=sys.stderr)
        return EXIT_CALIBRATION
    except ArtifactMissingError as exc:
        print(f"missing artifact: {exc}", file=sys.stderr)
        return EXIT_MISSING_ARTIFACT


if __name__ == "__main__":
    sys.exit(main())
