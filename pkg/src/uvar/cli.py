"""Command line interface.

Subcommands: ``estimate``, ``variance``, ``simulate``, ``oracle``,
``synth``, ``report``. Every run takes ``--config PATH`` plus repeatable
``--set key=value`` overrides in the same dotted-key space, and writes
comma-separated tables with documented headers plus a machine-readable
manifest into the output directory.

Exit codes: 2 for configuration errors, 3 for data errors, 4 for violated
numerical preconditions.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import classicvar, hdvar, io, oracle
from .config import RunConfig, parse_config_file
from .designs import compute_inclusion_probs, draw_sample
from .errors import ConfigError, DataError, PreconditionError
from .frame import Population
from .greg import estimate_greg, estimate_ht, fit_greg
from .kernels import build_kernel_context
from .report import render_report
from .simharness import run_replications, summarize

__all__ = ["main", "cli_main"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uvar",
        description="Design-based survey estimation with exact-variance estimators.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("estimate", "point estimates for a given sample"),
        ("variance", "variance report for a given sample"),
        ("simulate", "replication study under a sampling design"),
        ("oracle", "exhaustive-enumeration report for a small frame"),
        ("synth", "generate a synthetic population file"),
        ("report", "render figures for a completed simulate run"),
    ):
        cmd = sub.add_parser(name, help=text)
        if name == "report":
            cmd.add_argument("--input", required=True, help="simulate output directory")
            cmd.add_argument("--output", default=None, help="figure directory (defaults to input)")
        else:
            cmd.add_argument("--config", required=True, help="flat key=value config file")
            cmd.add_argument(
                "--set",
                dest="overrides",
                action="append",
                default=[],
                metavar="KEY=VALUE",
                help="override one config key (repeatable)",
            )
            cmd.add_argument("--output-dir", default=None, help="override run.output_dir")
    return parser


def _load_config(args) -> RunConfig:
    config = RunConfig(parse_config_file(args.config))
    config.apply_overrides(args.overrides)
    if args.output_dir:
        config.values["run.output_dir"] = args.output_dir
    return config


def _out_dir(config: RunConfig) -> Path:
    out = Path(config.require("run.output_dir"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _population(config: RunConfig) -> Population:
    if config.values.get("population.path"):
        mapping = io.ColumnMapping(
            outcome=config.require("population.outcome"),
            covariates=config.get_list("population.covariates"),
            unit_id=config.values.get("population.id"),
            stratum=config.values.get("population.stratum"),
            cluster=config.values.get("population.cluster"),
            size=config.values.get("population.size"),
        )
        if not mapping.covariates:
            raise ConfigError("population.covariates must name at least one column")
        return io.load_population(
            config.require("population.path"),
            mapping,
            log_outcome=config.get_bool("population.log_outcome"),
        )
    if config.values.get("synth.units"):
        return _synthetic(config)
    raise ConfigError("config must set population.path or synth.units")


def _synthetic(config: RunConfig) -> Population:
    covariates = config.get_int("synth.covariates", default=1)
    coefficients = config.get_float_list("synth.coefficients")
    if not coefficients:
        raise ConfigError("synth.coefficients is required for synthetic populations")
    return io.generate_synthetic(
        units=config.get_int("synth.units"),
        covariates=covariates,
        coefficients=coefficients,
        noise_scale=config.get_float("synth.noise", default=1.0),
        family=config.values.get("synth.family", "linear-gaussian"),
        seed=config.get_int("synth.seed", default=0),
        strata=config.get_int("synth.strata", default=0),
        clusters=config.get_int("synth.clusters", default=0),
    )


def _sample_for(config: RunConfig, pop: Population, probs, design):
    if config.values.get("sample.path"):
        return io.load_sample(
            config.require("sample.path"),
            pop,
            column=config.values.get("sample.column", "unit_id"),
        )
    seed = config.get_int("sample.seed")
    if seed is None:
        raise ConfigError("provide sample.path or sample.seed")
    return draw_sample(design, pop, probs, seed)


def _cmd_estimate(args) -> int:
    config = _load_config(args)
    out = _out_dir(config)
    pop = _population(config)
    design = config.design_spec()
    probs = compute_inclusion_probs(design, pop)
    sample = _sample_for(config, pop, probs, design)
    rows = [
        ("n", sample.size),
        ("N", pop.unit_count),
        ("ht", estimate_ht(pop, sample, probs)),
        ("greg", estimate_greg(pop, sample, probs)),
    ]
    with (out / "estimates.csv").open("w", newline="", encoding="utf-8") as handle:
        handle.write("estimator,value\n")
        for name, value in rows:
            handle.write(f"{name},{io.fmt(value)}\n")
    io.write_manifest(out, "estimate", config.values)
    return 0


VARIANCE_COLUMNS = [
    "a_hat", "tau1_hat", "tau1_bias_hat", "tau1_bcf", "tau2a_hat",
    "tau2a_bias_hat", "tau2b_hat", "tau2_hat", "tau2_bcf", "v_hd",
    "v_asy", "v_ij", "tau1_floor_active", "tau2_floor_active",
]


def _cmd_variance(args) -> int:
    config = _load_config(args)
    out = _out_dir(config)
    pop = _population(config)
    design = config.design_spec()
    probs = compute_inclusion_probs(design, pop)
    sample = _sample_for(config, pop, probs, design)
    ctx = build_kernel_context(pop, sample, probs)
    report = hdvar.hd_variance(
        ctx,
        include_tau2b=config.get_bool("run.include_tau2b"),
        fast=config.get_bool("run.fast_tau2a", default=True),
    )
    fit = fit_greg(pop, sample, probs)
    v_asy = classicvar.asymptotic_variance(pop, sample, probs, fit)
    v_ij = classicvar.ij_bm_variance(ctx)[1]
    values = [
        report.point_estimate, report.tau1_hat, report.tau1_bias_hat,
        report.tau1_bcf, report.tau2a_hat, report.tau2a_bias_hat,
        report.tau2b_hat, report.tau2_hat, report.tau2_bcf,
        report.hd_variance, v_asy, v_ij,
        report.tau1_floor_active, report.tau2_floor_active,
    ]
    with (out / "variance.csv").open("w", newline="", encoding="utf-8") as handle:
        handle.write(",".join(VARIANCE_COLUMNS) + "\n")
        handle.write(",".join(io.fmt(v) for v in values) + "\n")
    with (out / "variance_timings.csv").open("w", newline="", encoding="utf-8") as handle:
        handle.write("stage,seconds\n")
        for stage, seconds in report.stage_seconds.items():
            handle.write(f"{stage},{io.fmt(seconds)}\n")
    io.write_manifest(out, "variance", config.values)
    return 0


def _cmd_simulate(args) -> int:
    config = _load_config(args)
    out = _out_dir(config)
    pop = _population(config)
    design = config.design_spec()
    master_seed = config.get_int("run.master_seed", default=0)
    parallelism = config.get_int("run.parallelism", default=1)
    env_cap = os.environ.get("UVAR_THREADS")
    if env_cap:
        parallelism = max(1, min(parallelism, int(env_cap)))
    result = run_replications(
        pop,
        design,
        replicates=config.replicates(),
        methods=config.methods(),
        master_seed=master_seed,
        parallelism=parallelism,
        hd_include_tau2b=config.get_bool("run.include_tau2b"),
        fast_tau2a=config.get_bool("run.fast_tau2a", default=True),
    )
    summary = summarize(result, alphas=config.alphas())
    io.write_replicates(result, out)
    io.write_summary(summary, result, out)
    io.write_manifest(out, "simulate", config.values, master_seed=master_seed)
    if config.get_bool("run.figures"):
        render_report(out, out)
    return 0


def _cmd_oracle(args) -> int:
    config = _load_config(args)
    out = _out_dir(config)
    pop = _population(config)
    design = config.design_spec()
    probs = compute_inclusion_probs(design, pop)
    report = oracle.exact_h_components(pop, probs)
    io.write_oracle_report(report, out)
    io.write_manifest(out, "oracle", config.values)
    return 0


def _cmd_synth(args) -> int:
    config = _load_config(args)
    out = _out_dir(config)
    pop = _synthetic(config)
    io.write_population_csv(pop, out / "population.csv")
    io.write_manifest(out, "synth", config.values)
    return 0


def _cmd_report(args) -> int:
    render_report(args.input, args.output)
    return 0


_COMMANDS = {
    "estimate": _cmd_estimate,
    "variance": _cmd_variance,
    "simulate": _cmd_simulate,
    "oracle": _cmd_oracle,
    "synth": _cmd_synth,
    "report": _cmd_report,
}


def cli_main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors, which matches the config-error code
        return int(exc.code) if exc.code else 0
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except DataError as err:
        print(f"data error: {err}", file=sys.stderr)
        return 3
    except PreconditionError as err:
        print(f"precondition violated: {err}", file=sys.stderr)
        return 4


def main() -> None:
    sys.exit(cli_main())
