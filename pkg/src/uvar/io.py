"""Population loading, synthetic generation, and delimited result emission.

All files are UTF-8 comma-separated with a header row. Floats are written
with ``repr`` so values round-trip exactly and identical runs produce
byte-identical files. Wall-time measurements are never mixed into
statistical output files; they go to sibling ``*_timings`` files so the
statistical outputs stay deterministic.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .errors import ConfigError, DataError
from .frame import Population, Sample, validate_population
from .oracle import OracleReport
from .simharness import ReplicationResult, ReplicationSummary, timing_ranges

__all__ = [
    "ColumnMapping",
    "load_population",
    "generate_synthetic",
    "write_population_csv",
    "load_sample",
    "write_replicates",
    "write_summary",
    "write_oracle_report",
    "write_manifest",
    "fmt",
]


def fmt(value) -> str:
    """Deterministic cell formatting: shortest round-trip repr for floats."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


@dataclass(frozen=True)
class ColumnMapping:
    """Names of the population file columns to bind."""

    outcome: str
    covariates: Sequence[str]
    unit_id: Optional[str] = None
    stratum: Optional[str] = None
    cluster: Optional[str] = None
    size: Optional[str] = None


def _parse_cell(raw: str, row: int, column: str) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise DataError(f"row {row}, column {column!r}: unparseable value {raw!r}") from None
    if not np.isfinite(value):
        raise DataError(f"row {row}, column {column!r}: non-finite value {raw!r}")
    return value


def load_population(
    path, mapping: ColumnMapping, log_outcome: bool = False
) -> Population:
    """Load a population from a headered CSV file.

    With ``log_outcome`` the outcome column is log-transformed and must be
    strictly positive; the offending row is named otherwise.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"population file not found: {path}")
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        header = reader.fieldnames or []
        needed = [mapping.outcome, *mapping.covariates]
        for optional in (mapping.unit_id, mapping.stratum, mapping.cluster, mapping.size):
            if optional:
                needed.append(optional)
        for column in needed:
            if column not in header:
                raise DataError(f"missing column {column!r}; file has {header}")
        y, rows_x, ids, strata, clusters, sizes = [], [], [], [], [], []
        for row_number, row in enumerate(reader, start=2):
            outcome = _parse_cell(row[mapping.outcome], row_number, mapping.outcome)
            if log_outcome:
                if outcome <= 0.0:
                    raise DataError(
                        f"row {row_number}: outcome must be positive under "
                        f"log transform, got {outcome!r}"
                    )
                outcome = float(np.log(outcome))
            y.append(outcome)
            rows_x.append(
                [_parse_cell(row[c], row_number, c) for c in mapping.covariates]
            )
            if mapping.unit_id:
                ids.append(row[mapping.unit_id])
            if mapping.stratum:
                strata.append(row[mapping.stratum])
            if mapping.cluster:
                clusters.append(row[mapping.cluster])
            if mapping.size:
                sizes.append(_parse_cell(row[mapping.size], row_number, mapping.size))
    if not y:
        raise DataError(f"population file {path} has no data rows")
    pop = Population(
        y=y,
        x=np.asarray(rows_x),
        stratum=strata or None,
        cluster=clusters or None,
        size_measure=sizes or None,
        unit_ids=ids or None,
    )
    return validate_population(pop)


def generate_synthetic(
    units: int,
    covariates: int,
    coefficients: Sequence[float],
    noise_scale: float,
    family: str,
    seed: int,
    strata: int = 0,
    clusters: int = 0,
) -> Population:
    """Deterministic synthetic population.

    The covariate matrix carries an explicit intercept column plus
    ``covariates - 1`` standard normal columns. ``linear-gaussian`` adds
    gaussian noise on the natural scale; ``lognormal`` exponentiates a
    linear-gaussian signal, giving right-skewed outcomes with linear
    structure on the log scale. A positive lognormal size measure is always
    included so Poisson designs work out of the box; optional contiguous
    stratum/cluster labels support the group designs.
    """
    if units < 2 or covariates < 1:
        raise ConfigError("synthetic populations need units >= 2 and covariates >= 1")
    coefficients = np.asarray(list(coefficients), dtype=float)
    if coefficients.shape != (covariates,):
        raise ConfigError(
            f"expected {covariates} coefficients, got {coefficients.shape[0]}"
        )
    if family not in ("linear-gaussian", "lognormal"):
        raise ConfigError(f"unknown outcome family {family!r}")
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    x = np.column_stack(
        [np.ones(units)] + [rng.normal(0.0, 1.0, units) for _ in range(covariates - 1)]
    )
    signal = x @ coefficients
    noise = rng.normal(0.0, 1.0, units) * noise_scale
    y = signal + noise if family == "linear-gaussian" else np.exp(signal + noise)
    size = np.exp(0.5 * rng.normal(0.0, 1.0, units))
    unit_index = np.arange(units)
    stratum = (
        [f"s{1 + (i * strata) // units}" for i in unit_index] if strata > 0 else None
    )
    cluster = (
        [f"c{1 + (i * clusters) // units}" for i in unit_index] if clusters > 0 else None
    )
    return Population(
        y=y,
        x=x,
        stratum=stratum,
        cluster=cluster,
        size_measure=size,
        unit_ids=[str(i + 1) for i in unit_index],
    )


def write_population_csv(pop: Population, path) -> None:
    path = Path(path)
    columns = ["unit_id", "y"] + [f"x{k + 1}" for k in range(pop.covariate_count)]
    if pop.stratum is not None:
        columns.append("stratum")
    if pop.cluster is not None:
        columns.append("cluster")
    if pop.size_measure is not None:
        columns.append("size")
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(columns)
        for i in range(pop.unit_count):
            row = [
                pop.unit_ids[i] if pop.unit_ids is not None else str(i + 1),
                fmt(pop.y[i]),
            ]
            row.extend(fmt(v) for v in pop.x[i])
            if pop.stratum is not None:
                row.append(pop.stratum[i])
            if pop.cluster is not None:
                row.append(pop.cluster[i])
            if pop.size_measure is not None:
                row.append(fmt(pop.size_measure[i]))
            writer.writerow(row)


def default_mapping(pop_covariates: int) -> ColumnMapping:
    """Mapping matching :func:`write_population_csv` output."""
    return ColumnMapping(
        outcome="y",
        covariates=[f"x{k + 1}" for k in range(pop_covariates)],
        unit_id="unit_id",
    )


def load_sample(path, pop: Population, column: str = "unit_id") -> Sample:
    """Load a realized sample as a one-column CSV of unit identifiers.

    Identifiers are matched against the population's id column when it has
    one, else interpreted as 1-based unit indices.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"sample file not found: {path}")
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        if column not in (reader.fieldnames or []):
            raise DataError(f"sample file lacks column {column!r}")
        raw = [row[column] for row in reader]
    if pop.unit_ids is not None:
        index_of = {uid: k + 1 for k, uid in enumerate(pop.unit_ids)}
        try:
            indices = [index_of[v] for v in raw]
        except KeyError as err:
            raise DataError(f"sample id {err.args[0]!r} not present in population") from None
    else:
        try:
            indices = [int(v) for v in raw]
        except ValueError:
            raise DataError("sample file entries must be integers (1-based unit indices)") from None
    if len(set(indices)) != len(indices):
        raise DataError("sample file lists a unit more than once")
    return Sample(indices=np.sort(np.asarray(indices, dtype=np.int64)), unit_count=pop.unit_count)


REPLICATE_COLUMNS = ["replicate", "seed", "n", "a_hat", "v_asy", "v_hd", "v_ij", "skipped_reason"]
TIMING_COLUMNS = ["replicate", "t_asy_s", "t_hd_s", "t_ij_s"]
SUMMARY_COLUMNS = ["method", "metric", "alpha", "value"]
TIMING_SUMMARY_COLUMNS = ["method", "metric", "value"]


def write_replicates(result: ReplicationResult, out_dir) -> None:
    """Per-replicate estimates (deterministic) and wall times (sibling file)."""
    out_dir = Path(out_dir)
    with (out_dir / "replicates.csv").open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(REPLICATE_COLUMNS)
        for rec in result.records:
            writer.writerow(
                [
                    rec.replicate,
                    rec.seed,
                    rec.sample_size,
                    fmt(rec.point_estimate),
                    fmt(rec.variances.get("asy")),
                    fmt(rec.variances.get("hd")),
                    fmt(rec.variances.get("ij")),
                    rec.skipped_reason or "",
                ]
            )
    with (out_dir / "replicate_timings.csv").open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(TIMING_COLUMNS)
        for rec in result.records:
            writer.writerow(
                [
                    rec.replicate,
                    fmt(rec.timings.get("asy")),
                    fmt(rec.timings.get("hd")),
                    fmt(rec.timings.get("ij")),
                ]
            )


def write_summary(
    summary: ReplicationSummary, result: ReplicationResult, out_dir
) -> None:
    out_dir = Path(out_dir)
    rows = [
        ("empirical", "v_emp", "", summary.empirical_variance),
        ("empirical", "mean_a_hat", "", summary.mean_point),
        ("empirical", "true_mean", "", summary.true_mean),
        ("empirical", "effective_replicates", "", summary.effective_count),
        ("empirical", "skipped_replicates", "", summary.skipped_count),
        ("empirical", "ratios_defined", "", summary.ratios_defined),
    ]
    for method in result.methods:
        for metric, value in sorted(summary.ratio_stats[method].items()):
            rows.append((method, f"vr_{metric}", "", value))
    for method, by_alpha in summary.coverage.items():
        for alpha in summary.alphas:
            rows.append((method, "coverage", alpha, by_alpha[alpha]))
    with (out_dir / "summary.csv").open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(SUMMARY_COLUMNS)
        for method, metric, alpha, value in rows:
            writer.writerow([method, metric, fmt(alpha), fmt(value)])
    with (out_dir / "summary_timings.csv").open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(TIMING_SUMMARY_COLUMNS)
        for method, (lo, hi) in sorted(timing_ranges(result).items()):
            writer.writerow([method, "min_s", fmt(lo)])
            writer.writerow([method, "max_s", fmt(hi)])


def write_oracle_report(report: OracleReport, out_dir) -> None:
    out_dir = Path(out_dir)
    scalars = [
        ("exact_mean", report.exact_mean),
        ("exact_variance", report.exact_variance),
        ("tau1", report.tau1),
        ("tau2", report.tau2),
        ("omega12", report.omega12),
        ("theta", report.theta),
        ("identity_residual", report.identity_residual),
        ("reconstruction_residual", report.reconstruction_residual),
        ("prob_sum", report.prob_sum),
        ("h1_mean_residual", report.h1_mean_residual),
        ("h2_mean_residual", report.h2_mean_residual),
        ("tau1_bias_exact", report.tau1_bias_exact),
        ("tau1_plugin_target", report.tau1_plugin_target),
    ]
    with (out_dir / "oracle_summary.csv").open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["field", "value"])
        for name, value in scalars:
            writer.writerow([name, fmt(value)])
    n_units = report.theta_bar_table.shape[0]
    with (out_dir / "oracle_pair_means.csv").open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["i", "j", "theta_ij"])
        for i in range(n_units):
            for j in range(i + 1, n_units):
                writer.writerow([i + 1, j + 1, fmt(report.theta_table[i, j])])
    with (out_dir / "oracle_unit_means.csv").open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["i", "theta_bar", "phi_bar_observed", "phi_bar_unobserved"])
        for i in range(n_units):
            writer.writerow(
                [
                    i + 1,
                    fmt(report.theta_bar_table[i]),
                    fmt(report.phi_bar_observed[i]),
                    fmt(report.phi_bar_unobserved[i]),
                ]
            )


def write_manifest(out_dir, command: str, config_values: dict, master_seed=None) -> None:
    """Machine-readable record of what produced the outputs in a directory."""
    payload = {
        "command": command,
        "config": dict(sorted(config_values.items())),
        "master_seed": master_seed,
        "version": __version__,
    }
    path = Path(out_dir) / "manifest.json"
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
