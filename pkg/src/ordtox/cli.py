"""Command-line front door: validate, fit, predict, and serve.

Exit codes are a stable contract: 0 success, 1 I/O failure, 2 invalid input
(data violations, config or flag errors), 3 infeasible data.  All artifact
files are plain comma-separated text re-readable by the package loaders, and
a repeated seed reproduces samples.csv byte for byte.
"""

from __future__ import annotations

import functools
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import click

from . import __version__
from .data import (
    bundled_dataset_path,
    load_config,
    load_trial,
    read_ledger_rows,
    validate as validate_rows,
)
from .diagnostics import SummaryRow, kde_density, summarize
from .model import InfeasibleDataError, TrialDataset
from .predictive import DoseCandidate, DoseDecisionReport, dose_decision_report
from .sampler import PosteriorSamples, run_chains

EXIT_OK = 0
EXIT_IO = 1
EXIT_INVALID = 2
EXIT_INFEASIBLE = 3

_SUMMARY_COLUMNS = (
    "parameter",
    "lower95",
    "median",
    "upper95",
    "mean",
    "sseff",
    "psrf",
    "mcse",
    "central_lower95",
    "central_upper95",
)


def _fail(code: int, message: str):
    click.echo(message, err=True)
    sys.exit(code)


def _guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except InfeasibleDataError as err:
            _fail(EXIT_INFEASIBLE, f"infeasible data: {err}")
        except OSError as err:
            _fail(EXIT_IO, f"cannot read or write: {err}")
        except ValueError as err:
            _fail(EXIT_INVALID, f"invalid input: {err}")

    return wrapper


def _ledger_source(data_path: Path | None):
    return data_path if data_path is not None else bundled_dataset_path()


def _load_run_inputs(data_path, config_path, seed):
    data = load_trial(_ledger_source(data_path))
    priors, config = load_config(config_path)
    if seed is not None:
        config = replace(config, seed=seed)
    return data, priors, config


def _write_samples_csv(path: Path, samples: PosteriorSamples) -> None:
    config = samples.config
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("chain,iteration,parameter,value\n")
        for chain in range(config.chains):
            for kept in range(config.retained_per_chain):
                iteration = config.burnin_iters + (kept + 1) * config.thin
                prefix = f"{chain + 1},{iteration},"
                for name in samples.parameters:
                    value = float(samples.draws[name][chain, kept])
                    fh.write(f"{prefix}{name},{value!r}\n")


def _summary_line(row: SummaryRow) -> str:
    return ",".join(
        [row.parameter]
        + [repr(float(getattr(row, column))) for column in _SUMMARY_COLUMNS[1:]]
    )


def _write_summary_csv(path: Path, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(_SUMMARY_COLUMNS) + "\n")
        for row in rows:
            fh.write(_summary_line(row) + "\n")


def _write_densities_csv(path: Path, samples: PosteriorSamples) -> None:
    curves = [(kde_density(samples, f"mtd[{v.label}]"), "0") for v in samples.nodes]
    seen = set()
    for node in samples.nodes:
        if node.pool_key in seen:
            continue
        seen.add(node.pool_key)
        curve = kde_density(samples, f"mtd[{node.label}]", pooled=True)
        if len(curve.members) > 1:
            curves.append((curve, "1"))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("parameter,pooled,members,log_dose,density\n")
        for curve, pooled in curves:
            members = "+".join(curve.members) if curve.members else curve.parameter[4:-1]
            for x, y in zip(curve.grid, curve.density):
                fh.write(f"{curve.parameter},{pooled},{members},{float(x)!r},{float(y)!r}\n")


def _write_diagnostics_txt(path: Path, samples: PosteriorSamples, rows) -> None:
    config = samples.config
    lines = [
        f"chains {config.chains}, adapt {config.adapt_iters}, burn-in "
        f"{config.burnin_iters}, retained {config.retained_per_chain} x thin "
        f"{config.thin}, seed {config.seed}",
        f"runtime {samples.runtime_seconds:.1f}s",
        "",
        f"{'parameter':<14} {'psrf':>8} {'sseff':>9}",
    ]
    for row in rows:
        lines.append(f"{row.parameter:<14} {row.psrf:>8.4f} {row.sseff:>9.1f}")
    worst = max(row.psrf for row in rows)
    least = min(row.sseff for row in rows)
    lines += [
        "",
        f"worst psrf {worst:.4f} (converged when <= 1.05)",
        f"smallest sseff {least:.1f}",
    ]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_dose_spec(spec: str) -> DoseCandidate:
    parts = spec.strip().split(":")
    try:
        if len(parts) == 1:
            return DoseCandidate(float(parts[0]))
        if len(parts) == 2:
            return DoseCandidate(float(parts[1]), okdose=float(parts[0]))
    except ValueError as err:
        raise ValueError(f"bad dose spec {spec!r}: {err}") from None
    raise ValueError(f"bad dose spec {spec!r}: use DOSE or OKDOSE:DOSE")


def _write_prediction_csv(path: Path, report: DoseDecisionReport) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("dose,grade,probability,mcse\n")
        for row in report.rows:
            for grade in range(6):
                fh.write(
                    f"{row.dose!r},{grade},{float(row.grades.probs[grade])!r},"
                    f"{float(row.grades.mcse[grade])!r}\n"
                )


@click.group()
@click.version_option(__version__)
def main() -> None:
    """Dose-toxicity inference and dose-decision support."""


@main.command("validate")
@click.option(
    "--data",
    "data_path",
    type=click.Path(path_type=Path),
    default=None,
    help="Ledger CSV to check (default: the bundled AFM11 trial).",
)
@_guarded
def cmd_validate(data_path: Path | None) -> None:
    """Check a patient ledger and print every invariant violation."""
    rows = read_ledger_rows(_ledger_source(data_path))
    violations = validate_rows(rows)
    for violation in violations:
        click.echo(violation)
    if violations:
        sys.exit(EXIT_INVALID)
    click.echo(f"{len(rows)} patients, no violations")


@main.command("fit")
@click.option(
    "--data",
    "data_path",
    type=click.Path(path_type=Path),
    default=None,
    help="Ledger CSV (default: the bundled AFM11 trial).",
)
@click.option(
    "--config",
    "config_path",
    type=click.Path(path_type=Path),
    default=None,
    help="JSON config; omitted keys use the package defaults.",
)
@click.option("--seed", type=int, default=None, help="Override the RNG seed.")
@click.option(
    "--out",
    "out_dir",
    type=click.Path(path_type=Path),
    required=True,
    help="Output directory (created if absent).",
)
@_guarded
def cmd_fit(data_path, config_path, seed, out_dir: Path) -> None:
    """Fit the model and write samples, summaries, densities, diagnostics."""
    data, priors, config = _load_run_inputs(data_path, config_path, seed)
    samples = run_chains(data, priors, config)
    rows = summarize(samples)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_samples_csv(out_dir / "samples.csv", samples)
    _write_summary_csv(out_dir / "summary.csv", rows)
    _write_densities_csv(out_dir / "densities.csv", samples)
    _write_diagnostics_txt(out_dir / "diagnostics.txt", samples, rows)
    click.echo(
        f"fit of {len(data)} patients done in {samples.runtime_seconds:.1f}s; "
        f"wrote samples.csv, summary.csv, densities.csv, diagnostics.txt to {out_dir}"
    )


@main.command("predict")
@click.option(
    "--data",
    "data_path",
    type=click.Path(path_type=Path),
    default=None,
    help="Ledger CSV (default: the bundled AFM11 trial).",
)
@click.option(
    "--drop-cohort",
    "drop_cohorts",
    multiple=True,
    help="Cohort label to exclude before fitting (repeatable).",
)
@click.option(
    "--scenario",
    "scenario_path",
    type=click.Path(path_type=Path),
    default=None,
    help="JSON scenario file with drop_cohorts and doses.",
)
@click.option(
    "--doses",
    "doses_text",
    default=None,
    help="Comma-separated candidates, each DOSE or OKDOSE:DOSE.",
)
@click.option(
    "--config",
    "config_path",
    type=click.Path(path_type=Path),
    default=None,
    help="JSON config; omitted keys use the package defaults.",
)
@click.option("--seed", type=int, default=None, help="Override the RNG seed.")
@click.option(
    "--out",
    "out_dir",
    type=click.Path(path_type=Path),
    required=True,
    help="Output directory (created if absent).",
)
@_guarded
def cmd_predict(
    data_path, drop_cohorts, scenario_path, doses_text, config_path, seed, out_dir: Path
) -> None:
    """Refit without chosen cohorts and forecast candidate doses."""
    if scenario_path is not None and (drop_cohorts or doses_text):
        raise click.UsageError("--scenario replaces --drop-cohort and --doses")
    if scenario_path is not None:
        payload = json.loads(Path(scenario_path).read_text(encoding="utf-8"))
        if not isinstance(payload, dict):
            raise ValueError("scenario file must hold a single object")
        unknown = set(payload) - {"drop_cohorts", "doses"}
        if unknown:
            raise ValueError(f"unknown scenario key {sorted(unknown)[0]!r}")
        drop = {str(c) for c in payload.get("drop_cohorts", [])}
        specs = [str(s) for s in payload.get("doses", [])]
    else:
        drop = set(drop_cohorts)
        specs = [s for s in (doses_text or "").split(",") if s.strip()]
    if not specs:
        raise click.UsageError("provide at least one candidate via --doses or --scenario")
    candidates = [_parse_dose_spec(s) for s in specs]
    data, priors, config = _load_run_inputs(data_path, config_path, seed)
    base = TrialDataset(tuple(p for p in data if p.cohort not in drop))
    report = dose_decision_report(base, priors, config, candidates)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_prediction_csv(out_dir / "prediction.csv", report)
    _write_summary_csv(out_dir / "restricted_summary.csv", report.summaries)
    for row in report.rows:
        conditioning = f" after no toxicity at {row.okdose:g}" if row.okdose else ""
        click.echo(
            f"dose {row.dose:g}{conditioning}: "
            f"P(grade >= 3) = {row.p_dlt:.4f} +- {row.p_dlt_mcse:.4f}, "
            f"P(grade 5) = {row.p_fatal:.4f} +- {row.p_fatal_mcse:.4f} "
            f"({row.draws} draws)"
        )
    click.echo(f"wrote prediction.csv, restricted_summary.csv to {out_dir}")


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option(
    "--data-dir",
    "data_dir",
    type=click.Path(path_type=Path),
    default=None,
    help="Directory of dataset CSVs (overrides the bundled data).",
)
@click.option(
    "--ui-dir",
    "ui_dir",
    type=click.Path(path_type=Path),
    default=None,
    help="Directory of built web UI files to host at /ui.",
)
def cmd_serve(host: str, port: int, data_dir: Path | None, ui_dir: Path | None) -> None:
    """Host the HTTP API until interrupted."""
    import uvicorn

    from .service import create_app

    if data_dir is not None:
        os.environ["ORDTOX_DATA_DIR"] = str(data_dir)
    if ui_dir is not None:
        os.environ["ORDTOX_UI_DIR"] = str(ui_dir)
    try:
        uvicorn.run(create_app(), host=host, port=port)
    except OSError as err:
        _fail(EXIT_IO, f"cannot serve on {host}:{port}: {err}")
    except SystemExit as err:  # uvicorn reports startup failure as exit 3
        if err.code:
            _fail(EXIT_IO, f"cannot serve on {host}:{port}")
        raise


if __name__ == "__main__":
    main()
