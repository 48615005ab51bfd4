"""
Command-line entry point: `seal run | sweep | verify | replay`.

Exit codes: 0 success, 1 property violation, 2 usage or configuration error.
"""

import json
import logging
import sys
from pathlib import Path
from typing import Optional

import click
from pydantic import ValidationError

from app.config import configure_logging, load_config
from app.errors import ConfigError, ParameterError, ReportFormatError, TraceFormatError
from app.models import Scheme
from app.services.exchange import AdversaryScript
from app.services.experiments import axis_values, run_scenario, run_sweep, write_locations_csv
from app.services.mobility import load_trace
from app.services.property_suites import SUITES, run_suite
from app.services.report_store import load_report, summarize, write_report_jsonl

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2


def _usage_error(message: str) -> None:
    click.echo(f"Error: {message}", err=True)
    sys.exit(EXIT_USAGE)


def _parse_schemes(text: str):
    try:
        return [Scheme(part.strip().upper()) for part in text.split(",") if part.strip()]
    except ValueError:
        _usage_error(f"unknown scheme in {text!r}; expected any of {', '.join(s.value for s in Scheme)}")


def _parse_seeds(text: str):
    """`3` means seeds 0..2; `1,5,9` lists them."""
    try:
        parts = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        _usage_error(f"invalid seeds {text!r}")
    if len(parts) == 1:
        if parts[0] < 1:
            _usage_error("seed count must be at least 1")
        return list(range(parts[0]))
    if any(p < 0 for p in parts):
        _usage_error("seeds must be non-negative")
    return parts


@click.group()
@click.option("--log-level", default=None, help="Overrides SEAL_LOG_LEVEL")
def cli(log_level: Optional[str]):
    """SEAL: auction-based UAV task offloading with fair exchange."""
    configure_logging(log_level)


@cli.command()
@click.option("--config", "config_path", type=click.Path(path_type=Path), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=Path("out"), show_default=True)
@click.option("--locations", type=int, default=None, help="Overrides the number of sensing locations")
@click.option("--no-protocol", is_flag=True, help="Skip the exchange simulation")
@click.option("--trace", "trace_path", type=click.Path(path_type=Path), default=None, help="Mobility trace CSV")
@click.option("--adversary", default=None, help="honest | bidder_aborts:ids | uav_refuses_paywords:l | wrong_key:ids | replay:id")
@click.option("--progress/--no-progress", default=False)
def run(config_path, seed, out_dir, locations, no_protocol, trace_path, adversary, progress):
    """Evaluate SEAL at every sensing location; writes locations.csv and report.jsonl."""
    try:
        config = load_config(
            config_path,
            seed=seed,
            locations=locations,
            run_protocol=False if no_protocol else None,
            adversary=adversary,
            trace_path=trace_path,
        )
        AdversaryScript.parse(config.adversary)
        config.protocol_settings()
        trace = None
        if config.trace_path is not None:
            trace = load_trace(config.trace_path, config.coverage_radius_m, config.link_rate_bps)
    except ConfigError as e:
        _usage_error(f"{e} (fields: {', '.join(e.field_paths)})")
    except (ParameterError, TraceFormatError, FileNotFoundError, ValidationError) as e:
        _usage_error(str(e))

    reports = run_scenario(config, trace, progress=progress)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_locations_csv(reports, out_dir / "locations.csv")
    write_report_jsonl(reports, out_dir / "report.jsonl")
    click.echo(f"Wrote {len(reports)} locations to {out_dir}")
    sys.exit(EXIT_OK)


@cli.command()
@click.option("--axis", required=True, type=click.Choice(["density", "tasks", "locations", "bidders"]))
@click.option("--from", "start", required=True, type=float)
@click.option("--to", "stop", required=True, type=float)
@click.option("--step", default=1.0, type=float, show_default=True)
@click.option("--schemes", default="SEAL", show_default=True, help="Comma-separated, e.g. SEAL,EAA,CLOUD")
@click.option("--seeds", default="1", show_default=True, help="A count (0..n-1) or a comma-separated list")
@click.option("--config", "config_path", type=click.Path(path_type=Path), default=None)
@click.option("--out", "out_path", type=click.Path(path_type=Path), default=Path("out/sweep.csv"), show_default=True)
@click.option("--workers", default=1, type=int, show_default=True)
@click.option("--locations", type=int, default=None)
@click.option("--progress/--no-progress", default=False)
def sweep(axis, start, stop, step, schemes, seeds, config_path, out_path, workers, locations, progress):
    """Vary one axis and evaluate the schemes; writes a long-format CSV."""
    scheme_list = _parse_schemes(schemes)
    seed_list = _parse_seeds(seeds)
    try:
        config = load_config(config_path)
        values = axis_values(axis, start, stop, step)
        frame = run_sweep(config, axis, values, scheme_list, seed_list, workers=workers,
                          locations=locations, progress=progress)
    except ConfigError as e:
        _usage_error(f"{e} (fields: {', '.join(e.field_paths)})")
    except (ParameterError, ValidationError) as e:
        _usage_error(str(e))

    out_path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(out_path, index=False)
    click.echo(f"Wrote {len(frame)} rows to {out_path}")
    sys.exit(EXIT_OK)


@cli.command()
@click.option("--suite", required=True, help=f"One of: {', '.join(sorted(SUITES))}")
@click.option("--trials", default=100, type=int, show_default=True)
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--config", "config_path", type=click.Path(path_type=Path), default=None)
@click.option("--out", "out_path", type=click.Path(path_type=Path), default=None,
              help="Counterexamples JSONL")
def verify(suite, trials, seed, config_path, out_path):
    """Run a property suite; exits 1 when any check fails."""
    if suite not in SUITES:
        _usage_error(f"unknown suite {suite!r}; expected one of {', '.join(sorted(SUITES))}")
    if trials < 1:
        _usage_error("--trials must be at least 1")
    try:
        config = load_config(config_path, run_protocol=False)
    except ConfigError as e:
        _usage_error(f"{e} (fields: {', '.join(e.field_paths)})")

    result = run_suite(suite, trials, seed, config)
    if out_path is not None:
        out_path.parent.mkdir(parents=True, exist_ok=True)
        with open(out_path, "w", encoding="utf-8") as f:
            for counterexample in result.counterexamples:
                f.write(json.dumps(counterexample, default=str) + "\n")
    status = "PASS" if result.passed else "FAIL"
    click.echo(f"{suite}: {status} ({result.checks} checks, {result.violations} violations)")
    for key, value in sorted(result.details.items()):
        click.echo(f"  {key}: {value:g}")
    sys.exit(EXIT_OK if result.passed else EXIT_VIOLATION)


@cli.command()
@click.argument("report_path", type=click.Path(path_type=Path))
def replay(report_path):
    """Load and schema-validate a report.jsonl, then print its totals."""
    if not report_path.is_file():
        _usage_error(f"report not found: {report_path}")
    try:
        reports = load_report(report_path)
    except ReportFormatError as e:
        _usage_error(str(e))
    for key, value in summarize(reports).items():
        click.echo(f"{key}: {value}")
    sys.exit(EXIT_OK)


if __name__ == "__main__":
    cli()
