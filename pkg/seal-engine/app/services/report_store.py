"""
JSONL persistence of per-location reports.
Writes one LocationReport per line and replays a file back into models,
validating every line against the report schema.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List

from pydantic import ValidationError

from app.errors import ReportFormatError
from app.models import LocationReport, Verdict
from app.services.schema_validator import schema_validator

logger = logging.getLogger(__name__)


def report_line(report: LocationReport) -> str:
    return json.dumps(report.model_dump(mode="json"), separators=(",", ":"))


def write_report_jsonl(reports: Iterable[LocationReport], path: Path) -> int:
    """Write reports as JSONL; returns the number of lines written."""
    count = 0
    with open(path, "w", encoding="utf-8") as f:
        for report in reports:
            f.write(report_line(report) + "\n")
            count += 1
    logger.info(f"Wrote {count} location reports to {path}")
    return count


def load_report(path: Path) -> List[LocationReport]:
    """
    Replay a report file.

    Raises ReportFormatError naming the first line that is not valid JSON,
    does not match the schema, or fails model validation.
    """
    reports = []
    with open(path, "r", encoding="utf-8") as f:
        for number, raw in enumerate(f, start=1):
            if not raw.strip():
                continue
            try:
                data = json.loads(raw)
            except json.JSONDecodeError as e:
                raise ReportFormatError(f"invalid JSON: {e}", number) from e
            is_valid, error = schema_validator.validate_json(data)
            if not is_valid:
                raise ReportFormatError(error, number)
            try:
                reports.append(LocationReport.model_validate(data))
            except ValidationError as e:
                raise ReportFormatError(str(e), number) from e
    logger.info(f"Loaded {len(reports)} location reports from {path}")
    return reports


def summarize(reports: List[LocationReport]) -> Dict[str, Any]:
    """Totals printed by `seal replay`."""
    summary: Dict[str, Any] = {
        "locations": len(reports),
        "tasks": sum(r.metrics.tasks for r in reports),
        "vehicle_tasks": sum(r.metrics.vehicle_tasks for r in reports),
        "cloud_tasks": sum(r.metrics.cloud_tasks for r in reports),
        "uav_cost": sum(r.metrics.uav_cost for r in reports),
        "energy_j": sum(r.metrics.energy_j for r in reports),
        "total_payment": sum(r.metrics.total_payment for r in reports),
    }
    protocols = [r.protocol for r in reports if r.protocol is not None]
    summary["protocol_rounds"] = len(protocols)
    summary["aborted_rounds"] = sum(1 for p in protocols if p.aborted)
    for verdict in Verdict:
        summary[f"verdict_{verdict.value}"] = sum(
            1 for p in protocols for v in p.verdicts if v.verdict == verdict
        )
    summary["conservation_ok"] = all(p.conservation_ok for p in protocols)
    return summary
