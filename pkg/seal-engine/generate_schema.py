#!/usr/bin/env python3
"""
Script to generate the JSON schema of one report.jsonl line from the
LocationReport Pydantic model.
"""

import json
import os
from typing import Optional

from app.models import LocationReport


def generate_report_schema(schemas_dir: Optional[str] = None) -> str:
    """Write location_report.schema.json and return its path."""
    schema = LocationReport.model_json_schema()

    if schemas_dir is None:
        schemas_dir = os.path.join(os.path.dirname(__file__), 'schemas')
    os.makedirs(schemas_dir, exist_ok=True)

    schema_path = os.path.join(schemas_dir, 'location_report.schema.json')
    with open(schema_path, 'w', encoding='utf-8') as f:
        json.dump(schema, f, indent=2, sort_keys=True)

    print(f"Generated schema file: {schema_path}")
    return schema_path


if __name__ == "__main__":
    generate_report_schema()
