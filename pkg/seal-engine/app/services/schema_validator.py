"""
Schema validation for run reports.
Validates each JSONL line against the LocationReport JSON schema.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Union

from jsonschema import Draft202012Validator, ValidationError

from app.models import LocationReport

logger = logging.getLogger(__name__)

SCHEMA_PATH = Path(__file__).parent.parent.parent / "schemas" / "location_report.schema.json"


class SchemaValidator:
    """
    Service for validating report lines against the LocationReport schema.
    """

    def __init__(self, schema_path: Path = SCHEMA_PATH):
        """Initialize the schema validator with the report schema."""
        self.schema = self._load_schema(schema_path)
        self._validator = Draft202012Validator(self.schema)
        logger.debug("Schema validator initialized")

    def _load_schema(self, schema_path: Path) -> Dict[str, Any]:
        """Load the JSON schema from file."""
        try:
            with open(schema_path, "r", encoding="utf-8") as f:
                schema = json.load(f)
            logger.debug(f"Loaded schema from: {schema_path}")
            return schema
        except (OSError, json.JSONDecodeError) as e:
            logger.info(f"Schema file unavailable ({e}); using the LocationReport model schema")
            return LocationReport.model_json_schema()

    def validate_json(self, json_data: Union[str, Dict[str, Any]]) -> tuple[bool, Optional[str]]:
        """
        Validate one report line against the schema.

        Args:
            json_data: JSON string or dict to validate

        Returns:
            Tuple of (is_valid, error_message)
        """
        if isinstance(json_data, str):
            try:
                data = json.loads(json_data)
            except json.JSONDecodeError as e:
                return False, f"Invalid JSON format: {e}"
        else:
            data = json_data

        try:
            self._validator.validate(data)
            return True, None
        except ValidationError as e:
            path = ".".join(str(part) for part in e.absolute_path) or "<root>"
            error_msg = f"Schema validation failed at {path}: {e.message}"
            logger.warning(error_msg)
            return False, error_msg

    def get_schema(self) -> Dict[str, Any]:
        """Get the loaded schema."""
        return self.schema


# Global instance
schema_validator = SchemaValidator()
