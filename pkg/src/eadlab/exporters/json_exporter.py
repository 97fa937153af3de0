"""
JSON exporter: strict JSON (no NaN or Infinity), keys in model order.
"""

import json
from pathlib import Path
from typing import Any

from pydantic import BaseModel

from .base import BaseExporter, ExportError, Table


def table_to_dict(table: Table) -> dict:
    return {"title": table.title, "columns": table.columns, "rows": table.rows}


class JsonExporter(BaseExporter):
    """Write a pydantic model, a Table or plain JSON data"""

    suffix = ".json"

    def validate_data(self, data: Any) -> bool:
        return isinstance(data, (Table, BaseModel, dict, list))

    def export(self, data: Any, output_path: Path, **kwargs) -> Path:
        if not self.validate_data(data):
            raise ExportError(f"cannot serialise {type(data).__name__} as JSON", output_path)
        if isinstance(data, Table):
            data = table_to_dict(data)
        elif isinstance(data, BaseModel):
            data = data.model_dump(mode='json')
        try:
            text = json.dumps(data, indent=self.config.get("indent", 2), allow_nan=False)
        except (TypeError, ValueError) as e:
            raise ExportError(f"not representable as strict JSON: {e}", output_path) from e
        return self._write_text(output_path, text + "\n")
