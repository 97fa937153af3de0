"""
CSV exporter: header row followed by data rows, numbers in shortest
round-trip form, empty cells for undefined statistics.
"""

import csv
import io
from pathlib import Path
from typing import Any

from ..utils import format_number
from .base import BaseExporter, ExportError, Table


def format_cell(value: Any) -> str:
    if isinstance(value, str):
        return value
    return format_number(value)


class CsvExporter(BaseExporter):
    """Write a Table as comma-separated text with '\\n' line endings"""

    suffix = ".csv"

    def export(self, data: Table, output_path: Path, **kwargs) -> Path:
        if not self.validate_data(data):
            raise ExportError(f"expected a Table, got {type(data).__name__}", output_path)
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(data.columns)
        for row in data.rows:
            writer.writerow([format_cell(value) for value in row])
        return self._write_text(output_path, buffer.getvalue())
