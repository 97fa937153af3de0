"""
Exporters for eadlab reports and trajectories: CSV, JSON, SVG line charts
and Excel workbooks.
"""

from .base import BaseExporter, ExportError, Table
from .csv_exporter import CsvExporter
from .excel_exporter import ExcelExporter
from .json_exporter import JsonExporter
from .svg_exporter import SvgExporter

EXPORTERS = {
    "csv": CsvExporter,
    "json": JsonExporter,
    "svg": SvgExporter,
    "xlsx": ExcelExporter,
}


def get_exporter(fmt: str, config=None) -> BaseExporter:
    """Exporter instance for a format name"""
    try:
        return EXPORTERS[fmt](config)
    except KeyError:
        raise ValueError(f"unknown output format {fmt!r}; expected one of {sorted(EXPORTERS)}") from None


__all__ = [
    'BaseExporter',
    'CsvExporter',
    'ExcelExporter',
    'ExportError',
    'JsonExporter',
    'SvgExporter',
    'Table',
    'EXPORTERS',
    'get_exporter',
]
