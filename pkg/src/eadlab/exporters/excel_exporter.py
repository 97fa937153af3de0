"""
Excel exporter for experiment reports.

One worksheet per table, styled header row, alternating row colors and a
frozen header pane.
"""

from pathlib import Path
from typing import Any, Dict, List, Optional, Union

try:
    from openpyxl import Workbook
    from openpyxl.styles import Alignment, Font, PatternFill
    from openpyxl.utils import get_column_letter
    OPENPYXL_AVAILABLE = True
except ImportError:
    OPENPYXL_AVAILABLE = False

from .base import BaseExporter, ExportError, Table

SHEET_NAME_LIMIT = 31


class ExcelExporter(BaseExporter):
    """
    Write one or more Tables to an .xlsx workbook.
    """

    suffix = ".xlsx"

    def __init__(self, config: Optional[Dict[str, Any]] = None):
        """Initialize Excel exporter with configuration."""
        super().__init__(config)

        if not OPENPYXL_AVAILABLE:
            raise ImportError(
                "openpyxl is required for Excel export. "
                "Install with: pip install openpyxl>=3.0.0"
            )

        # Default styling colors
        self.blue_argb = self.config.get('blue_color', 'FF4472C4')
        self.light_blue_argb = self.config.get('light_blue_color', 'FFCCE5FF')
        self.white_argb = 'FFFFFFFF'

    def validate_data(self, data: Any) -> bool:
        if isinstance(data, Table):
            return True
        return isinstance(data, dict) and all(isinstance(t, Table) for t in data.values())

    def export(self, data: Union[Table, Dict[str, Table]], output_path: Path, **kwargs) -> Path:
        """
        Export tables to an Excel file.

        Args:
            data: A Table, or sheet name -> Table
            output_path: Path of the .xlsx file

        Returns:
            Path to created Excel file
        """
        if not self.validate_data(data):
            raise ExportError(f"expected Table or dict of Tables, got {type(data).__name__}", output_path)
        sheets = data if isinstance(data, dict) else {data.title or "report": data}

        wb = Workbook()
        wb.remove(wb.active)
        for name, table in sheets.items():
            ws = wb.create_sheet(self._sanitize_filename(name)[:SHEET_NAME_LIMIT] or "sheet")
            self._write_table(ws, table)

        output_path = self._prepare_path(output_path)
        try:
            wb.save(output_path)
        except OSError as e:
            raise ExportError(f"write failed: {e}", output_path) from e
        return output_path

    def _write_table(self, ws, table: Table) -> None:
        header_fill = PatternFill(start_color=self.blue_argb, end_color=self.blue_argb, fill_type="solid")
        for col, header in enumerate(table.columns, 1):
            cell = ws.cell(row=1, column=col, value=header)
            cell.font = Font(bold=True, color="FFFFFF")
            cell.fill = header_fill
            cell.alignment = Alignment(horizontal="center", vertical="center")

        for row_idx, row in enumerate(table.rows, start=2):
            for col, value in enumerate(row, 1):
                ws.cell(row=row_idx, column=col, value=value)

        self._apply_row_striping(ws, list(range(1, len(table.columns) + 1)))
        ws.freeze_panes = "A2"  # Freeze header row
        self._auto_size_columns(ws, table.columns)

    def _apply_row_striping(self, ws, cols: List[int], data_start_row: int = 2):
        """
        Apply alternating row colors.

        Args:
            ws: Worksheet object
            cols: Column indices (1-based) to stripe
            data_start_row: First row of data (default 2, after header)
        """
        white_fill = PatternFill(start_color=self.white_argb, end_color=self.white_argb, fill_type="solid")
        blue_fill = PatternFill(start_color=self.light_blue_argb, end_color=self.light_blue_argb,
                                fill_type="solid")

        for row_idx in range(data_start_row, ws.max_row + 1):
            fill = white_fill if (row_idx - data_start_row) % 2 == 0 else blue_fill
            for col_idx in cols:
                ws.cell(row=row_idx, column=col_idx).fill = fill

    def _auto_size_columns(self, ws, cols: List[str], min_width: float = 10, max_width: float = 40):
        """Size columns to their longest cell, within [min_width, max_width]"""
        for col_idx, header in enumerate(cols, start=1):
            column_letter = get_column_letter(col_idx)
            max_length = len(str(header))
            for cell in ws[column_letter]:
                if cell.value is not None:
                    max_length = max(max_length, len(str(cell.value)))
            ws.column_dimensions[column_letter].width = min(max(max_length + 2, min_width), max_width)
