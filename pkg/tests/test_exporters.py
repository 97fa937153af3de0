"""
Tests for report exporters.

Run with: pytest -q tests/test_exporters.py
"""

import json

import numpy as np
import pandas as pd
import pytest
from lxml import etree

from eadlab.exporters import (
    CsvExporter,
    ExcelExporter,
    ExportError,
    JsonExporter,
    SvgExporter,
    Table,
    get_exporter,
)
from eadlab.schemas import PathPoint


@pytest.fixture
def sample_table():
    """Small path table with an undefined cell."""
    return Table(
        columns=["t", "reference", "mean"],
        rows=[[0.0, 0.0, 0.0], [0.5, 0.0645, None], [1.0, 0.1331484531, 0.13]],
        title="paths",
    )


class TestTable:
    """Test the exporter table container."""

    def test_from_frame_converts_missing(self):
        frame = pd.DataFrame({"t": [0.0, 1.0], "x": [np.nan, 2.5], "n": pd.array([1, None], dtype="Int64")})
        table = Table.from_frame(frame, title="frame")
        assert table.columns == ["t", "x", "n"]
        assert table.rows == [[0.0, None, 1], [1.0, 2.5, None]]
        assert isinstance(table.rows[0][2], int)

    def test_from_records(self):
        table = Table.from_records(["a", "b"], [{"a": 1, "b": 2}, {"a": 3}])
        assert table.rows == [[1, 2], [3, None]]
        assert table.column("a") == [1, 3]
        assert len(table) == 2


class TestCsvExporter:
    """Test CSV output."""

    def test_export(self, sample_table, tmp_path):
        path = CsvExporter().export(sample_table, tmp_path / "out" / "paths.csv")
        assert path.exists()
        lines = path.read_bytes().decode("utf-8").split("\n")
        assert lines[0] == "t,reference,mean"
        assert lines[2] == "0.5,0.0645,"
        assert lines[3] == "1.0,0.1331484531,0.13"
        assert b"\r" not in path.read_bytes()

    def test_integers_and_strings(self, tmp_path):
        table = Table(["name", "count", "ok"], [["a,b", 3, True]])
        path = CsvExporter().export(table, tmp_path / "mixed.csv")
        assert path.read_text(encoding="utf-8").splitlines()[1] == '"a,b",3,true'

    def test_deterministic_bytes(self, sample_table, tmp_path):
        first = CsvExporter().export(sample_table, tmp_path / "a.csv").read_bytes()
        second = CsvExporter().export(sample_table, tmp_path / "b.csv").read_bytes()
        assert first == second

    def test_rejects_non_table(self, tmp_path):
        with pytest.raises(ExportError) as excinfo:
            CsvExporter().export([1, 2, 3], tmp_path / "bad.csv")
        assert excinfo.value.path == tmp_path / "bad.csv"
        assert str(tmp_path / "bad.csv") in str(excinfo.value)


class TestJsonExporter:
    """Test JSON output."""

    def test_table(self, sample_table, tmp_path):
        path = JsonExporter().export(sample_table, tmp_path / "paths.json")
        data = json.loads(path.read_text(encoding="utf-8"))
        assert data["columns"] == ["t", "reference", "mean"]
        assert data["rows"][1][2] is None
        assert path.read_text(encoding="utf-8").endswith("\n")

    def test_model(self, tmp_path):
        point = PathPoint(t=0.5, reference=0.06, mean=None)
        path = JsonExporter().export(point, tmp_path / "point.json")
        assert json.loads(path.read_text(encoding="utf-8"))["reference"] == 0.06

    def test_rejects_nan(self, tmp_path):
        with pytest.raises(ExportError):
            JsonExporter().export({"value": float("nan")}, tmp_path / "nan.json")


class TestSvgExporter:
    """Test SVG chart output."""

    def test_export_reparses(self, sample_table, tmp_path):
        path = SvgExporter().export(sample_table, tmp_path / "paths.svg", x="t", y_label="trait")
        root = etree.parse(str(path)).getroot()
        assert etree.QName(root).localname == "svg"
        polylines = root.findall("{http://www.w3.org/2000/svg}polyline")
        assert len(polylines) == 2
        # the undefined cell is skipped
        assert len(polylines[1].get("points").split()) == 2

    def test_log_axes_skip_nonpositive(self, tmp_path):
        table = Table(["K", "distance"], [[100, 0.5], [1000, 0.2], [10000, 0.0]], title="trend")
        path = SvgExporter().export(table, tmp_path / "trend.svg", x="K", log_x=True, log_y=True)
        root = etree.parse(str(path)).getroot()
        line = root.find("{http://www.w3.org/2000/svg}polyline")
        assert len(line.get("points").split()) == 2

    def test_empty_table(self, tmp_path):
        path = SvgExporter().export(Table(["t", "x"], []), tmp_path / "empty.svg")
        assert path.exists()


class TestExcelExporter:
    """Test Excel workbook output."""

    def test_single_sheet(self, sample_table, tmp_path):
        from openpyxl import load_workbook
        path = ExcelExporter().export(sample_table, tmp_path / "paths.xlsx")
        assert path.suffix == ".xlsx"
        wb = load_workbook(path)
        ws = wb["paths"]
        assert [c.value for c in ws[1]] == ["t", "reference", "mean"]
        assert ws.freeze_panes == "A2"
        assert ws.cell(row=3, column=3).value is None
        assert ws.cell(row=1, column=1).font.bold

    def test_multiple_sheets(self, sample_table, tmp_path):
        from openpyxl import load_workbook
        other = Table(["index", "K"], [[0, 200], [1, 500]])
        path = ExcelExporter().export({"summary": other, "paths/0": sample_table}, tmp_path / "r.xlsx")
        wb = load_workbook(path)
        assert wb.sheetnames == ["summary", "paths_0"]
        assert wb["summary"].cell(row=3, column=2).value == 500

    def test_validate_data(self, sample_table):
        exporter = ExcelExporter()
        assert exporter.validate_data(sample_table)
        assert exporter.validate_data({"a": sample_table})
        assert not exporter.validate_data({"a": [1]})


class TestRegistry:
    """Test exporter lookup by format name."""

    def test_get_exporter(self):
        assert isinstance(get_exporter("csv"), CsvExporter)
        assert isinstance(get_exporter("svg"), SvgExporter)
        assert get_exporter("json", {"indent": 4}).config == {"indent": 4}

    def test_unknown_format(self):
        with pytest.raises(ValueError):
            get_exporter("pdf")
