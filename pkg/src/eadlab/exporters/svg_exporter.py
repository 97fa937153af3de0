"""
SVG line charts built with lxml, no external renderer.

Output is checked by re-parsing the written file.
"""

import logging
import math
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from lxml import etree

from ..utils import validate_svg_file
from .base import BaseExporter, ExportError, Table

logger = logging.getLogger(__name__)

SVG_NS = "http://www.w3.org/2000/svg"
WIDTH, HEIGHT = 640, 400
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 70, 150, 40, 50
PALETTE = ["#4472C4", "#C0504D", "#9BBB59", "#8064A2", "#F79646", "#4BACC6"]
TICKS = 5


def _fmt(value: float) -> str:
    return f"{value:.2f}"


def _label(value: float) -> str:
    return f"{value:.4g}"


class SvgExporter(BaseExporter):
    """
    Render one or more columns of a Table against an x column.

    Keyword Args:
        x: Name of the x column
        ys: Names of the plotted columns (default: all others)
        log_x, log_y: Logarithmic axes; non-positive values are skipped
        x_label, y_label: Axis captions
    """

    suffix = ".svg"

    def export(self, data: Table, output_path: Path, x: Optional[str] = None,
               ys: Optional[Sequence[str]] = None, log_x: bool = False, log_y: bool = False,
               x_label: Optional[str] = None, y_label: str = "", **kwargs) -> Path:
        if not self.validate_data(data):
            raise ExportError(f"expected a Table, got {type(data).__name__}", output_path)
        x = x or data.columns[0]
        ys = list(ys) if ys is not None else [c for c in data.columns if c != x]
        series = [(name, self._points(data, x, name, log_x, log_y)) for name in ys]

        root = etree.Element(f"{{{SVG_NS}}}svg", nsmap={None: SVG_NS})
        root.set("width", str(WIDTH))
        root.set("height", str(HEIGHT))
        root.set("viewBox", f"0 0 {WIDTH} {HEIGHT}")
        self._text(root, WIDTH / 2, MARGIN_TOP / 2 + 5, data.title, anchor="middle", size=14)

        points = [p for _, pts in series for p in pts]
        if points:
            bounds = self._bounds(points)
            self._axes(root, bounds, log_x, log_y)
            for number, (name, pts) in enumerate(series):
                self._polyline(root, pts, bounds, PALETTE[number % len(PALETTE)])
                self._legend(root, number, name, PALETTE[number % len(PALETTE)])
        else:
            logger.warning(f"No plottable points for {output_path}")
        self._text(root, MARGIN_LEFT + (WIDTH - MARGIN_LEFT - MARGIN_RIGHT) / 2, HEIGHT - 10,
                   x_label if x_label is not None else x, anchor="middle")
        self._text(root, 15, MARGIN_TOP - 10, y_label)

        text = etree.tostring(root, xml_declaration=True, encoding="UTF-8", pretty_print=True)
        output_path = self._prepare_path(output_path)
        try:
            output_path.write_bytes(text)
        except OSError as e:
            raise ExportError(f"write failed: {e}", output_path) from e
        if not validate_svg_file(output_path):
            raise ExportError("written SVG does not re-parse", output_path)
        return output_path

    @staticmethod
    def _points(table: Table, x: str, y: str, log_x: bool, log_y: bool) -> List[Tuple[float, float]]:
        points = []
        for xv, yv in zip(table.column(x), table.column(y)):
            if xv is None or yv is None:
                continue
            xv, yv = float(xv), float(yv)
            if (log_x and xv <= 0) or (log_y and yv <= 0):
                continue
            points.append((math.log10(xv) if log_x else xv, math.log10(yv) if log_y else yv))
        return points

    @staticmethod
    def _bounds(points: List[Tuple[float, float]]) -> Tuple[float, float, float, float]:
        xs = [p[0] for p in points]
        ys = [p[1] for p in points]
        x_lo, x_hi, y_lo, y_hi = min(xs), max(xs), min(ys), max(ys)
        if x_hi == x_lo:
            x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
        if y_hi == y_lo:
            y_lo, y_hi = y_lo - 0.5, y_hi + 0.5
        return x_lo, x_hi, y_lo, y_hi

    @staticmethod
    def _map(point: Tuple[float, float], bounds) -> Tuple[float, float]:
        x_lo, x_hi, y_lo, y_hi = bounds
        plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
        plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
        px = MARGIN_LEFT + (point[0] - x_lo) / (x_hi - x_lo) * plot_w
        py = MARGIN_TOP + (y_hi - point[1]) / (y_hi - y_lo) * plot_h
        return px, py

    def _axes(self, root, bounds, log_x: bool, log_y: bool) -> None:
        x_lo, x_hi, y_lo, y_hi = bounds
        left, bottom = self._map((x_lo, y_lo), bounds)
        right, top = self._map((x_hi, y_hi), bounds)
        axis = etree.SubElement(root, f"{{{SVG_NS}}}path")
        axis.set("d", f"M{_fmt(left)},{_fmt(top)} L{_fmt(left)},{_fmt(bottom)} L{_fmt(right)},{_fmt(bottom)}")
        axis.set("stroke", "black")
        axis.set("fill", "none")
        for i in range(TICKS + 1):
            xv = x_lo + (x_hi - x_lo) * i / TICKS
            yv = y_lo + (y_hi - y_lo) * i / TICKS
            px, _ = self._map((xv, y_lo), bounds)
            _, py = self._map((x_lo, yv), bounds)
            self._text(root, px, bottom + 18, _label(10 ** xv if log_x else xv), anchor="middle", size=10)
            self._text(root, left - 6, py + 4, _label(10 ** yv if log_y else yv), anchor="end", size=10)

    def _polyline(self, root, points, bounds, color: str) -> None:
        line = etree.SubElement(root, f"{{{SVG_NS}}}polyline")
        line.set("points", " ".join(f"{_fmt(px)},{_fmt(py)}" for px, py in
                                    (self._map(p, bounds) for p in points)))
        line.set("fill", "none")
        line.set("stroke", color)
        line.set("stroke-width", "1.5")

    def _legend(self, root, number: int, name: str, color: str) -> None:
        x = WIDTH - MARGIN_RIGHT + 15
        y = MARGIN_TOP + 18 * number
        swatch = etree.SubElement(root, f"{{{SVG_NS}}}rect")
        for key, value in (("x", x), ("y", y - 8), ("width", 12), ("height", 8)):
            swatch.set(key, _fmt(value))
        swatch.set("fill", color)
        self._text(root, x + 18, y, name, size=11)

    @staticmethod
    def _text(root, x: float, y: float, content: str, anchor: str = "start", size: int = 12) -> None:
        node = etree.SubElement(root, f"{{{SVG_NS}}}text")
        node.set("x", _fmt(x))
        node.set("y", _fmt(y))
        node.set("font-size", str(size))
        node.set("font-family", "sans-serif")
        node.set("text-anchor", anchor)
        node.text = content
