"""
Base exporter interface for eadlab report and trajectory files.
"""

import math
import re
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import pandas as pd

from ..errors import EadlabError


class ExportError(EadlabError):
    """Raised when export operation fails"""

    def __init__(self, message: str, path: Optional[Path] = None):
        self.path = path
        if path is not None:
            message = f"{path}: {message}"
        super().__init__(message)


@dataclass
class Table:
    """
    Column-ordered table handed to exporters.

    Cells are Python scalars; None marks an undefined statistic.
    """
    columns: List[str]
    rows: List[List[Any]] = field(default_factory=list)
    title: str = ""

    @classmethod
    def from_records(cls, columns: Sequence[str], records: Iterable[Dict[str, Any]], title: str = "") -> "Table":
        return cls(list(columns), [[record.get(name) for name in columns] for record in records], title)

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, title: str = "") -> "Table":
        """Convert a DataFrame; NaN and pandas NA become None"""
        rows = []
        for values in frame.itertuples(index=False, name=None):
            rows.append([_scalar(value) for value in values])
        return cls([str(c) for c in frame.columns], rows, title)

    def column(self, name: str) -> List[Any]:
        index = self.columns.index(name)
        return [row[index] for row in self.rows]

    def __len__(self) -> int:
        return len(self.rows)


def _scalar(value: Any) -> Any:
    if value is None or value is pd.NA:
        return None
    if hasattr(value, "item"):
        value = value.item()
    if isinstance(value, float) and math.isnan(value):
        return None
    return value


class BaseExporter(ABC):
    """
    Abstract base class for all exporters.

    Provides common functionality and defines the interface
    that all exporters must implement.
    """

    suffix = ""

    def __init__(self, config: Optional[Dict[str, Any]] = None):
        """
        Initialize exporter with optional configuration.

        Args:
            config: Optional configuration dictionary
        """
        self.config = config or {}

    @abstractmethod
    def export(self, data: Any, output_path: Path, **kwargs) -> Path:
        """
        Export data to specified output path.

        Args:
            data: Data to export (format depends on exporter)
            output_path: Path where output should be written
            **kwargs: Additional exporter-specific options

        Returns:
            Path to exported file

        Raises:
            ExportError: If export fails
        """
        pass

    def validate_data(self, data: Any) -> bool:
        """Check that data is in the format this exporter writes"""
        return isinstance(data, Table)

    def _sanitize_filename(self, name: str) -> str:
        """Replace characters that are unsafe in file names"""
        return re.sub(r'[^A-Za-z0-9_.\-]+', '_', name.strip())

    def _prepare_path(self, output_path: Path) -> Path:
        """Create the parent directory; errors carry the path"""
        output_path = Path(output_path)
        try:
            output_path.parent.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise ExportError(f"cannot create directory: {e}", output_path) from e
        return output_path

    def _write_text(self, output_path: Path, text: str) -> Path:
        output_path = self._prepare_path(output_path)
        try:
            # newline='' keeps the bytes identical across platforms
            with open(output_path, "w", encoding="utf-8", newline="") as handle:
                handle.write(text)
        except OSError as e:
            raise ExportError(f"write failed: {e}", output_path) from e
        return output_path
