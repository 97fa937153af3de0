"""
Runtime configuration and configuration-file loading.

Runtime settings come from environment variables (optionally a .env file);
the model/experiment configuration is a strict JSON document validated by
eadlab.schemas.Config.
"""

import json
import logging
import os
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError

from .errors import EadlabError
from .schemas import Config

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

logger = logging.getLogger(__name__)


class ConfigError(EadlabError):
    """Raised when a configuration document cannot be loaded"""

    def __init__(self, message: str, pointer: str = ""):
        self.pointer = pointer
        super().__init__(f"{pointer}: {message}" if pointer else message)


class RuntimeSettings(BaseModel):
    """Process-level settings that do not change the science"""

    workers: int = Field(default=1, ge=1, description="Worker processes for replicate execution")
    log_level: str = Field(default="INFO", description="Logging level name")
    log_file: Optional[str] = Field(default=None, description="Optional log file path")
    resync_every: int = Field(default=65536, ge=1, description="Events between rate cache resyncs")
    grid_points: int = Field(default=1001, ge=2, description="Validation grid size")

    @classmethod
    def from_env(cls) -> "RuntimeSettings":
        """Load settings from environment variables"""
        load_dotenv()
        return cls(
            workers=int(os.getenv("EADLAB_WORKERS", "1")),
            log_level=os.getenv("EADLAB_LOG_LEVEL", "INFO").upper(),
            log_file=os.getenv("EADLAB_LOG_FILE") or None,
            resync_every=int(os.getenv("EADLAB_RESYNC_EVERY", "65536")),
            grid_points=int(os.getenv("EADLAB_GRID_POINTS", "1001")),
        )


def configure_logging(level: Union[int, str] = "INFO", log_file: Optional[str] = None) -> logging.Logger:
    """
    Install handlers on the package logger.

    Logs go to stderr (and optionally a file) so stdout only carries
    command output.
    """
    root = logging.getLogger("eadlab")
    root.setLevel(level if isinstance(level, int) else getattr(logging, str(level).upper(), logging.INFO))
    for handler in list(root.handlers):
        root.removeHandler(handler)
        handler.close()
    formatter = logging.Formatter(LOG_FORMAT)
    stream = logging.StreamHandler()
    stream.setFormatter(formatter)
    root.addHandler(stream)
    if log_file:
        file_handler = logging.FileHandler(log_file)
        file_handler.setFormatter(formatter)
        root.addHandler(file_handler)
    root.propagate = False
    return root


def json_pointer(loc: Sequence[Union[str, int]]) -> str:
    """Convert a pydantic error location to an RFC 6901 JSON pointer"""
    parts = []
    for part in loc:
        text = str(part).replace("~", "~0").replace("/", "~1")
        parts.append(text)
    return "/" + "/".join(parts)


def first_error(error: ValidationError) -> Tuple[str, str]:
    """Pointer and message of the first validation error"""
    detail = error.errors()[0]
    # union and tagged-union branches append type names to the location
    loc = [part for part in detail["loc"] if not (isinstance(part, str) and part in _UNION_TAGS)]
    return json_pointer(loc), detail["msg"]


_UNION_TAGS = {"float", "str", "int", "ibm-cead", "tss-cead", "invasion-mc", "oracle-suite"}


def load_config(path: Union[str, Path]) -> Config:
    """
    Load and validate a JSON configuration document.

    Raises:
        ConfigError: With a JSON pointer to the offending key
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from e
    try:
        data = json.loads(text, parse_constant=_reject_constant)
    except (json.JSONDecodeError, ValueError) as e:
        raise ConfigError(f"{path} is not valid JSON: {e}") from e
    try:
        config = Config.model_validate(data)
    except ValidationError as e:
        pointer, message = first_error(e)
        raise ConfigError(message, pointer) from e
    logger.debug(f"Loaded configuration {path}")
    return config


def _reject_constant(name: str):
    raise ValueError(f"non-finite number {name} is not allowed")
