"""
Shared fixtures for the eadlab test suite.
"""

import json
from pathlib import Path

import numpy as np
import pytest

from eadlab.schemas import ModelSpec

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def linear_birth_document() -> dict:
    """b = 1 + x/2, d = 1/2, c = 1, m = 1 on [0, 1]; zbar(x) = (1 + x)/2, d1f = 1/2"""
    return {
        "space": {"lo": 0.0, "hi": 1.0},
        "rates": {"b": "1 + 0.5*x", "d": "0.5", "c": "1", "m": "1"},
        "kernel": {"A": 1, "weights": [0.5, 0.0, 0.5]},
        "x0": 0.0,
        "scaling": {"K": 1000, "u": 1e-05, "sigma": 0.1, "alpha": 0.2},
    }


@pytest.fixture
def linear_birth_doc():
    return linear_birth_document()


@pytest.fixture
def linear_birth_spec():
    """Directional selection towards larger traits"""
    return ModelSpec.model_validate(linear_birth_document())


@pytest.fixture
def coexistence_spec():
    """Flat fitness landscape where any two distinct traits coexist"""
    return ModelSpec.model_validate({
        "space": {"lo": 0.0, "hi": 1.0},
        "rates": {"b": "2", "d": "1", "c": "1 - 0.5*(x-y)^2", "m": "1"},
        "kernel": {"A": 1, "weights": [0.5, 0.0, 0.5]},
        "x0": 0.5,
        "scaling": {"K": 1000, "u": 1e-05, "sigma": 0.1, "alpha": 0.2},
    })


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def write_config(tmp_path):
    """Write a configuration document to tmp_path and return its path"""
    def _write(document: dict, name: str = "config.json") -> Path:
        path = tmp_path / name
        path.write_text(json.dumps(document), encoding="utf-8")
        return path
    return _write
