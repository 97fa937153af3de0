"""
Utility functions for the eadlab package
"""
import math
from pathlib import Path
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np


def format_number(value: Optional[float]) -> str:
    """Shortest round-trip text of a float (at most 17 significant digits)"""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def validate_svg_file(file_path: Union[str, Path]) -> bool:
    """Validate that a file is well-formed XML with an <svg> root"""
    from lxml import etree  # pylint: disable=import-outside-toplevel
    try:
        root = etree.parse(str(file_path)).getroot()
    except (etree.XMLSyntaxError, OSError):
        return False
    return etree.QName(root).localname == "svg"


def replicate_rng(master_seed: int, schedule_index: int, replicate_index: int) -> np.random.Generator:
    """
    Independent random stream for one replicate.

    The stream depends only on (master_seed, schedule_index, replicate_index),
    so results do not depend on how replicates are scheduled on workers.
    """
    sequence = np.random.SeedSequence([int(master_seed), int(schedule_index), int(replicate_index)])
    return np.random.Generator(np.random.PCG64(sequence))


def mean_sd_se(values: Sequence[float]) -> Tuple[Optional[float], Optional[float], Optional[float]]:
    """Sample mean, standard deviation (ddof=1) and standard error; None where undefined"""
    data = np.asarray(values, dtype=np.float64)
    if data.size == 0:
        return None, None, None
    mean = float(data.mean())
    if data.size == 1:
        return mean, 0.0, 0.0
    sd = float(data.std(ddof=1))
    return mean, sd, sd / math.sqrt(data.size)


def strictly_decreasing(values: Iterable[Optional[float]]) -> bool:
    """True iff every value is defined and each is below its predecessor"""
    values = list(values)
    if any(v is None for v in values):
        return False
    return all(b < a for a, b in zip(values, values[1:]))


def binomial_se(successes: int, trials: int) -> float:
    """Standard error of an empirical proportion"""
    if trials <= 0:
        return 0.0
    p = successes / trials
    return math.sqrt(p * (1.0 - p) / trials)


def z_score(estimate: float, target: float, se: float) -> Optional[float]:
    """(estimate - target) / se, None when se is zero"""
    if se <= 0.0:
        return None
    return (estimate - target) / se


def within_se(estimate: float, target: float, se: float, n_se: float = 3.0, floor: float = 0.0) -> bool:
    """
    |estimate - target| <= n_se * se, with an absolute floor for degenerate standard errors.
    """
    return abs(estimate - target) <= n_se * se + floor
