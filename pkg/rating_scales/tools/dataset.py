"""Counterpart populations: synthetic generation, fixtures, and CSV persistence."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Iterable, Optional

import numpy as np
import pandas as pd

from rating_scales.config import DEFAULT_LOGISTIC_STEEPNESS
from rating_scales.errors import DatasetFormatError
from rating_scales.models import Dataset

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["index", "score", "default"]


def _rank_weights(n: int, steepness: float) -> np.ndarray:
    """Logistic default propensity in rank; higher index means riskier."""
    rank = (np.arange(n) + 0.5) / n
    w = 1.0 / (1.0 + np.exp(-steepness * (rank - 0.5)))
    return w / w.sum()


def generate(
    n: int,
    default_fraction: float,
    seed: int,
    with_scores: bool = False,
    steepness: float = DEFAULT_LOGISTIC_STEEPNESS,
) -> Dataset:
    """Draw a synthetic population with round(n * default_fraction) tail-heavy defaults.

    Args:
        n: Number of counterparts (>= 2).
        default_fraction: Target default share, strictly between 0 and 1.
        seed: Seed for numpy's default_rng; same seed gives the same Dataset.
        with_scores: Also attach sorted synthetic scores.
        steepness: Logistic slope over the rank in [0, 1].

    Returns:
        Dataset with defaults sampled without replacement by rank weight.
    """
    if n < 2:
        raise DatasetFormatError(f"n must be >= 2, got {n}")
    if not 0.0 < default_fraction < 1.0:
        raise DatasetFormatError(f"default_fraction must lie in (0, 1), got {default_fraction}")
    d = int(round(n * default_fraction))
    if d <= 0 or d >= n:
        raise DatasetFormatError(
            f"default_fraction={default_fraction} gives {d} defaults out of {n}; need 1 <= d <= n-1"
        )

    rng = np.random.default_rng(seed)
    picked = rng.choice(n, size=d, replace=False, p=_rank_weights(n, steepness))
    defaults = np.zeros(n, dtype=int)
    defaults[picked] = 1

    scores: Optional[tuple] = None
    if with_scores:
        scores = tuple(float(s) for s in np.sort(rng.normal(size=n)))

    logger.debug("generated n=%d d=%d seed=%d", n, d, seed)
    return Dataset(n=n, defaults=tuple(int(v) for v in defaults), scores=scores)


def from_default_positions(n: int, positions: Iterable[int]) -> Dataset:
    """Build a Dataset whose 1-based ``positions`` are the defaulted counterparts."""
    positions = list(positions)
    if len(set(positions)) != len(positions):
        raise DatasetFormatError(f"duplicate default positions in {sorted(positions)}")
    bad = [p for p in positions if not 1 <= p <= n]
    if bad:
        raise DatasetFormatError(f"default positions {bad} out of range [1, {n}]")
    defaults = [0] * n
    for p in positions:
        defaults[p - 1] = 1
    return Dataset(n=n, defaults=tuple(defaults))


def save(ds: Dataset, path: str | Path) -> Path:
    """Write ``index,score,default`` CSV; the score column is omitted when absent."""
    path = Path(path)
    frame = pd.DataFrame({"index": range(1, ds.n + 1)})
    if ds.scores is not None:
        frame["score"] = list(ds.scores)
    frame["default"] = list(ds.defaults)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False)
    return path


def load(path: str | Path) -> Dataset:
    """Read a Dataset CSV written by :func:`save` (or by hand in the same format)."""
    path = Path(path)
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise DatasetFormatError(f"{path}: malformed CSV ({exc})") from exc

    missing = {"index", "default"} - set(frame.columns)
    if missing:
        raise DatasetFormatError(f"{path}: missing column(s) {sorted(missing)}")
    extra = set(frame.columns) - set(CSV_COLUMNS)
    if extra:
        raise DatasetFormatError(f"{path}: unexpected column(s) {sorted(extra)}")
    if frame.empty:
        raise DatasetFormatError(f"{path}: no rows")

    n = len(frame)
    if frame["index"].isna().any() or list(frame["index"]) != list(range(1, n + 1)):
        raise DatasetFormatError(f"{path}: index column must be 1..{n} ascending")

    col = frame["default"]
    if col.isna().any() or not col.isin([0, 1]).all():
        bad = sorted(set(col[~col.isin([0, 1])].tolist()))
        raise DatasetFormatError(f"{path}: default column must be 0/1, found {bad}")

    scores = None
    if "score" in frame.columns:
        s = frame["score"]
        if s.isna().any():
            raise DatasetFormatError(f"{path}: empty score cells")
        if not s.is_monotonic_increasing:
            raise DatasetFormatError(f"{path}: scores must be non-decreasing (ordered by risk)")
        scores = tuple(float(v) for v in s)

    return Dataset(n=n, defaults=tuple(int(v) for v in col), scores=scores)
