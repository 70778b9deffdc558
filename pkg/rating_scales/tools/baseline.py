"""Constrained brute-force search over all rating scales, with timing and power-law fit."""

from __future__ import annotations

import itertools
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from rating_scales.config import default_thresholds
from rating_scales.errors import RatingScaleError
from rating_scales.models import BenchmarkRow, Dataset, GradeStats, Partition, ValidationConfig
from rating_scales.tools.scale import t_test_heterogeneity, z_test_homogeneity

logger = logging.getLogger(__name__)

BENCHMARK_COLUMNS = ["n", "m", "configurations", "valid_count", "elapsed_seconds"]

# (n, m, mean seconds) of the published constrained-search benchmark
PUBLISHED_TIMINGS: List[Tuple[int, int, float]] = [
    (8, 3, 0.001989),
    (12, 3, 0.009527),
    (14, 4, 0.080983),
    (17, 4, 0.225437),
    (20, 5, 2.872898),
    (25, 5, 11.909233),
    (32, 5, 55.039188),
    (40, 6, 1792.051127),
    (48, 6, 6691.606785),
    (52, 6, 13166.657564),
    (60, 6, 33767.710212),
    (70, 6, 103726.824730),
]


def _check_range(n: int, m: int) -> None:
    if not 2 <= m <= n:
        raise RatingScaleError(f"need 2 <= m <= n, got n={n}, m={m}")


def count_configurations(n: int, m: int) -> int:
    """Number of rating scales: compositions of n into m positive parts, C(n-1, m-1)."""
    _check_range(n, m)
    return math.comb(n - 1, m - 1)


def _compositions(n: int, m: int, first: Optional[int] = None) -> Iterator[Tuple[int, ...]]:
    cut_range = range(1, n) if first is None else range(first + 1, n)
    head = () if first is None else (first,)
    for cuts in itertools.combinations(cut_range, m - 1 - len(head)):
        bounds = (0,) + head + cuts + (n,)
        yield tuple(b - a for a, b in zip(bounds, bounds[1:]))


def enumerate_partitions(n: int, m: int) -> Iterator[Partition]:
    """Every composition of n into m positive parts once, in lexicographic order."""
    _check_range(n, m)
    for parts in _compositions(n, m):
        yield Partition(cardinalities=parts)


def baseline_config(**overrides) -> ValidationConfig:
    """Validation config with the statistical checks off, as the brute-force runs use by default."""
    data = {"check_heterogeneity": False, "check_homogeneity": False}
    data.update(overrides)
    return ValidationConfig(**data)


def _survives(parts: Tuple[int, ...], cum: np.ndarray, ds: Dataset, cfg: ValidationConfig,
              lambda1: int, lambda2: int) -> bool:
    """Checks in order: monotonicity, heterogeneity, concentration, cardinality, homogeneity."""
    m = len(parts)
    ends = np.cumsum(parts)
    starts = ends - np.asarray(parts)
    counts = cum[ends] - cum[starts]

    if cfg.check_monotonicity:
        for j in range(m - 1):
            if counts[j] * parts[j + 1] > counts[j + 1] * parts[j]:
                return False
    if cfg.check_heterogeneity:
        stats = [GradeStats(cardinality=c, default_count=int(k), default_rate=int(k) / c)
                 for c, k in zip(parts, counts)]
        for j in range(m - 1):
            t = t_test_heterogeneity(stats[j], stats[j + 1], cfg.alpha, grade=j + 1)
            if not (t.applicable and t.heterogeneous):
                return False
    if cfg.check_concentration:
        n = ds.n
        # (H - 1/m)/(1 - 1/m) < threshold, with H = sum N_j^2 / n^2
        h_adj = (m * sum(c * c for c in parts) - n * n) / ((m - 1) * n * n)
        if not h_adj < cfg.concentration_threshold:
            return False
    if cfg.check_cardinality:
        if any(c < lambda1 or c > lambda2 for c in parts):
            return False
    if cfg.check_homogeneity:
        p = Partition(cardinalities=parts)
        for j in range(1, m + 1):
            z = z_test_homogeneity(ds, p, j, cfg.homogeneity_iterations, cfg.homogeneity_alpha, seed=cfg.seed + j)
            if not (z.applicable and z.homogeneous):
                return False
    return True


def _search_chunk(ds: Dataset, m: int, cfg: ValidationConfig, first: Optional[int]) -> List[Tuple[int, ...]]:
    lambda1, lambda2 = default_thresholds(ds.n)
    lambda1 = lambda1 if cfg.lambda1 is None else cfg.lambda1
    lambda2 = lambda2 if cfg.lambda2 is None else cfg.lambda2
    cum = np.concatenate([[0], np.cumsum(ds.defaults)]).astype(np.int64)
    return [parts for parts in _compositions(ds.n, m, first) if _survives(parts, cum, ds, cfg, lambda1, lambda2)]


def brute_force_search(
    ds: Dataset,
    m: int,
    config: Optional[ValidationConfig] = None,
    workers: int = 1,
) -> Tuple[List[Partition], BenchmarkRow]:
    """Test every configuration against the enabled constraints, discarding on the first failure.

    Args:
        ds: Dataset to grade.
        m: Number of grades.
        config: Thresholds and check flags; defaults to :func:`baseline_config`.
        workers: Processes; the space is split by the size of the first grade.

    Returns:
        (survivors in lexicographic order, BenchmarkRow). Elapsed covers only the search loop.
    """
    total = count_configurations(ds.n, m)
    cfg = config or baseline_config()
    started = time.perf_counter()
    if workers > 1 and m > 2:
        firsts = list(range(1, ds.n - m + 2))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_search_chunk, [ds] * len(firsts), [m] * len(firsts),
                                   [cfg] * len(firsts), firsts))
        survivors = [parts for chunk in chunks for parts in chunk]
    else:
        survivors = _search_chunk(ds, m, cfg, None)
    elapsed = time.perf_counter() - started

    logger.info("brute force n=%d m=%d: %d of %d valid in %.3fs", ds.n, m, len(survivors), total, elapsed)
    row = BenchmarkRow(n=ds.n, m=m, configurations=total, valid_count=len(survivors), elapsed=elapsed)
    return [Partition(cardinalities=p) for p in survivors], row


def fit_power_law(rows: Sequence[BenchmarkRow]) -> Tuple[float, float]:
    """Least squares on (log configurations, log elapsed); returns (a, b) for time = a * C^b."""
    if len(rows) < 3:
        raise RatingScaleError(f"need at least 3 benchmark rows, got {len(rows)}")
    if any(r.elapsed <= 0 for r in rows):
        raise RatingScaleError("elapsed times must be positive for a log-log fit")
    x = np.log([r.configurations for r in rows])
    y = np.log([r.elapsed for r in rows])
    slope, intercept = np.polyfit(x, y, 1)
    return float(math.exp(intercept)), float(slope)


def published_rows() -> List[BenchmarkRow]:
    """Benchmark rows with the published timings; valid_count is unknown and left at 0."""
    return [
        BenchmarkRow(n=n, m=m, configurations=count_configurations(n, m), valid_count=0, elapsed=t)
        for n, m, t in PUBLISHED_TIMINGS
    ]


def write_benchmark_csv(rows: Sequence[BenchmarkRow], path: str | Path) -> Path:
    path = Path(path)
    frame = pd.DataFrame(
        [[r.n, r.m, r.configurations, r.valid_count, r.elapsed] for r in rows], columns=BENCHMARK_COLUMNS
    )
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False)
    return path
