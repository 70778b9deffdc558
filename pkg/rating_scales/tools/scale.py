"""Grade statistics and classical checks for every financial constraint."""

from __future__ import annotations

import logging
import math
from fractions import Fraction
from typing import List, Optional, Sequence

import numpy as np
from scipy.stats import norm

from rating_scales.config import (
    HETEROGENEITY_ALPHA,
    HOMOGENEITY_ALPHA,
    HOMOGENEITY_ITERATIONS,
    MIN_STAT_POPULATION,
    default_thresholds,
)
from rating_scales.errors import RatingScaleError
from rating_scales.models import (
    Dataset,
    GradeRow,
    GradeStats,
    Partition,
    TTestResult,
    ValidationConfig,
    ValidityReport,
    ZTestResult,
)

logger = logging.getLogger(__name__)


def grade_stats(ds: Dataset, p: Partition) -> List[GradeStats]:
    """Cardinality, default count and default rate of each grade, in grade order."""
    if p.n != ds.n:
        raise RatingScaleError(f"partition covers {p.n} counterparts, dataset has {ds.n}")
    out: List[GradeStats] = []
    for first, last in p.bounds():
        size = last - first + 1
        count = sum(ds.defaults[first - 1:last])
        out.append(GradeStats(cardinality=size, default_count=count, default_rate=count / size))
    return out


def grade_table(ds: Dataset, p: Partition) -> List[GradeRow]:
    return [
        GradeRow(grade=j, cardinality=s.cardinality, defaults=s.default_count, default_rate=s.default_rate)
        for j, s in enumerate(grade_stats(ds, p), start=1)
    ]


def herfindahl_adjusted_exact(p: Partition) -> Fraction:
    n, m = p.n, p.m
    h = sum(Fraction(c * c, n * n) for c in p.cardinalities)
    return (h - Fraction(1, m)) / (1 - Fraction(1, m))


def herfindahl_adjusted(p: Partition) -> float:
    """(H - 1/m) / (1 - 1/m) with H the sum of squared grade shares; 0 for equal grades."""
    return float(herfindahl_adjusted_exact(p))


def check_monotonicity(stats: Sequence[GradeStats]) -> bool:
    """Non-decreasing default rates; equal adjacent rates pass."""
    # cross-multiplied so equal rates compare exactly
    return all(
        a.default_count * b.cardinality <= b.default_count * a.cardinality
        for a, b in zip(stats, stats[1:])
    )


def check_cardinality(p: Partition, lambda1: int, lambda2: int) -> bool:
    if lambda1 > lambda2:
        raise RatingScaleError(f"lambda1={lambda1} exceeds lambda2={lambda2}")
    return all(lambda1 <= c <= lambda2 for c in p.cardinalities)


def check_concentration(p: Partition, threshold: float) -> bool:
    return herfindahl_adjusted(p) < threshold


def t_test_heterogeneity(
    sj: GradeStats,
    sj1: GradeStats,
    alpha: float = HETEROGENEITY_ALPHA,
    grade: int = 1,
) -> TTestResult:
    """Pooled two-sample t statistic between consecutive grades, normal approximation.

    The test applies when both grades hold at least 30 counterparts and the binomial
    deviations are within a factor of two of each other. Grades j and j+1 are heterogeneous
    when |t| reaches the two-tailed normal quantile at ``alpha``.
    """
    if not 0.0 < alpha < 1.0:
        raise RatingScaleError(f"alpha must lie in (0, 1), got {alpha}")
    l1, l2 = sj.default_rate, sj1.default_rate
    n1, n2 = sj.cardinality, sj1.cardinality
    var1, var2 = l1 * (1.0 - l1), l2 * (1.0 - l2)

    pooled_var = 0.0
    if n1 + n2 > 2:
        pooled_var = ((n1 - 1) * var1 + (n2 - 1) * var2) / (n1 + n2 - 2)
    if pooled_var <= 0.0:
        return TTestResult(grade=grade, t=0.0, applicable=False, heterogeneous=False)

    t = (l1 - l2) / (math.sqrt(pooled_var) * math.sqrt(1.0 / n1 + 1.0 / n2))
    applicable = n1 >= MIN_STAT_POPULATION and n2 >= MIN_STAT_POPULATION
    if var1 <= 0.0 or var2 <= 0.0:
        applicable = False
    else:
        ratio = math.sqrt(var1) / math.sqrt(var2)
        applicable = applicable and 0.5 < ratio < 2.0

    gamma = norm.ppf((2.0 - alpha) / 2.0)
    return TTestResult(grade=grade, t=t, applicable=applicable, heterogeneous=applicable and abs(t) >= gamma)


def z_test_homogeneity(
    ds: Dataset,
    p: Partition,
    grade: int,
    iterations: int = HOMOGENEITY_ITERATIONS,
    alpha: float = HOMOGENEITY_ALPHA,
    seed: int = 0,
) -> ZTestResult:
    """Random complementary splits of one grade, each compared with a two-proportion z-test.

    Split size is uniform in [30, N_j - 30] and membership a uniform random subset.
    The grade is homogeneous when every split's two-tailed probability is at least ``alpha``.
    """
    if iterations < 1:
        raise RatingScaleError(f"iterations must be >= 1, got {iterations}")
    if not 1 <= grade <= p.m:
        raise RatingScaleError(f"grade {grade} out of range [1, {p.m}]")
    first, last = p.bounds()[grade - 1]
    size = last - first + 1
    if size < 2 * MIN_STAT_POPULATION:
        return ZTestResult(grade=grade, pass_fraction=0.0, applicable=False, homogeneous=False)

    members = np.asarray(ds.defaults[first - 1:last], dtype=np.int64)
    total = int(members.sum())
    rate = total / size
    if rate in (0.0, 1.0):
        # both halves share the grade rate, z is 0
        return ZTestResult(grade=grade, pass_fraction=1.0, applicable=True, homogeneous=True)

    rng = np.random.default_rng(seed)
    passed = 0
    for _ in range(iterations):
        k = int(rng.integers(MIN_STAT_POPULATION, size - MIN_STAT_POPULATION + 1))
        picked = rng.choice(size, size=k, replace=False)
        d1 = int(members[picked].sum())
        d2 = total - d1
        z = (d1 / k - d2 / (size - k)) / math.sqrt(rate * (1.0 - rate) * (1.0 / k + 1.0 / (size - k)))
        if 2.0 * norm.sf(abs(z)) >= alpha:
            passed += 1
    fraction = passed / iterations
    return ZTestResult(grade=grade, pass_fraction=fraction, applicable=True, homogeneous=passed == iterations)


def _aggregate(flags: List[Optional[bool]]) -> Optional[bool]:
    """None when any test could not be applied, else the conjunction."""
    if not flags or any(f is None for f in flags):
        return None
    return all(flags)


def validate(ds: Dataset, p: Partition, config: Optional[ValidationConfig] = None) -> ValidityReport:
    """Run every classical check and collect the measured values behind each verdict."""
    config = config or ValidationConfig()
    stats = grade_stats(ds, p)
    d_l1, d_l2 = default_thresholds(ds.n)
    lambda1 = d_l1 if config.lambda1 is None else config.lambda1
    lambda2 = d_l2 if config.lambda2 is None else config.lambda2

    t_tests = [
        t_test_heterogeneity(stats[j], stats[j + 1], config.alpha, grade=j + 1) for j in range(p.m - 1)
    ] if config.check_heterogeneity else []
    z_tests = [
        z_test_homogeneity(
            ds, p, j, config.homogeneity_iterations, config.homogeneity_alpha, seed=config.seed + j
        )
        for j in range(1, p.m + 1)
    ] if config.check_homogeneity else []

    h_adj = herfindahl_adjusted(p)
    report = ValidityReport(
        monotonicity=check_monotonicity(stats),
        concentration=h_adj < config.concentration_threshold,
        cardinality=check_cardinality(p, lambda1, lambda2),
        heterogeneity=_aggregate([t.heterogeneous if t.applicable else None for t in t_tests])
        if t_tests else None,
        homogeneity=_aggregate([z.homogeneous if z.applicable else None for z in z_tests])
        if z_tests else None,
        h_adj=h_adj,
        default_rates=[s.default_rate for s in stats],
        cardinalities=list(p.cardinalities),
        lambda1=lambda1,
        lambda2=lambda2,
        concentration_threshold=config.concentration_threshold,
        t_tests=t_tests,
        z_tests=z_tests,
    )
    logger.debug("validated %s: %s", p.cardinalities, report.model_dump(include={"monotonicity", "concentration", "cardinality"}))
    return report
