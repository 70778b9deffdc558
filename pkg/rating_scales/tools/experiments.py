"""Validation studies: monotonicity-approximation confusion matrix and preset-weight runs."""

from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from rating_scales.config import CONFUSION_LIMIT, SECONDS_PER_DAY, TIE_TOLERANCE, relaxed_thresholds
from rating_scales.errors import InfeasibleThresholdsError, InstanceTooLargeError
from rating_scales.models import (
    ComposeOptions,
    ConfusionMatrix,
    CostHistogramRow,
    Dataset,
    GradeRow,
    Label,
    LayoutOptions,
    MonotonicityVariant,
    PenaltyWeights,
    SolverOptions,
)
from rating_scales.tools.baseline import count_configurations, enumerate_partitions
from rating_scales.tools.dataset import from_default_positions
from rating_scales.tools.penalties import compose, layout, preset_weights, staircase_x
from rating_scales.tools.scale import check_monotonicity, grade_stats, grade_table
from rating_scales.tools.solvers import layout_options, solve_model

logger = logging.getLogger(__name__)

# name -> (n, m, 1-based default positions)
CONFUSION_INSTANCES: Dict[str, Tuple[int, int, Tuple[int, ...]]] = {
    "n13": (13, 4, (10, 11, 13)),
    "n14": (14, 4, (11, 13, 14)),
    # the published 14-counterpart matrix counts (TN 48, 238 monotone) come from this vector,
    # not from the one listed with them
    "n14-matrix": (14, 4, (11, 12, 14)),
    # the cost histograms were drawn from a different 13-counterpart default vector
    "n13-histogram": (13, 4, (9, 12, 13)),
}

# name -> (n, m, default positions, preset id)
PRESET_CASES: Dict[str, Tuple[int, int, Tuple[int, ...], int]] = {
    "nine-grades": (150, 9, (115, 131, 133, 147, 149, 150), 1),
    "four-grades": (
        150, 4,
        (56, 63, 91, 96, 104, 106, 107, 113, 119, 122, 126, 127, 129, 133, 135, 144, 146, 149),
        2,
    ),
}

_BATCH = 10_000


def confusion_weights(n: int, m: int, d: int, mu_ratio: Optional[float] = None) -> PenaltyWeights:
    """Preset-1 weights; ``mu_ratio`` replaces mu1 with mu03 / mu_ratio."""
    w = preset_weights(1, n, m, max(d, 1))
    if mu_ratio is not None:
        w = w.model_copy(update={"mu1": w.mu03 / mu_ratio})
    return w


def monotonicity_confusion(
    ds: Dataset,
    m: int,
    weights: Optional[PenaltyWeights] = None,
    limit: int = CONFUSION_LIMIT,
) -> Tuple[ConfusionMatrix, List[CostHistogramRow]]:
    """Compare the approximate monotonicity penalty with the true constraint on every staircase.

    Actual positives satisfy non-decreasing default rates; predicted positives are the staircases
    reaching the minimum of the logical plus approximate-monotonicity cost.
    """
    total = count_configurations(ds.n, m)
    if total > limit:
        raise InstanceTooLargeError(f"{total:,} staircases exceed the confusion limit of {limit:,}")
    weights = weights or confusion_weights(ds.n, m, ds.d)
    lay = layout(ds.n, m, LayoutOptions(include_thresholds=False))
    model = compose(
        lay, weights, ds,
        ComposeOptions(monotonicity=MonotonicityVariant.APPROX, concentration=False, thresholds=False),
    )

    partitions = list(enumerate_partitions(ds.n, m))
    actual = np.array([check_monotonicity(grade_stats(ds, p)) for p in partitions], dtype=bool)
    energies = np.empty(len(partitions), dtype=np.float64)
    for start in range(0, len(partitions), _BATCH):
        chunk = partitions[start:start + _BATCH]
        states = np.stack([staircase_x(p, m).ravel() for p in chunk])
        energies[start:start + len(chunk)] = model.energies(states)

    best = float(energies.min())
    predicted = energies <= best + TIE_TOLERANCE * max(1.0, abs(best))

    rows: List[CostHistogramRow] = []
    counts = {label: 0 for label in Label}
    for p, e, a, pr in zip(partitions, energies, actual, predicted):
        if pr:
            label = Label.TP if a else Label.FP
        else:
            label = Label.FN if a else Label.TN
        counts[label] += 1
        rows.append(CostHistogramRow(energy=float(e), label=label, partition=p))

    matrix = ConfusionMatrix(tp=counts[Label.TP], fp=counts[Label.FP], tn=counts[Label.TN], fn=counts[Label.FN])
    logger.info("confusion n=%d m=%d: %s", ds.n, m, matrix.model_dump())
    return matrix, rows


def write_histogram_csv(rows: Sequence[CostHistogramRow], path: str | Path) -> Path:
    """``energy,label`` per staircase, for external plotting."""
    path = Path(path)
    frame = pd.DataFrame({"energy": [r.energy for r in rows], "label": [r.label.value for r in rows]})
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False)
    return path


def write_grade_table_csv(grades: Sequence[GradeRow | Dict], path: str | Path) -> Path:
    """``grade,cardinality,defaults,default_rate`` per grade."""
    path = Path(path)
    rows = [g.model_dump() if isinstance(g, GradeRow) else dict(g) for g in grades]
    frame = pd.DataFrame(rows, columns=["grade", "cardinality", "defaults", "default_rate"])
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False)
    return path


def run_preset_experiment(
    n: int,
    m: int,
    default_positions: Sequence[int],
    preset_id: int,
    solver_options: Optional[SolverOptions] = None,
) -> Dict:
    """Build with preset weights, solve, decode and validate; report the per-grade table.

    When the 1%/15% cardinality rule cannot cover n with m grades and no thresholds were given,
    the upper bound is widened to ceil(1.5 n / m).

    Returns:
        dict with status, thresholds used, the solver result and the grade table.
    """
    options = solver_options or SolverOptions()
    ds = from_default_positions(n, default_positions)
    relaxed = False
    if options.compose.thresholds and options.lambda1 is None and options.lambda2 is None:
        try:
            layout(n, m, LayoutOptions())
        except InfeasibleThresholdsError as exc:
            lambda1, lambda2 = relaxed_thresholds(n, m)
            logger.warning("%s; relaxing cardinality bounds to [%d, %d]", exc, lambda1, lambda2)
            options = options.model_copy(update={"lambda1": lambda1, "lambda2": lambda2})
            relaxed = True

    exact = options.compose.monotonicity == MonotonicityVariant.EXACT
    weights = preset_weights(preset_id, n, m, max(ds.d, 1), exact=exact)
    lay = layout(n, m, layout_options(ds, options))
    model = compose(lay, weights, ds, options.compose)
    result = solve_model(model, lay, ds, options)

    report = {
        "status": "success",
        "n": n,
        "m": m,
        "preset": preset_id,
        "default_positions": list(default_positions),
        "lambda1": lay.lambda1,
        "lambda2": lay.lambda2,
        "relaxed_thresholds": relaxed,
        "weights": weights.model_dump(exclude_none=True),
        "result": result.model_dump(mode="json", exclude={"all_minimizers"}),
        "grades": [],
        "valid": False,
    }
    if result.decoded is not None:
        report["grades"] = [row.model_dump() for row in grade_table(ds, result.decoded)]
        report["valid"] = bool(result.validity and result.validity.encoded_valid)
    else:
        report["status"] = "error"
        report["error_message"] = "solution is not a staircase: " + "; ".join(result.diagnosis)
    return report


def extrapolate_runtime(a: float, b: float, n: int, m: int) -> Dict:
    """Apply time = a * C(n-1, m-1)^b in log space; returns seconds and days."""
    configurations = count_configurations(n, m)
    log_seconds = math.log(a) + b * math.log(configurations)
    seconds = math.exp(log_seconds) if log_seconds < 709.0 else math.inf
    return {
        "n": n,
        "m": m,
        "configurations": configurations,
        "seconds": seconds,
        "days": seconds / SECONDS_PER_DAY,
        "log10_days": (log_seconds - math.log(SECONDS_PER_DAY)) / math.log(10.0),
    }
