"""Solver limits, statistical thresholds, and rating-scale defaults."""

import logging
import math
import os
from pathlib import Path

from dotenv import load_dotenv

_env_path = Path(__file__).parent / ".env"
if _env_path.exists():
    load_dotenv(_env_path)

logger = logging.getLogger(__name__)


def _env_number(name: str, default, cast=float):
    """Read an RS_* override from the environment, falling back to ``default``."""
    raw = os.environ.get(name, "").strip()
    if not raw:
        return default
    try:
        return cast(raw)
    except ValueError as exc:
        raise ValueError(f"{name}={raw!r} is not a valid {cast.__name__}") from exc


# --------------- Solvers ---------------
EXACT_SOLVER_CAP = _env_number("RS_EXACT_SOLVER_CAP", 26, int)        # 2^26 ~ 6.7e7 states
EXACT_MINIMIZER_CAPACITY = _env_number("RS_EXACT_MINIMIZER_CAPACITY", 4096, int)
EXACT_FULL_STORE_DIM = _env_number("RS_EXACT_FULL_STORE_DIM", 16, int)   # every state fits in the store
EXACT_MONOTONICITY_CAP = _env_number("RS_EXACT_MONOTONICITY_CAP", 64, int)
ANNEAL_RESTARTS = _env_number("RS_ANNEAL_RESTARTS", 8, int)
ANNEAL_SWEEP_FACTOR = _env_number("RS_ANNEAL_SWEEP_FACTOR", 10, int)  # sweeps = factor * dimension
ANNEAL_T_END_RATIO = _env_number("RS_ANNEAL_T_END_RATIO", 1e-3)
ANNEAL_GROUPED_T_END_RATIO = _env_number("RS_ANNEAL_GROUPED_T_END_RATIO", 1e-6)
ANNEAL_TARGET_ACCEPTANCE = _env_number("RS_ANNEAL_TARGET_ACCEPTANCE", 0.8)
ANNEAL_PROBE_SAMPLES = 100
TIE_TOLERANCE = 1e-9                                                  # relative
DEFAULT_WORKERS = _env_number("RS_WORKERS", os.cpu_count() or 1, int)

# --------------- Financial constraints ---------------
CONCENTRATION_THRESHOLD = _env_number("RS_CONCENTRATION_THRESHOLD", 0.05)
HETEROGENEITY_ALPHA = _env_number("RS_HETEROGENEITY_ALPHA", 0.01)
HOMOGENEITY_ALPHA = _env_number("RS_HOMOGENEITY_ALPHA", 0.05)
HOMOGENEITY_ITERATIONS = _env_number("RS_HOMOGENEITY_ITERATIONS", 500, int)
MIN_STAT_POPULATION = 30                                              # normal approximation floor
MIN_GRADE_PERCENT = 1
MAX_GRADE_PERCENT = 15
RELAXED_MAX_GRADE_FACTOR = (3, 2)                                     # lambda2 = ceil(1.5 n / m)

# --------------- Experiments ---------------
CONFUSION_LIMIT = _env_number("RS_CONFUSION_LIMIT", 1_000_000, int)
SECONDS_PER_DAY = 86_400.0

# --------------- Synthetic data ---------------
# top decile ~10x as likely to default as the bottom decile
DEFAULT_LOGISTIC_STEEPNESS = math.log(10.0) / 0.45

LOG_LEVEL = os.environ.get("RS_LOG_LEVEL", "INFO").upper()
LOG_FORMAT = "[%(name)s] %(message)s"


def default_thresholds(n: int) -> tuple[int, int]:
    """Return (lambda1, lambda2) for ``n`` counterparts under the 1%/15% rule.

    lambda1 is floored at 1 so no grade can be empty.
    """
    lambda1 = max(1, n * MIN_GRADE_PERCENT // 100)
    lambda2 = -(-n * MAX_GRADE_PERCENT // 100)
    return lambda1, lambda2


def relaxed_thresholds(n: int, m: int) -> tuple[int, int]:
    """Widen lambda2 to ceil(1.5 n / m) when the 15% cap cannot cover n with m grades."""
    num, den = RELAXED_MAX_GRADE_FACTOR
    lambda1, lambda2 = default_thresholds(n)
    return lambda1, max(lambda2, -(-num * n // (den * m)))


def configure_logging(level: str | None = None) -> None:
    logging.basicConfig(level=(level or LOG_LEVEL).upper(), format=LOG_FORMAT)
