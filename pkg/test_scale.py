"""Grade statistics and the classical constraint checks."""
import sys
from fractions import Fraction
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

import pytest

from rating_scales.config import default_thresholds, relaxed_thresholds
from rating_scales.errors import RatingScaleError
from rating_scales.models import GradeStats, Partition, ValidationConfig
from rating_scales.tools.dataset import from_default_positions
from rating_scales.tools.scale import (
    check_cardinality,
    check_concentration,
    check_monotonicity,
    grade_stats,
    grade_table,
    herfindahl_adjusted,
    herfindahl_adjusted_exact,
    t_test_heterogeneity,
    validate,
    z_test_homogeneity,
)

NINE_GRADES = Partition(cardinalities=(16, 16, 16, 16, 17, 17, 17, 17, 18))
NINE_GRADE_DEFAULTS = (115, 131, 133, 147, 149, 150)


def _stats(count, size):
    return GradeStats(cardinality=size, default_count=count, default_rate=count / size)


def test_grade_stats_nine_grade_table():
    ds = from_default_positions(150, NINE_GRADE_DEFAULTS)
    rows = grade_table(ds, NINE_GRADES)
    assert [r.defaults for r in rows] == [0, 0, 0, 0, 0, 0, 1, 1, 4]
    assert rows[-1].cardinality == 18
    assert rows[-1].default_rate == pytest.approx(0.222222, abs=1e-6)
    assert rows[6].default_rate == pytest.approx(0.0588, abs=1e-4)


def test_grade_stats_needs_matching_n():
    ds = from_default_positions(10, [10])
    with pytest.raises(RatingScaleError):
        grade_stats(ds, Partition(cardinalities=(4, 4)))


def test_partition_helpers():
    p = Partition(cardinalities=(2, 1, 3))
    assert p.n == 6 and p.m == 3
    assert p.bounds() == [(1, 2), (3, 3), (4, 6)]
    assert p.grade_of() == [1, 1, 2, 3, 3, 3]
    with pytest.raises(ValueError):
        Partition(cardinalities=(3, 0))
    with pytest.raises(ValueError):
        Partition(cardinalities=(5,))


def test_monotonicity():
    ds = from_default_positions(13, [10, 11, 13])
    assert check_monotonicity(grade_stats(ds, Partition(cardinalities=(3, 3, 3, 4))))
    assert check_monotonicity(grade_stats(ds, Partition(cardinalities=(3, 3, 4, 3))))
    assert not check_monotonicity(grade_stats(ds, Partition(cardinalities=(9, 2, 1, 1))))


def test_monotonicity_equal_rates_pass():
    ds = from_default_positions(4, [1, 3])
    assert check_monotonicity(grade_stats(ds, Partition(cardinalities=(2, 2))))


def test_monotonicity_published_rates():
    assert check_monotonicity([_stats(0, 16)] * 6 + [_stats(1, 17), _stats(1, 17), _stats(4, 18)])
    assert check_monotonicity([_stats(0, 36), _stats(2, 40), _stats(6, 42), _stats(10, 32)])


def test_herfindahl_values():
    assert herfindahl_adjusted(Partition(cardinalities=(9, 1))) == pytest.approx(0.64)
    assert herfindahl_adjusted(Partition(cardinalities=(5, 5, 5))) == 0.0
    assert herfindahl_adjusted_exact(NINE_GRADES) == Fraction(1, 5000)


def test_herfindahl_grows_when_a_larger_grade_absorbs_from_a_smaller():
    before = herfindahl_adjusted(Partition(cardinalities=(6, 4, 5)))
    after = herfindahl_adjusted(Partition(cardinalities=(7, 3, 5)))
    assert after > before
    assert 0.0 <= before <= 1.0 and 0.0 <= after <= 1.0


def test_concentration_threshold_is_strict():
    p = Partition(cardinalities=(9, 1))
    assert not check_concentration(p, 0.64)
    assert check_concentration(p, 0.65)
    assert check_concentration(NINE_GRADES, 0.05)


def test_cardinality():
    assert default_thresholds(150) == (1, 23)
    assert check_cardinality(NINE_GRADES, 1, 23)
    assert not check_cardinality(NINE_GRADES, 17, 23)
    with pytest.raises(RatingScaleError):
        check_cardinality(NINE_GRADES, 5, 4)


def test_thresholds():
    assert default_thresholds(8) == (1, 2)
    assert default_thresholds(1000) == (10, 150)
    assert relaxed_thresholds(150, 4) == (1, 57)
    assert relaxed_thresholds(150, 9) == (1, 25)


def test_t_test_heterogeneous_grades():
    result = t_test_heterogeneity(_stats(5, 100), _stats(20, 100), alpha=0.01, grade=3)
    assert result.grade == 3
    assert result.t == pytest.approx(-3.293, abs=1e-3)
    assert result.applicable
    assert result.heterogeneous


def test_t_test_applicability():
    small = t_test_heterogeneity(_stats(2, 20), _stats(8, 20))
    assert not small.applicable and not small.heterogeneous
    skewed = t_test_heterogeneity(_stats(1, 100), _stats(30, 100))
    assert not skewed.applicable
    close = t_test_heterogeneity(_stats(10, 100), _stats(11, 100))
    assert close.applicable and not close.heterogeneous
    with pytest.raises(RatingScaleError):
        t_test_heterogeneity(_stats(1, 40), _stats(2, 40), alpha=1.5)


def test_z_test_small_grade_is_not_applicable():
    ds = from_default_positions(80, [70, 75])
    result = z_test_homogeneity(ds, Partition(cardinalities=(40, 40)), grade=2)
    assert not result.applicable


def test_z_test_grade_without_defaults_is_homogeneous():
    ds = from_default_positions(120, [119])
    result = z_test_homogeneity(ds, Partition(cardinalities=(70, 50)), grade=1, iterations=20)
    assert result.applicable and result.homogeneous
    assert result.pass_fraction == 1.0


def test_z_test_is_seeded():
    positions = list(range(5, 200, 9))
    ds = from_default_positions(200, positions)
    p = Partition(cardinalities=(100, 100))
    a = z_test_homogeneity(ds, p, grade=1, iterations=50, seed=4)
    b = z_test_homogeneity(ds, p, grade=1, iterations=50, seed=4)
    assert a == b
    assert a.applicable
    assert 0.0 <= a.pass_fraction <= 1.0
    with pytest.raises(RatingScaleError):
        z_test_homogeneity(ds, p, grade=3)


def test_validate_nine_grade_solution():
    ds = from_default_positions(150, NINE_GRADE_DEFAULTS)
    report = validate(ds, NINE_GRADES)
    assert report.monotonicity and report.concentration and report.cardinality
    assert report.encoded_valid
    assert (report.lambda1, report.lambda2) == (1, 23)
    assert report.h_adj == pytest.approx(2e-4)
    # every grade is below the 30-counterpart floor of the statistical tests
    assert report.heterogeneity is None
    assert report.homogeneity is None
    assert len(report.t_tests) == 8 and len(report.z_tests) == 9


def test_validate_respects_config():
    ds = from_default_positions(150, NINE_GRADE_DEFAULTS)
    report = validate(
        ds, NINE_GRADES,
        ValidationConfig(lambda2=16, concentration_threshold=1e-4, check_heterogeneity=False,
                         check_homogeneity=False),
    )
    assert not report.cardinality
    assert not report.concentration
    assert report.t_tests == [] and report.heterogeneity is None
