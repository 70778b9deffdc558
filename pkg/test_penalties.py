"""Variable layout, every penalty family, composition and staircase encoding."""
import itertools
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

import numpy as np
import pytest

from rating_scales.errors import InfeasibleThresholdsError, InstanceTooLargeError, LayoutMismatchError, RatingScaleError
from rating_scales.models import (
    ComposeOptions,
    LayoutOptions,
    LogicalVariant,
    MonotonicityVariant,
    Partition,
    PenaltyWeights,
)
from rating_scales.tools.baseline import enumerate_partitions
from rating_scales.tools.dataset import from_default_positions
from rating_scales.tools.penalties import (
    compose,
    exact_triples,
    layout,
    penalty_cardinality,
    penalty_concentration,
    penalty_logical_global,
    penalty_logical_local,
    penalty_monotonicity_approx,
    penalty_monotonicity_exact,
    preset_weights,
    rosenberg,
    staircase_state,
    staircase_x,
)
from rating_scales.tools.qubo import evaluate
from rating_scales.tools.scale import check_cardinality, check_monotonicity, grade_stats, herfindahl_adjusted

NO_THRESHOLDS = LayoutOptions(include_thresholds=False)
WEIGHTS = PenaltyWeights(mu01=500, mu02=70, mu03=11, mu04=13, mu05=17, mu06=19, mu07=23, mu1=3, mu3=29,
                         mu41=31, mu42=37)
# row uniqueness dominates every reward, so staircases are the only one-hot minimizers
LOGICAL = PenaltyWeights(mu01=1000, mu02=200, mu03=20, mu04=20, mu1=1)


def _cross_terms(ds, p):
    stats = grade_stats(ds, p)
    return [
        a.default_count * b.cardinality - a.cardinality * b.default_count for a, b in zip(stats, stats[1:])
    ]


# --------------- Layout ---------------


def test_layout_without_thresholds():
    lay = layout(8, 3, NO_THRESHOLDS)
    assert lay.total_variables == 24
    assert lay.x_index(1, 1) == 0
    assert lay.x_index(8, 3) == 23
    assert lay.x_index(2, 1) == 3


def test_layout_slack_widths():
    lay = layout(4, 3, LayoutOptions(lambda1=1, lambda2=2))
    assert (lay.nbar1, lay.nbar2) == (2, 2)
    assert lay.s1_offset == 12
    assert lay.s1_index(1, 3) == 12 + 3 + 2
    assert lay.s2_offset == 18
    assert lay.total_variables == 24


def test_layout_default_thresholds():
    lay = layout(150, 9)
    assert (lay.lambda1, lay.lambda2) == (1, 23)
    assert (lay.nbar1, lay.nbar2) == (8, 5)


def test_layout_exact_block():
    ds = from_default_positions(5, [2, 3])
    lay = layout(5, 3, LayoutOptions(include_thresholds=False, exact_monotonicity=True, defaults=ds.defaults))
    assert lay.y_offset == 15
    assert lay.n_y == 3
    assert lay.sy_offset == 15 + 24
    assert lay.total_variables == 45
    triples = exact_triples(lay)
    assert len(triples) == 2 * (3 - 1) * 3 * 2
    assert triples[0] == (1, 2, 1)
    assert all(ds.defaults[a - 1] != ds.defaults[b - 1] for a, b, _ in triples)


def test_layout_exact_cap():
    ds = from_default_positions(8, [7, 8])
    options = LayoutOptions(include_thresholds=False, exact_monotonicity=True, defaults=ds.defaults)
    with pytest.raises(InstanceTooLargeError, match="allow_large"):
        layout(8, 3, options)
    lay = layout(8, 3, options.model_copy(update={"allow_large": True}))
    assert lay.total_variables == 24 + 2 * 2 * 6 * 2 + 2 * 4


def test_layout_rejects_infeasible_thresholds():
    with pytest.raises(InfeasibleThresholdsError, match=r"n <= m\*lambda2"):
        layout(150, 4)
    with pytest.raises(InfeasibleThresholdsError, match=r"m\*lambda1 <= n"):
        layout(10, 3, LayoutOptions(lambda1=4, lambda2=5))
    with pytest.raises(RatingScaleError):
        layout(3, 4, NO_THRESHOLDS)
    with pytest.raises(LayoutMismatchError):
        layout(5, 2, LayoutOptions(include_thresholds=False, exact_monotonicity=True))


# --------------- Penalty families ---------------


def test_logical_global_is_constant_on_staircases():
    n, m = 7, 3
    lay = layout(n, m, NO_THRESHOLDS)
    model = penalty_logical_global(lay, WEIGHTS)
    expected = -WEIGHTS.mu03 * (n - m) - WEIGHTS.mu04 * (m - 1)
    for p in enumerate_partitions(n, m):
        assert evaluate(model, staircase_x(p, m).ravel()) == pytest.approx(expected)


def test_logical_local_costs_restarts_only():
    n, m = 7, 4
    lay = layout(n, m, NO_THRESHOLDS)
    model = penalty_logical_local(lay, WEIGHTS)
    for p in enumerate_partitions(n, m):
        assert evaluate(model, staircase_x(p, m).ravel()) == pytest.approx(WEIGHTS.mu07 * (m - 2))


def test_logical_local_penalizes_broken_windows():
    lay = layout(3, 2, NO_THRESHOLDS)
    model = penalty_logical_local(lay, WEIGHTS)
    staircase = evaluate(model, staircase_x(Partition(cardinalities=(2, 1)), 2).ravel())
    backwards = evaluate(model, np.array([[1, 0], [0, 1], [1, 0]]).ravel())
    assert backwards > staircase


def test_local_weights_default_to_mu04():
    w = PenaltyWeights(mu01=1, mu02=1, mu03=1, mu04=5)
    assert w.local("mu05") == w.local("mu06") == w.local("mu07") == 5


def test_approx_monotonicity_matches_cross_terms():
    ds = from_default_positions(8, [3, 7, 8])
    m = 3
    lay = layout(8, m, NO_THRESHOLDS)
    model = penalty_monotonicity_approx(lay, ds, 2.5)
    for p in enumerate_partitions(8, m):
        value = evaluate(model, staircase_x(p, m).ravel())
        assert value == pytest.approx(2.5 * sum(_cross_terms(ds, p)))


def test_rosenberg_gadget():
    for x1, x2, y in itertools.product((0, 1), repeat=3):
        value = evaluate(rosenberg(0, 1, 2, 4.0), (x1, x2, y))
        if y == x1 * x2:
            assert value == 0.0
        else:
            assert value >= 4.0


def test_exact_monotonicity_vanishes_iff_monotone():
    ds = from_default_positions(5, [2, 5])
    m = 3
    lay = layout(5, m, LayoutOptions(include_thresholds=False, exact_monotonicity=True, defaults=ds.defaults))
    model = penalty_monotonicity_exact(lay, ds, lambda0=10.0, lam=2.0)
    seen = set()
    for p in enumerate_partitions(5, m):
        value = evaluate(model, staircase_state(p, lay))
        monotone = check_monotonicity(grade_stats(ds, p))
        seen.add(monotone)
        assert (value == 0.0) == monotone
        assert value == pytest.approx(2.0 * sum(max(f, 0) ** 2 for f in _cross_terms(ds, p)))
    assert seen == {True, False}


def test_exact_monotonicity_needs_matching_layout():
    ds = from_default_positions(5, [2, 5])
    with pytest.raises(LayoutMismatchError):
        penalty_monotonicity_exact(layout(5, 3, NO_THRESHOLDS), ds, 1.0, 1.0)


def test_concentration_equals_scaled_herfindahl():
    n, m = 9, 3
    lay = layout(n, m, NO_THRESHOLDS)
    model = penalty_concentration(lay, 7.0)
    for p in enumerate_partitions(n, m):
        assert evaluate(model, staircase_x(p, m).ravel()) == pytest.approx(7.0 * herfindahl_adjusted(p), abs=1e-9)


def test_cardinality_vanishes_iff_within_bounds():
    lay = layout(8, 3, LayoutOptions(lambda1=2, lambda2=3))
    model = penalty_cardinality(lay, 1.5, 2.5)
    outcomes = set()
    for p in enumerate_partitions(8, 3):
        inside = check_cardinality(p, 2, 3)
        outcomes.add(inside)
        assert (evaluate(model, staircase_state(p, lay)) == 0.0) == inside
    assert outcomes == {True, False}
    with pytest.raises(LayoutMismatchError):
        penalty_cardinality(layout(8, 3, NO_THRESHOLDS), 1.0, 1.0)


def test_cardinality_minimum_over_slacks_is_zero_iff_within_bounds():
    lay = layout(5, 2, LayoutOptions(lambda1=1, lambda2=3))
    model = penalty_cardinality(lay, 1.5, 2.5)
    slacks = np.array(list(itertools.product((0, 1), repeat=lay.total_variables - lay.x_size)), dtype=np.int8)
    outcomes = set()
    for p in enumerate_partitions(5, 2):
        x = np.tile(staircase_x(p, 2).ravel(), (len(slacks), 1))
        best = float(model.energies(np.hstack([x, slacks])).min())
        inside = check_cardinality(p, 1, 3)
        outcomes.add(inside)
        if inside:
            assert best == pytest.approx(0.0, abs=1e-12)
        else:
            assert best > 1.0
    assert outcomes == {True, False}


@pytest.mark.parametrize("n, m", [(n, m) for n in range(3, 7) for m in (2, 3) if m <= n])
def test_logical_global_minimizers_among_one_hot_rows_are_the_staircases(n, m):
    lay = layout(n, m, NO_THRESHOLDS)
    model = penalty_logical_global(lay, LOGICAL)
    grades = np.array(list(itertools.product(range(m), repeat=n)))
    states = np.zeros((len(grades), n, m), dtype=np.int8)
    states[np.arange(len(grades))[:, None], np.arange(n), grades] = 1
    energies = model.energies(states.reshape(len(grades), -1))
    winners = {tuple(np.bincount(g, minlength=m)) for g in grades[energies <= energies.min() + 1e-9]}
    assert winners == {p.cardinalities for p in enumerate_partitions(n, m)}
    assert len(grades[energies <= energies.min() + 1e-9]) == len(winners)


def test_logical_global_rejects_valid_rows_in_the_wrong_column_order():
    lay = layout(5, 3, NO_THRESHOLDS)
    model = penalty_logical_global(lay, preset_weights(1, 5, 3, 2))
    # every row one-hot, every column contiguous, grades 2 and 3 swapped
    out_of_order = np.array([[1, 0, 0], [1, 0, 0], [0, 0, 1], [0, 0, 1], [0, 1, 0]])
    assert evaluate(model, out_of_order.ravel()) == pytest.approx(-1125)
    assert evaluate(model, staircase_x(Partition(cardinalities=(2, 2, 1)), 3).ravel()) == pytest.approx(-2400)


def test_approx_monotonicity_pairs_each_default_with_each_performer():
    ds = from_default_positions(5, [2, 3])
    model = penalty_monotonicity_approx(layout(5, 2, NO_THRESHOLDS), ds, 1.0)
    coefficients = list(model.quadratic.values())
    # d_i1 - d_i2 = -1 for 3 performers times 2 defaulters
    assert coefficients.count(-1.0) == 6
    assert coefficients.count(1.0) == 6


# --------------- Composition ---------------


def test_compose_sums_enabled_families():
    ds = from_default_positions(6, [5, 6])
    lay = layout(6, 3, LayoutOptions(lambda1=1, lambda2=3))
    model = compose(lay, WEIGHTS, ds)
    assert model.dimension == lay.total_variables
    p = Partition(cardinalities=(2, 2, 2))
    state = staircase_state(p, lay)
    parts = [
        penalty_logical_global(lay, WEIGHTS),
        penalty_monotonicity_approx(lay, ds, WEIGHTS.mu1),
        penalty_concentration(lay, WEIGHTS.mu3),
        penalty_cardinality(lay, WEIGHTS.mu41, WEIGHTS.mu42),
    ]
    assert evaluate(model, state) == pytest.approx(sum(evaluate(q, state) for q in parts))


def test_scaled_weights_scale_energies_and_keep_the_minimizer():
    ds = from_default_positions(6, [5, 6])
    lay = layout(6, 3, LayoutOptions(lambda1=1, lambda2=3))
    base = compose(lay, WEIGHTS, ds)
    tripled = compose(lay, WEIGHTS.scaled(3.0), ds)
    partitions = list(enumerate_partitions(6, 3))
    states = np.stack([staircase_state(p, lay) for p in partitions])
    low, high = base.energies(states), tripled.energies(states)
    np.testing.assert_allclose(high, 3.0 * low)
    assert set(np.flatnonzero(high <= high.min() + 1e-6)) == set(np.flatnonzero(low <= low.min() + 1e-6))
    assert LOGICAL.scaled(2.0).mu3 is None


def test_compose_local_variant_without_extras():
    ds = from_default_positions(6, [5, 6])
    lay = layout(6, 3, NO_THRESHOLDS)
    options = ComposeOptions(logical=LogicalVariant.LOCAL, monotonicity=MonotonicityVariant.OFF,
                             concentration=False, thresholds=False)
    assert compose(lay, WEIGHTS, ds, options) == penalty_logical_local(lay, WEIGHTS)


def test_compose_rejects_mismatches():
    ds = from_default_positions(6, [5, 6])
    with pytest.raises(LayoutMismatchError, match="include_thresholds"):
        compose(layout(6, 3, NO_THRESHOLDS), WEIGHTS, ds)
    with pytest.raises(LayoutMismatchError, match="exact_monotonicity"):
        compose(layout(6, 3, NO_THRESHOLDS), WEIGHTS, ds,
                ComposeOptions(monotonicity=MonotonicityVariant.EXACT, thresholds=False))
    with pytest.raises(LayoutMismatchError):
        compose(layout(7, 3, NO_THRESHOLDS), WEIGHTS, ds, ComposeOptions(thresholds=False))
    with pytest.raises(RatingScaleError, match="mu3"):
        compose(layout(6, 3, NO_THRESHOLDS), WEIGHTS.model_copy(update={"mu3": 0.0}), ds,
                ComposeOptions(thresholds=False))


def test_preset_weights():
    w = preset_weights(1, 150, 9, 6)
    assert w.mu01 == 1350 ** 2
    assert w.mu02 == 5 * 1350
    assert w.mu03 == w.mu04 == 40 * 1350
    assert w.mu1 == 30
    assert w.mu3 == pytest.approx(1500 / 9)
    assert w.mu41 == w.mu42 == pytest.approx(750 / 9)
    assert w.lambda0 == 0.0

    w2 = preset_weights(2, 150, 4, 18, exact=True)
    assert w2.mu01 == 4 * 600 ** 2
    assert w2.mu03 == 75 * 600
    assert w2.mu1 == 12 * 18
    assert w2.mu41 == pytest.approx(w2.mu3 / 2)
    assert w2.lambda0 == w2.mu03
    assert w2.lambda_exact == w2.mu1
    with pytest.raises(RatingScaleError):
        preset_weights(3, 10, 2, 1)


# --------------- Staircase encoding ---------------


def test_staircase_x():
    x = staircase_x(Partition(cardinalities=(2, 1)), 2)
    assert x.tolist() == [[1, 0], [1, 0], [0, 1]]


def test_staircase_state_fills_slacks():
    lay = layout(4, 3, LayoutOptions(lambda1=1, lambda2=2))
    state = staircase_state(Partition(cardinalities=(2, 1, 1)), lay)
    # grade 1: N - lambda1 = 1 and lambda2 - N = 0
    assert state[lay.s1_index(0, 1)] == 1 and state[lay.s1_index(1, 1)] == 0
    assert state[lay.s2_index(0, 1)] == 0 and state[lay.s2_index(1, 1)] == 0
    # grade 2: N - lambda1 = 0 and lambda2 - N = 1
    assert state[lay.s1_index(0, 2)] == 0
    assert state[lay.s2_index(0, 2)] == 1
    with pytest.raises(LayoutMismatchError):
        staircase_state(Partition(cardinalities=(2, 3)), lay)
