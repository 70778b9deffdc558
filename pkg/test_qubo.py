"""QuboModel, the builder, penalty translators and the v1 text format."""
import itertools
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

import numpy as np
import pytest

from rating_scales.errors import LayoutMismatchError, ModelFormatError, RatingScaleError
from rating_scales.tools.qubo import (
    QuboBuilder,
    QuboModel,
    combine,
    evaluate,
    export_model,
    import_model,
    penalty_equality,
    penalty_inequality_slack,
    slack_width,
)


def _sample_model():
    return QuboModel(4, 1.5, {0: -2.0, 2: 0.25, 3: 1.0}, {(0, 1): 3.0, (1, 3): -1.5, (2, 3): 0.5})


def test_model_keeps_canonical_terms_only():
    with pytest.raises(RatingScaleError, match="canonical"):
        QuboModel(3, 0.0, {}, {(2, 1): 1.0})
    with pytest.raises(RatingScaleError):
        QuboModel(2, 0.0, {2: 1.0})
    model = QuboModel(3, 0.0, {0: 0.0, 1: 2.0}, {(0, 2): 0.0})
    assert model.linear == {1: 2.0}
    assert model.quadratic == {}
    assert model.term_count == 1


def test_builder_folds_diagonal_into_linear():
    model = QuboBuilder(3).add_quadratic(1, 1, 2).add_quadratic(2, 0, 4).add_linear(1, 1).build()
    assert model.linear == {1: 3.0}
    assert model.quadratic == {(0, 2): 4.0}


def test_add_square_expands_exactly():
    model = QuboBuilder(2).add_square({0: 1, 1: 1}, -1, weight=2).build()
    assert model.offset == 2.0
    assert model.linear == {0: -2.0, 1: -2.0}
    assert model.quadratic == {(0, 1): 4.0}
    assert [evaluate(model, s) for s in [(0, 0), (1, 0), (0, 1), (1, 1)]] == [2.0, 0.0, 0.0, 2.0]


def test_evaluate_matches_dense_matrix():
    model = _sample_model()
    q = model.to_dense()
    for state in itertools.product((0, 1), repeat=4):
        x = np.array(state, dtype=float)
        assert evaluate(model, state) == pytest.approx(x @ q @ x + model.offset)


def test_energies_vectorized():
    model = _sample_model()
    states = np.array(list(itertools.product((0, 1), repeat=4)))
    assert model.energies(states) == pytest.approx([evaluate(model, s) for s in states])
    with pytest.raises(RatingScaleError):
        evaluate(model, (0, 1))


def test_csr_is_symmetric_with_empty_diagonal():
    csr = _sample_model().to_csr().toarray()
    assert np.array_equal(csr, csr.T)
    assert not np.diag(csr).any()
    assert csr[1, 3] == -1.5


def test_combine_and_add():
    a = QuboModel(2, 1.0, {0: 1.0}, {(0, 1): 2.0})
    b = QuboModel(3, -1.0, {0: -1.0, 2: 4.0})
    total = a + b
    assert total.dimension == 3
    assert total.offset == 0.0
    assert total.linear == {2: 4.0}
    assert total.quadratic == {(0, 1): 2.0}
    assert combine([]).dimension == 0
    assert a.scaled(2.0) == QuboModel(2, 2.0, {0: 2.0}, {(0, 1): 4.0})


def test_penalty_equality_is_zero_exactly_on_solutions():
    coeffs = {0: 1, 1: 2, 2: 1}
    model = penalty_equality(coeffs, 2, 3.0)
    for state in itertools.product((0, 1), repeat=3):
        lhs = sum(c * state[i] for i, c in coeffs.items())
        assert evaluate(model, state) == pytest.approx(3.0 * (lhs - 2) ** 2)
    with pytest.raises(RatingScaleError):
        penalty_equality(coeffs, 2, 0.0)


def test_slack_width():
    assert slack_width({0: 2, 1: 3}, 4) == 3
    assert slack_width({0: -1, 1: 2}, 0) == 1
    assert slack_width({0: 1, 1: -1}, -1) == 0
    with pytest.raises(RatingScaleError, match="infeasible"):
        slack_width({0: 1}, -1)


def test_inequality_slack_minimum_is_zero_iff_feasible():
    coeffs = {0: 1, 1: 2, 2: -1}
    D = 2
    slack = [3, 4]
    assert slack_width(coeffs, D) == len(slack)
    model = penalty_inequality_slack(coeffs, D, 2.0, slack)
    for x in itertools.product((0, 1), repeat=3):
        best = min(evaluate(model, x + s) for s in itertools.product((0, 1), repeat=2))
        feasible = sum(c * x[i] for i, c in coeffs.items()) <= D
        assert (best == 0.0) == feasible


def test_inequality_slack_layout_errors():
    with pytest.raises(LayoutMismatchError, match="slack needs"):
        penalty_inequality_slack({0: 1}, 2, 1.0, [1])
    with pytest.raises(LayoutMismatchError, match="collide"):
        penalty_inequality_slack({0: 1}, 2, 1.0, [0, 1])
    with pytest.raises(LayoutMismatchError, match="exceeds dimension"):
        penalty_inequality_slack({0: 1}, 2, 1.0, [1, 2], dimension=2)


def test_export_import(tmp_path):
    model = QuboModel(5, 0.1, {0: 1 / 3, 4: -2.5}, {(0, 4): 1e-12, (1, 2): 7.0})
    path = export_model(model, tmp_path / "m.qubo")
    lines = path.read_text().splitlines()
    assert lines[0] == "qubo v1 dim=5 offset=0.1"
    assert lines[1].startswith("L 0 ")
    assert import_model(path) == model


def test_import_normalizes_and_skips_comments(tmp_path):
    path = tmp_path / "m.qubo"
    path.write_text("qubo v1 dim=3 offset=1.0\n# comment\n\nQ 2 0 1.5\nQ 0 2 0.5\nL 1 -1\n")
    model = import_model(path)
    assert model.quadratic == {(0, 2): 2.0}
    assert model.linear == {1: -1.0}
    assert model.offset == 1.0


@pytest.mark.parametrize(
    "body, message",
    [
        ("", "empty"),
        ("qubo v2 dim=2 offset=0\n", "bad header"),
        ("qubo v1 dim=x offset=0\n", "bad header"),
        ("qubo v1 dim=2 offset=0\nL 0\n", "malformed"),
        ("qubo v1 dim=2 offset=0\nX 0 1\n", "malformed"),
        ("qubo v1 dim=2 offset=0\nQ 0 2 1.0\n", "out of range"),
    ],
)
def test_import_rejects_bad_files(tmp_path, body, message):
    path = tmp_path / "bad.qubo"
    path.write_text(body)
    with pytest.raises(ModelFormatError, match=message):
        import_model(path)
