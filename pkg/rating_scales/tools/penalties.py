"""Rating-scale cost function: variable layout, penalty families, and composition.

Counterparts i and grades j are 1-based throughout, matching the staircase matrix x[i][j]
(row i is a counterpart, column j a grade). Flat variable indices are 0-based.
"""

from __future__ import annotations

import logging
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from rating_scales.config import EXACT_MONOTONICITY_CAP, default_thresholds
from rating_scales.errors import (
    InfeasibleThresholdsError,
    InstanceTooLargeError,
    LayoutMismatchError,
    RatingScaleError,
)
from rating_scales.models import (
    ComposeOptions,
    Dataset,
    LayoutOptions,
    LogicalVariant,
    MonotonicityVariant,
    Partition,
    PenaltyWeights,
    VariableLayout,
)
from rating_scales.tools.qubo import QuboBuilder, QuboModel, combine, penalty_inequality_slack

logger = logging.getLogger(__name__)

Triple = Tuple[int, int, int]


# --------------- Layout ---------------


def check_feasible_thresholds(n: int, m: int, lambda1: int, lambda2: int) -> None:
    """Raise InfeasibleThresholdsError unless m*lambda1 <= n <= m*lambda2."""
    if lambda1 < 0 or lambda2 < 1:
        raise InfeasibleThresholdsError(f"thresholds must satisfy lambda1 >= 0 and lambda2 >= 1, got ({lambda1}, {lambda2})")
    if lambda1 > lambda2:
        raise InfeasibleThresholdsError(f"lambda1 <= lambda2 violated: {lambda1} > {lambda2}")
    if m * lambda1 > n:
        raise InfeasibleThresholdsError(f"m*lambda1 <= n violated: {m}*{lambda1} = {m * lambda1} > {n}")
    if n > m * lambda2:
        raise InfeasibleThresholdsError(f"n <= m*lambda2 violated: {n} > {m}*{lambda2} = {m * lambda2}")


def layout(n: int, m: int, options: Optional[LayoutOptions] = None) -> VariableLayout:
    """Size every variable block for an n x m staircase.

    Args:
        n: Counterparts.
        m: Grades, 2 <= m <= n.
        options: Threshold and exact-monotonicity switches. lambda1/lambda2 default to
            max(1, floor(n/100)) and ceil(15n/100). The exact y-block needs ``defaults``.

    Returns:
        VariableLayout with x at 0, then s1, s2, y and s_y blocks.
    """
    options = options or LayoutOptions()
    if not 2 <= m <= n:
        raise RatingScaleError(f"need 2 <= m <= n, got n={n}, m={m}")

    lambda1 = lambda2 = nbar1 = nbar2 = 0
    if options.include_thresholds:
        d_l1, d_l2 = default_thresholds(n)
        lambda1 = d_l1 if options.lambda1 is None else options.lambda1
        lambda2 = d_l2 if options.lambda2 is None else options.lambda2
        check_feasible_thresholds(n, m, lambda1, lambda2)
        nbar1 = (n - lambda1).bit_length()
        nbar2 = lambda2.bit_length()

    d = n_y = y_size = 0
    defaults = None
    if options.exact_monotonicity:
        if options.defaults is None or len(options.defaults) != n:
            raise LayoutMismatchError("exact monotonicity needs the length-n default vector")
        defaults = tuple(int(v) for v in options.defaults)
        d = sum(defaults)
        if not 1 <= d <= n - 1:
            raise RatingScaleError(f"exact monotonicity is defined only for 1 <= d <= n-1, got d={d}")
        n_y = ((n - d) * d).bit_length()
        y_size = 2 * (m - 1) * (n - d) * d

    s1_offset = n * m
    s2_offset = s1_offset + m * nbar1
    y_offset = s2_offset + m * nbar2
    sy_offset = y_offset + y_size
    total = sy_offset + (m - 1) * n_y if options.exact_monotonicity else sy_offset

    if options.exact_monotonicity and total > EXACT_MONOTONICITY_CAP and not options.allow_large:
        raise InstanceTooLargeError(
            f"exact monotonicity layout needs {total} variables (cap {EXACT_MONOTONICITY_CAP}); "
            "pass allow_large to build it anyway"
        )

    out = VariableLayout(
        n=n, m=m,
        include_thresholds=options.include_thresholds,
        lambda1=lambda1, lambda2=lambda2, nbar1=nbar1, nbar2=nbar2,
        exact_monotonicity=options.exact_monotonicity,
        d=d, n_y=n_y, defaults=defaults,
        s1_offset=s1_offset, s2_offset=s2_offset, y_offset=y_offset, sy_offset=sy_offset,
        total_variables=total,
    )
    logger.debug("layout n=%d m=%d total=%d", n, m, total)
    return out


def exact_triples(lay: VariableLayout) -> List[Triple]:
    """(i1, i2, j) with d_i1 != d_i2 and j < m, in lexicographic order; position = y offset."""
    if not lay.exact_monotonicity or lay.defaults is None:
        raise LayoutMismatchError("layout has no exact-monotonicity block")
    dv = lay.defaults
    return [
        (i1, i2, j)
        for i1 in range(1, lay.n + 1)
        for i2 in range(1, lay.n + 1)
        if dv[i1 - 1] != dv[i2 - 1]
        for j in range(1, lay.m)
    ]


# --------------- Logical (staircase) penalties ---------------


def _uniqueness_and_endpoints(builder: QuboBuilder, lay: VariableLayout, w: PenaltyWeights) -> None:
    for i in range(1, lay.n + 1):
        builder.add_square({lay.x_index(i, j): 1 for j in range(1, lay.m + 1)}, -1, w.mu01)
    # linear, not squared
    builder.add_constant(2 * w.mu02)
    builder.add_linear(lay.x_index(1, 1), -w.mu02)
    builder.add_linear(lay.x_index(lay.n, lay.m), -w.mu02)


def penalty_logical_global(lay: VariableLayout, w: PenaltyWeights) -> QuboModel:
    """Row uniqueness, endpoints, and rewards for vertical runs and one-step diagonal moves.

    On any staircase the value is -mu03*(n - m) - mu04*(m - 1).
    """
    b = QuboBuilder(lay.total_variables)
    _uniqueness_and_endpoints(b, lay, w)
    x = lay.x_index
    for i in range(1, lay.n):
        for j in range(1, lay.m + 1):
            b.add_quadratic(x(i, j), x(i + 1, j), -w.mu03)
            if j < lay.m:
                b.add_quadratic(x(i, j), x(i + 1, j + 1), -w.mu04)
    return b.build()


def penalty_logical_local(lay: VariableLayout, w: PenaltyWeights) -> QuboModel:
    """Row uniqueness, endpoints, and penalties on forbidden 2x2 windows of the staircase.

    Windows [[1,0],[0,0]], [[0,0],[0,1]] and [[0,1],[1,0]] are forbidden; [[0,0],[1,0]]
    (a run restarting) gets the weak weight mu07, which costs mu07*(m - 2) on every staircase.
    """
    b = QuboBuilder(lay.total_variables)
    _uniqueness_and_endpoints(b, lay, w)
    mu04, mu05, mu06, mu07 = w.mu04, w.local("mu05"), w.local("mu06"), w.local("mu07")
    x = lay.x_index
    for i in range(1, lay.n):
        for j in range(1, lay.m):
            a, bb = x(i, j), x(i, j + 1)
            c, e = x(i + 1, j), x(i + 1, j + 1)
            # (1 - c - e) a + c e
            b.add_linear(a, mu04).add_quadratic(a, c, -mu04).add_quadratic(a, e, -mu04).add_quadratic(c, e, mu04)
            # (1 - a - bb) e + a bb
            b.add_linear(e, mu05).add_quadratic(a, e, -mu05).add_quadratic(bb, e, -mu05).add_quadratic(a, bb, mu05)
            b.add_quadratic(bb, c, mu06)
            # restart: (1 - a - bb) c + a bb
            b.add_linear(c, mu07).add_quadratic(a, c, -mu07).add_quadratic(bb, c, -mu07).add_quadratic(a, bb, mu07)
    return b.build()


# --------------- Monotonicity ---------------


def penalty_monotonicity_approx(lay: VariableLayout, ds: Dataset, mu1: float) -> QuboModel:
    """mu1 * sum_{i1, i2, j<m} (d_i1 - d_i2) x[i1][j] x[i2][j+1]; no extra variables.

    On a staircase this is mu1 * sum_j (D_j N_{j+1} - N_j D_{j+1}), the cross-multiplied
    default-rate differences.
    """
    if ds.n != lay.n:
        raise LayoutMismatchError(f"dataset has n={ds.n}, layout n={lay.n}")
    b = QuboBuilder(lay.total_variables)
    dv = ds.defaults
    bad = [i for i in range(1, lay.n + 1) if dv[i - 1]]
    good = [i for i in range(1, lay.n + 1) if not dv[i - 1]]
    for j in range(1, lay.m):
        for i1 in bad:
            for i2 in good:
                # d_i1 - d_i2 = +1 and the mirrored pair gives -1
                b.add_quadratic(lay.x_index(i1, j), lay.x_index(i2, j + 1), mu1)
                b.add_quadratic(lay.x_index(i2, j), lay.x_index(i1, j + 1), -mu1)
    return b.build()


def rosenberg(x1: int, x2: int, y: int, weight) -> QuboModel:
    """weight * (x1 x2 + 3y - 2 x1 y - 2 x2 y): zero iff y = x1 x2."""
    dim = max(x1, x2, y) + 1
    b = QuboBuilder(dim)
    b.add_quadratic(x1, x2, weight).add_linear(y, 3 * weight)
    b.add_quadratic(x1, y, -2 * weight).add_quadratic(x2, y, -2 * weight)
    return b.build()


def penalty_monotonicity_exact(
    lay: VariableLayout, ds: Dataset, lambda0: float, lam: float
) -> QuboModel:
    """Linearized monotonicity: y = x[i1][j] x[i2][j+1] by gadget, then a slack square per j.

    For each j < m the inequality sum_{C+} y - sum_{C-} y <= 0 (C- the pairs with
    d_i1 = 0, d_i2 = 1) is enforced as lam * (sum_{C+} y - sum_{C-} y + sum_l 2^l s_y)^2.
    """
    if not lay.exact_monotonicity:
        raise LayoutMismatchError("layout was built without exact monotonicity")
    if ds.n != lay.n or tuple(ds.defaults) != lay.defaults:
        raise LayoutMismatchError("dataset defaults differ from the layout's")
    if lambda0 <= 0 or lam <= 0:
        raise RatingScaleError("exact monotonicity needs lambda0 > 0 and lambda > 0")

    b = QuboBuilder(lay.total_variables)
    per_grade: Dict[int, Dict[int, int]] = {j: {} for j in range(1, lay.m)}
    dv = ds.defaults
    for t, (i1, i2, j) in enumerate(exact_triples(lay)):
        y = lay.y_offset + t
        b.add_model(rosenberg(lay.x_index(i1, j), lay.x_index(i2, j + 1), y, lambda0))
        per_grade[j][y] = dv[i1 - 1] - dv[i2 - 1]
    for j, coeffs in per_grade.items():
        slack = [lay.sy_index(level, j) for level in range(lay.n_y)]
        b.add_model(penalty_inequality_slack(coeffs, 0, lam, slack, dimension=lay.total_variables))
    return b.build()


# --------------- Concentration / cardinality ---------------


def penalty_concentration(lay: VariableLayout, mu3: float) -> QuboModel:
    """mu3 * [m / ((m-1) n^2) * sum_j N_j^2 - 1/(m-1)], equal to mu3 * H_adj on staircases."""
    n, m = lay.n, lay.m
    scale = Fraction(m, (m - 1) * n * n) * mu3
    b = QuboBuilder(lay.total_variables)
    b.add_constant(-Fraction(1, m - 1) * mu3)
    for j in range(1, m + 1):
        # N_j^2 = sum_i x + 2 sum_{i1<i2} x x
        for i1 in range(1, n + 1):
            b.add_linear(lay.x_index(i1, j), scale)
            for i2 in range(i1 + 1, n + 1):
                b.add_quadratic(lay.x_index(i1, j), lay.x_index(i2, j), 2 * scale)
    return b.build()


def penalty_cardinality(lay: VariableLayout, mu41: float, mu42: float) -> QuboModel:
    """Per grade: mu41 (N_j - lambda1 - S1_j)^2 + mu42 (lambda2 - N_j - S2_j)^2."""
    if not lay.include_thresholds:
        raise LayoutMismatchError("layout was built without threshold slacks")
    b = QuboBuilder(lay.total_variables)
    for j in range(1, lay.m + 1):
        lower = {lay.x_index(i, j): 1 for i in range(1, lay.n + 1)}
        for level in range(lay.nbar1):
            lower[lay.s1_index(level, j)] = -(1 << level)
        b.add_square(lower, -lay.lambda1, mu41)
        upper = {lay.x_index(i, j): -1 for i in range(1, lay.n + 1)}
        for level in range(lay.nbar2):
            upper[lay.s2_index(level, j)] = -(1 << level)
        b.add_square(upper, lay.lambda2, mu42)
    return b.build()


# --------------- Composition ---------------


def _require(name: str, value: float) -> None:
    if value <= 0:
        raise RatingScaleError(f"weight {name} must be > 0 for an enabled penalty")


def compose(
    lay: VariableLayout,
    w: PenaltyWeights,
    ds: Dataset,
    options: Optional[ComposeOptions] = None,
) -> QuboModel:
    """Sum of the enabled penalty families over one layout."""
    options = options or ComposeOptions()
    if ds.n != lay.n:
        raise LayoutMismatchError(f"dataset has n={ds.n}, layout n={lay.n}")
    exact = options.monotonicity == MonotonicityVariant.EXACT
    if exact != lay.exact_monotonicity:
        raise LayoutMismatchError(
            f"monotonicity={options.monotonicity.value} but layout exact_monotonicity={lay.exact_monotonicity}"
        )
    if options.thresholds != lay.include_thresholds:
        raise LayoutMismatchError(
            f"thresholds={options.thresholds} but layout include_thresholds={lay.include_thresholds}"
        )

    for name in ("mu01", "mu02", "mu03", "mu04"):
        _require(name, getattr(w, name))
    parts = []
    if options.logical == LogicalVariant.LOCAL:
        parts.append(penalty_logical_local(lay, w))
    else:
        parts.append(penalty_logical_global(lay, w))
    if options.monotonicity == MonotonicityVariant.APPROX:
        _require("mu1", w.mu1)
        parts.append(penalty_monotonicity_approx(lay, ds, w.mu1))
    elif exact:
        parts.append(penalty_monotonicity_exact(lay, ds, w.lambda0, w.lambda_exact))
    if options.concentration:
        _require("mu3", w.mu3)
        parts.append(penalty_concentration(lay, w.mu3))
    if options.thresholds:
        _require("mu41", w.mu41)
        _require("mu42", w.mu42)
        parts.append(penalty_cardinality(lay, w.mu41, w.mu42))
    model = combine(parts).with_dimension(lay.total_variables)
    logger.info("composed model: %d variables, %d terms", model.dimension, model.term_count)
    return model


def preset_weights(set_id: int, n: int, m: int, d: int, exact: bool = False) -> PenaltyWeights:
    """Two validated weight sets scaled to the instance size.

    ``exact`` also fills lambda0 (gadget) with mu03 and lambda with mu1.
    """
    nm = n * m
    if set_id == 1:
        mu3 = 10 * n / m
        w = dict(mu01=nm ** 2, mu02=5 * nm, mu03=40 * nm, mu04=40 * nm, mu1=5 * d, mu3=mu3,
                 mu41=5 * n / m, mu42=5 * n / m)
    elif set_id == 2:
        mu3 = 3 * n / m
        w = dict(mu01=4 * nm ** 2, mu02=5 * nm, mu03=75 * nm, mu04=75 * nm, mu1=12 * d, mu3=mu3,
                 mu41=mu3 / 2, mu42=mu3 / 2)
    else:
        raise RatingScaleError(f"preset set_id must be 1 or 2, got {set_id}")
    if exact:
        w["lambda0"] = w["mu03"]
        w["lambda_exact"] = max(w["mu1"], 1)
    return PenaltyWeights(**w)


# --------------- Staircase encoding ---------------


def staircase_x(p: Partition, m: int) -> np.ndarray:
    """n x m 0/1 staircase matrix of a partition."""
    x = np.zeros((p.n, m), dtype=np.int8)
    x[np.arange(p.n), np.asarray(p.grade_of()) - 1] = 1
    return x


def _bits(value: int, width: int) -> List[int]:
    return [(value >> level) & 1 for level in range(width)]


def complete_slacks(state: Sequence[int], lay: VariableLayout) -> np.ndarray:
    """Return a copy of ``state`` with every auxiliary bit set optimally for its x-block.

    s1/s2 take the clipped threshold residuals, y the products x[i1][j] x[i2][j+1], and s_y
    the clipped negative of each grade pair's linear monotonicity form.
    """
    out = np.array(state, dtype=np.int8)
    if out.shape[0] != lay.total_variables:
        raise LayoutMismatchError(f"state has {out.shape[0]} bits, layout needs {lay.total_variables}")
    x = out[: lay.x_size].reshape(lay.n, lay.m)
    counts = x.sum(axis=0)
    if lay.include_thresholds:
        cap1, cap2 = (1 << lay.nbar1) - 1, (1 << lay.nbar2) - 1
        for j in range(1, lay.m + 1):
            r1 = min(max(int(counts[j - 1]) - lay.lambda1, 0), cap1)
            r2 = min(max(lay.lambda2 - int(counts[j - 1]), 0), cap2)
            for level, bit in enumerate(_bits(r1, lay.nbar1)):
                out[lay.s1_index(level, j)] = bit
            for level, bit in enumerate(_bits(r2, lay.nbar2)):
                out[lay.s2_index(level, j)] = bit
    if lay.exact_monotonicity:
        dv = lay.defaults
        forms = {j: 0 for j in range(1, lay.m)}
        for t, (i1, i2, j) in enumerate(exact_triples(lay)):
            y = int(x[i1 - 1, j - 1] and x[i2 - 1, j])
            out[lay.y_offset + t] = y
            forms[j] += (dv[i1 - 1] - dv[i2 - 1]) * y
        cap_y = (1 << lay.n_y) - 1
        for j, value in forms.items():
            for level, bit in enumerate(_bits(min(max(-value, 0), cap_y), lay.n_y)):
                out[lay.sy_index(level, j)] = bit
    return out


def staircase_state(p: Partition, lay: VariableLayout) -> np.ndarray:
    """Full variable string for a partition: staircase x-block plus optimal auxiliaries."""
    if p.n != lay.n or p.m != lay.m:
        raise LayoutMismatchError(f"partition is {p.n}x{p.m}, layout is {lay.n}x{lay.m}")
    state = np.zeros(lay.total_variables, dtype=np.int8)
    state[: lay.x_size] = staircase_x(p, lay.m).ravel()
    return complete_slacks(state, lay)
