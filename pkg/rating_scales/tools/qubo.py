"""Generic QUBO container, accumulator, penalty translators, and the v1 text format."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse

from rating_scales.errors import LayoutMismatchError, ModelFormatError, RatingScaleError

logger = logging.getLogger(__name__)

FORMAT_HEADER = "qubo v1"

Pair = Tuple[int, int]


class QuboModel:
    """offset + sum_i linear[i] x_i + sum_{i<j} quadratic[(i, j)] x_i x_j over ``dimension`` bits.

    Immutable once built. Array views used by the solvers are computed lazily and cached.
    """

    __slots__ = ("dimension", "offset", "_linear", "_quadratic", "_arrays", "_csr")

    def __init__(
        self,
        dimension: int,
        offset: float = 0.0,
        linear: Optional[Mapping[int, float]] = None,
        quadratic: Optional[Mapping[Pair, float]] = None,
    ):
        if dimension < 0:
            raise RatingScaleError(f"dimension must be >= 0, got {dimension}")
        self.dimension = int(dimension)
        self.offset = float(offset)
        self._linear: Dict[int, float] = {}
        self._quadratic: Dict[Pair, float] = {}
        for i, c in (linear or {}).items():
            if c:
                self._check_index(i)
                self._linear[int(i)] = float(c)
        for (i, j), c in (quadratic or {}).items():
            if not c:
                continue
            if i == j or i > j:
                raise RatingScaleError(f"quadratic key ({i}, {j}) is not canonical i<j")
            self._check_index(j)
            self._check_index(i)
            self._quadratic[(int(i), int(j))] = float(c)
        self._arrays = None
        self._csr = None

    def _check_index(self, i: int) -> None:
        if not 0 <= i < self.dimension:
            raise RatingScaleError(f"index {i} out of range for dimension {self.dimension}")

    @property
    def linear(self) -> Dict[int, float]:
        return dict(self._linear)

    @property
    def quadratic(self) -> Dict[Pair, float]:
        return dict(self._quadratic)

    @property
    def term_count(self) -> int:
        return len(self._linear) + len(self._quadratic)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, QuboModel):
            return NotImplemented
        return (
            self.dimension == other.dimension
            and self.offset == other.offset
            and self._linear == other._linear
            and self._quadratic == other._quadratic
        )

    def __repr__(self) -> str:
        return (
            f"QuboModel(dimension={self.dimension}, offset={self.offset!r}, "
            f"linear={len(self._linear)}, quadratic={len(self._quadratic)})"
        )

    def __add__(self, other: "QuboModel") -> "QuboModel":
        return combine([self, other])

    def arrays(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(linear vector, pair rows, pair cols, pair values)."""
        if self._arrays is None:
            lin = np.zeros(self.dimension, dtype=np.float64)
            for i, c in self._linear.items():
                lin[i] = c
            if self._quadratic:
                keys = np.array(list(self._quadratic.keys()), dtype=np.int64)
                vals = np.fromiter(self._quadratic.values(), dtype=np.float64, count=len(self._quadratic))
                rows, cols = keys[:, 0], keys[:, 1]
            else:
                rows = cols = np.zeros(0, dtype=np.int64)
                vals = np.zeros(0, dtype=np.float64)
            self._arrays = (lin, rows, cols, vals)
        return self._arrays

    def to_csr(self) -> sparse.csr_matrix:
        """Symmetric coupling matrix J with J[i, j] = J[j, i] = Q_ij and an empty diagonal."""
        if self._csr is None:
            _, rows, cols, vals = self.arrays()
            coo = sparse.coo_matrix(
                (np.concatenate([vals, vals]), (np.concatenate([rows, cols]), np.concatenate([cols, rows]))),
                shape=(self.dimension, self.dimension),
            )
            self._csr = coo.tocsr()
            self._csr.sort_indices()
        return self._csr

    def to_dense(self) -> np.ndarray:
        """Upper-triangular matrix with the linear terms on the diagonal (x^T Q x + offset)."""
        lin, rows, cols, vals = self.arrays()
        q = np.diag(lin)
        q[rows, cols] = vals
        return q

    def energies(self, states: np.ndarray) -> np.ndarray:
        """Vectorized evaluation over a (k, dimension) 0/1 array."""
        states = np.atleast_2d(np.asarray(states, dtype=np.float64))
        if states.shape[1] != self.dimension:
            raise RatingScaleError(f"states have {states.shape[1]} bits, model has {self.dimension}")
        lin, rows, cols, vals = self.arrays()
        return self.offset + states @ lin + (states[:, rows] * states[:, cols]) @ vals

    def scaled(self, factor: float) -> "QuboModel":
        return QuboModel(
            self.dimension,
            self.offset * factor,
            {i: c * factor for i, c in self._linear.items()},
            {k: c * factor for k, c in self._quadratic.items()},
        )

    def with_dimension(self, dimension: int) -> "QuboModel":
        return QuboModel(dimension, self.offset, self._linear, self._quadratic)


class QuboBuilder:
    """Mutable accumulator; coefficients stay exact (int or Fraction) until :meth:`build`."""

    def __init__(self, dimension: int):
        self.dimension = dimension
        self.offset = 0
        self.linear: Dict[int, float] = {}
        self.quadratic: Dict[Pair, float] = {}

    def add_constant(self, c) -> "QuboBuilder":
        self.offset += c
        return self

    def add_linear(self, i: int, c) -> "QuboBuilder":
        if c:
            self.linear[i] = self.linear.get(i, 0) + c
        return self

    def add_quadratic(self, i: int, j: int, c) -> "QuboBuilder":
        if not c:
            return self
        if i == j:
            # x^2 = x
            return self.add_linear(i, c)
        key = (i, j) if i < j else (j, i)
        self.quadratic[key] = self.quadratic.get(key, 0) + c
        return self

    def add_square(self, terms: Mapping[int, int], constant: int = 0, weight=1) -> "QuboBuilder":
        """Add weight * (sum_l terms[l] x_l + constant)^2, expanded with integer arithmetic."""
        items = [(i, c) for i, c in terms.items() if c]
        self.add_constant(weight * constant * constant)
        for i, c in items:
            self.add_linear(i, weight * (c * c + 2 * c * constant))
        for a in range(len(items)):
            i, ci = items[a]
            for b in range(a + 1, len(items)):
                j, cj = items[b]
                self.add_quadratic(i, j, weight * 2 * ci * cj)
        return self

    def add_model(self, model: QuboModel, scale=1) -> "QuboBuilder":
        self.add_constant(model.offset * scale)
        for i, c in model.linear.items():
            self.add_linear(i, c * scale)
        for (i, j), c in model.quadratic.items():
            self.add_quadratic(i, j, c * scale)
        return self

    def build(self, dimension: Optional[int] = None) -> QuboModel:
        dim = self.dimension if dimension is None else dimension
        model = QuboModel(
            dim,
            float(self.offset),
            {i: float(c) for i, c in self.linear.items() if c},
            {k: float(c) for k, c in self.quadratic.items() if c},
        )
        logger.debug("built %r", model)
        return model


def _dimension_for(indices: Iterable[int], dimension: Optional[int]) -> int:
    top = max(indices, default=-1) + 1
    if dimension is None:
        return top
    if top > dimension:
        raise LayoutMismatchError(f"index {top - 1} exceeds dimension {dimension}")
    return dimension


def evaluate(model: QuboModel, state: Sequence[int]) -> float:
    """Cost of one bit string: offset plus every linear and quadratic term over set bits."""
    if len(state) != model.dimension:
        raise RatingScaleError(f"state has {len(state)} bits, model has {model.dimension}")
    return float(model.energies(np.asarray(state).reshape(1, -1))[0])


def combine(models: Sequence[QuboModel]) -> QuboModel:
    """Coefficient-wise sum; the result spans the widest input."""
    models = list(models)
    dim = max((m.dimension for m in models), default=0)
    builder = QuboBuilder(dim)
    for m in models:
        builder.add_model(m)
    return builder.build()


def penalty_equality(
    coeffs: Mapping[int, int], G: int, mu: float, dimension: Optional[int] = None
) -> QuboModel:
    """mu * (sum_l p_l x_l - G)^2."""
    if mu <= 0:
        raise RatingScaleError(f"penalty weight must be > 0, got {mu}")
    dim = _dimension_for(coeffs.keys(), dimension)
    return QuboBuilder(dim).add_square(coeffs, -G, mu).build()


def slack_width(coeffs: Mapping[int, int], D: int) -> int:
    """Bits needed for a slack covering D - min(sum q_l x_l); floor(1 + log2(range)) or 0."""
    lowest = sum(c for c in coeffs.values() if c < 0)
    span = D - lowest
    if span < 0:
        raise RatingScaleError(f"inequality sum q x <= {D} is infeasible (minimum of lhs is {lowest})")
    return int(span).bit_length()


def penalty_inequality_slack(
    coeffs: Mapping[int, int],
    D: int,
    mu: float,
    slack_indices: Sequence[int],
    dimension: Optional[int] = None,
) -> QuboModel:
    """mu * (D - sum_l q_l x_l - sum_l 2^l s_l)^2 for the inequality sum q x <= D."""
    if mu <= 0:
        raise RatingScaleError(f"penalty weight must be > 0, got {mu}")
    width = slack_width(coeffs, D)
    if len(slack_indices) != width:
        raise LayoutMismatchError(f"slack needs {width} bits, got {len(slack_indices)}")
    overlap = set(coeffs) & set(slack_indices)
    if overlap:
        raise LayoutMismatchError(f"slack indices {sorted(overlap)} collide with decision variables")
    terms: Dict[int, int] = {i: -c for i, c in coeffs.items()}
    for level, s in enumerate(slack_indices):
        terms[s] = -(1 << level)
    dim = _dimension_for(list(terms.keys()), dimension)
    return QuboBuilder(dim).add_square(terms, D, mu).build()


# --------------- v1 text format ---------------


def export_model(model: QuboModel, path: str | Path) -> Path:
    """Write ``qubo v1 dim=<D> offset=<q>`` then one ``L i c`` / ``Q i j c`` line per term."""
    path = Path(path)
    lines = [f"{FORMAT_HEADER} dim={model.dimension} offset={model.offset!r}"]
    lines += [f"L {i} {c!r}" for i, c in sorted(model.linear.items())]
    lines += [f"Q {i} {j} {c!r}" for (i, j), c in sorted(model.quadratic.items())]
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _parse_header(line: str) -> Tuple[int, float]:
    parts = line.split()
    if len(parts) != 4 or " ".join(parts[:2]) != FORMAT_HEADER:
        raise ModelFormatError(f"bad header {line!r}")
    fields = dict(p.split("=", 1) for p in parts[2:] if "=" in p)
    try:
        return int(fields["dim"]), float(fields["offset"])
    except (KeyError, ValueError) as exc:
        raise ModelFormatError(f"bad header {line!r}") from exc


def import_model(path: str | Path) -> QuboModel:
    """Read a v1 file; ``Q j i`` with j > i is normalized to ``(i, j)``."""
    path = Path(path)
    raw = [ln.strip() for ln in path.read_text(encoding="utf-8").splitlines()]
    raw = [ln for ln in raw if ln and not ln.startswith("#")]
    if not raw:
        raise ModelFormatError(f"{path}: empty file")
    dim, offset = _parse_header(raw[0])
    builder = QuboBuilder(dim).add_constant(offset)
    for lineno, line in enumerate(raw[1:], start=2):
        parts = line.split()
        try:
            if parts[0] == "L" and len(parts) == 3:
                idx, coeff = [int(parts[1])], float(parts[2])
            elif parts[0] == "Q" and len(parts) == 4:
                idx, coeff = [int(parts[1]), int(parts[2])], float(parts[3])
            else:
                raise ValueError(line)
        except ValueError as exc:
            raise ModelFormatError(f"{path}:{lineno}: malformed term {line!r}") from exc
        bad = [i for i in idx if not 0 <= i < dim]
        if bad:
            raise ModelFormatError(f"{path}:{lineno}: index {bad[0]} out of range for dim={dim}")
        if len(idx) == 1:
            builder.add_linear(idx[0], coeff)
        else:
            builder.add_quadratic(idx[0], idx[1], coeff)
    return builder.build()
