"""Exact and annealing minimizers for QuboModel, plus staircase decoding and validation."""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from rating_scales.config import (
    ANNEAL_GROUPED_T_END_RATIO,
    ANNEAL_PROBE_SAMPLES,
    ANNEAL_RESTARTS,
    ANNEAL_SWEEP_FACTOR,
    ANNEAL_T_END_RATIO,
    ANNEAL_TARGET_ACCEPTANCE,
    EXACT_FULL_STORE_DIM,
    EXACT_MINIMIZER_CAPACITY,
    EXACT_SOLVER_CAP,
    TIE_TOLERANCE,
)
from rating_scales.errors import (
    DecodeError,
    InstanceTooLargeError,
    LayoutMismatchError,
    RatingScaleError,
    SolverLimitError,
)
from rating_scales.models import (
    AnnealSchedule,
    Dataset,
    LayoutOptions,
    MonotonicityVariant,
    Partition,
    PenaltyWeights,
    SolveResult,
    SolverOptions,
    ValidationConfig,
    VariableLayout,
)
from rating_scales.tools import kernels
from rating_scales.tools.penalties import complete_slacks, compose, layout, preset_weights, staircase_state
from rating_scales.tools.qubo import QuboModel, evaluate
from rating_scales.tools.scale import validate

logger = logging.getLogger(__name__)

_NO_GROUPS = np.zeros((0, 2), dtype=np.int64)
_NO_COUPLING = np.zeros((0, 2, 2), dtype=np.float64)


def _csr_arrays(model: QuboModel):
    lin = model.arrays()[0]
    csr = model.to_csr()
    return (
        lin,
        csr.indptr.astype(np.int64),
        csr.indices.astype(np.int64),
        csr.data.astype(np.float64),
    )


def _coefficient_scale(model: QuboModel) -> float:
    lin, _, _, vals = model.arrays()
    return 1.0 + float(np.abs(lin).sum() + np.abs(vals).sum())


def _ties(energies: np.ndarray, best: float) -> np.ndarray:
    return energies <= best + TIE_TOLERANCE * max(1.0, abs(best))


def _masks_to_states(masks: Sequence[int], dim: int) -> np.ndarray:
    masks = np.asarray(masks, dtype=np.int64).reshape(-1, 1)
    return ((masks >> np.arange(dim, dtype=np.int64)) & 1).astype(np.int8)


# --------------- Exact ---------------


def solve_exact(
    model: QuboModel,
    cap: int = EXACT_SOLVER_CAP,
    workers: int = 1,
    capacity: int = EXACT_MINIMIZER_CAPACITY,
) -> SolveResult:
    """Scan all 2^dimension states in Gray-code order and return every global minimizer.

    Args:
        model: Model to minimize.
        cap: Refuse models with more variables than this.
        workers: Threads; the top bits are fixed per chunk so chunks scan disjoint prefixes.
        capacity: Most tied minimizers stored per chunk, raised to every state of the chunk when
            dimension <= EXACT_FULL_STORE_DIM. More ties than that raise SolverLimitError.
    """
    dim = model.dimension
    if dim > cap:
        raise InstanceTooLargeError(
            f"exact search over {dim} variables means {2 ** dim:,} states; cap is {cap} variables"
        )
    started = time.perf_counter()
    lin, indptr, indices, data = _csr_arrays(model)
    tol = TIE_TOLERANCE * _coefficient_scale(model)

    prefix_bits = 0
    if workers > 1 and dim >= 12:
        prefix_bits = min(math.ceil(math.log2(workers)), dim - 8)
    n_free = dim - prefix_bits
    if dim <= EXACT_FULL_STORE_DIM:
        capacity = max(capacity, 1 << n_free)

    def scan(prefix: int):
        return kernels.gray_scan(lin, indptr, indices, data, n_free, prefix, tol, capacity)

    prefixes = range(1 << prefix_bits)
    if prefix_bits and kernels.HAVE_NUMBA:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(scan, prefixes))
    else:
        chunks = [scan(p) for p in prefixes]

    best = min(c[0] for c in chunks)
    masks: List[int] = []
    count = 0
    evaluations = 0
    truncated = False
    for chunk_best, chunk_count, stored, total in chunks:
        evaluations += int(total)
        if chunk_best <= best + tol:
            count += int(chunk_count)
            masks.extend(int(v) for v in stored)
            truncated = truncated or int(chunk_count) > len(stored)
    if truncated:
        raise SolverLimitError(
            f"{count:,} tied minimizers exceed the store of {capacity:,} per chunk; "
            "raise RS_EXACT_MINIMIZER_CAPACITY or tighten the model"
        )

    states = _masks_to_states(sorted(set(masks)), dim)
    energies = model.energies(states)
    keep = _ties(energies, float(energies.min()))
    minimizers = [tuple(int(b) for b in s) for s in states[keep]]
    best_state = minimizers[0]
    elapsed = time.perf_counter() - started
    logger.info("exact: dim=%d energy=%.6g in %.3fs", dim, float(energies[keep][0]), elapsed)
    return SolveResult(
        solver="exact",
        dimension=dim,
        best_state=best_state,
        best_energy=evaluate(model, best_state),
        all_minimizers=minimizers,
        minimizer_count=len(minimizers),
        wall_time=elapsed,
        evaluations=evaluations,
    )


# --------------- Annealing ---------------


def delta_energy(model: QuboModel, state: Sequence[int], flip_index: int) -> float:
    """Energy change of flipping one bit, from that variable's row of the coupling matrix."""
    if not 0 <= flip_index < model.dimension:
        raise RatingScaleError(f"flip_index {flip_index} out of range for dimension {model.dimension}")
    x = np.asarray(state, dtype=np.float64)
    csr = model.to_csr()
    lo, hi = csr.indptr[flip_index], csr.indptr[flip_index + 1]
    field = model.arrays()[0][flip_index] + float(csr.data[lo:hi] @ x[csr.indices[lo:hi]])
    return (1.0 - 2.0 * x[flip_index]) * field


def estimate_t_start(model: QuboModel, seed: int, samples: int = ANNEAL_PROBE_SAMPLES) -> float:
    """Temperature at which the mean uphill move of random states is accepted ~80% of the time."""
    rng = np.random.default_rng(seed)
    states = rng.integers(0, 2, size=(samples, model.dimension)).astype(np.float64)
    picks = rng.integers(0, model.dimension, size=samples)
    lin = model.arrays()[0]
    fields = lin + model.to_csr().dot(states.T).T
    rows = np.arange(samples)
    deltas = np.abs((1.0 - 2.0 * states[rows, picks]) * fields[rows, picks])
    deltas = deltas[deltas > 0]
    if deltas.size == 0:
        return 1.0
    return float(deltas.mean() / math.log(1.0 / ANNEAL_TARGET_ACCEPTANCE))


def _group_arrays(model: QuboModel, groups: Optional[Sequence[Sequence[int]]]):
    if not groups:
        return _NO_GROUPS, _NO_COUPLING
    width = len(groups[0])
    if width < 2 or any(len(g) != width for g in groups):
        raise RatingScaleError("one-hot groups must all have the same size >= 2")
    arr = np.asarray(groups, dtype=np.int64)
    dense = model.to_csr()
    coupling = np.zeros((len(groups), width, width), dtype=np.float64)
    for g, members in enumerate(arr):
        coupling[g] = dense[members][:, members].toarray()
    return arr, coupling


def solve_anneal(
    model: QuboModel,
    schedule: Optional[AnnealSchedule] = None,
    restarts: int = ANNEAL_RESTARTS,
    seed: int = 0,
    groups: Optional[Sequence[Sequence[int]]] = None,
    workers: int = 1,
    t_end_ratio: float = ANNEAL_T_END_RATIO,
) -> SolveResult:
    """Simulated annealing with independent seeded restarts and a final steepest descent.

    Args:
        model: Model to minimize.
        schedule: t_start, t_end, sweeps; missing values come from the model (t_start from 100
            sampled deltas, t_end = t_end_ratio * t_start, sweeps = 10 * dimension).
        restarts: Independent runs; the lowest energy wins, ties go to the lowest restart index.
        seed: Master seed; per-restart seeds are derived from it.
        groups: Optional one-hot variable groups that also get swap moves.
        workers: Threads running restarts concurrently.
    """
    schedule = schedule or AnnealSchedule()
    started = time.perf_counter()
    dim = model.dimension
    if dim == 0:
        return SolveResult(solver="anneal", dimension=0, best_state=(), best_energy=model.offset)

    t_start = schedule.t_start or estimate_t_start(model, seed)
    t_end = schedule.t_end or t_start * t_end_ratio
    if t_end > t_start:
        raise RatingScaleError(f"t_end={t_end} exceeds t_start={t_start}")
    sweeps = schedule.sweeps or ANNEAL_SWEEP_FACTOR * dim
    temps = np.geomspace(t_start, t_end, sweeps)

    lin, indptr, indices, data = _csr_arrays(model)
    group_idx, coupling = _group_arrays(model, groups)
    seeds = [int(s) for s in np.random.SeedSequence(seed).generate_state(restarts) % (2 ** 31)]

    def run(restart_seed: int):
        rng = np.random.default_rng(restart_seed)
        return kernels.anneal_run(lin, indptr, indices, data, temps, rng, group_idx, coupling)

    if workers > 1 and kernels.HAVE_NUMBA:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(run, seeds))
    else:
        runs = [run(s) for s in seeds]

    best_index = 0
    for r in range(1, len(runs)):
        if runs[r][1] < runs[best_index][1]:
            best_index = r
    best_x = runs[best_index][0]
    tol = 1e-12 * _coefficient_scale(model)
    refined, steps = kernels.descend(lin, indptr, indices, data, best_x, group_idx, coupling, tol)
    state = tuple(int(b) for b in refined)
    elapsed = time.perf_counter() - started
    energy = evaluate(model, state)
    logger.info(
        "anneal: dim=%d restarts=%d sweeps=%d t=[%.3g, %.3g] energy=%.6g (restart %d, %d descent steps) in %.2fs",
        dim, restarts, sweeps, t_start, t_end, energy, best_index, steps, elapsed,
    )
    return SolveResult(
        solver="anneal",
        dimension=dim,
        best_state=state,
        best_energy=energy,
        wall_time=elapsed,
        evaluations=int(sum(r[2] for r in runs)) + steps,
    )


# --------------- Decoding ---------------


def diagnose(state: Sequence[int], lay: VariableLayout) -> List[str]:
    """Every structural reason the x-block is not a staircase; empty when it is one."""
    if len(state) != lay.total_variables:
        raise LayoutMismatchError(f"state has {len(state)} bits, layout needs {lay.total_variables}")
    x = np.asarray(state[: lay.x_size], dtype=np.int8).reshape(lay.n, lay.m)
    problems: List[str] = []
    row_sums = x.sum(axis=1)
    empty = [int(i) + 1 for i in np.flatnonzero(row_sums == 0)]
    multi = [int(i) + 1 for i in np.flatnonzero(row_sums > 1)]
    if empty:
        problems.append(f"empty rows (no grade): {empty}")
    if multi:
        problems.append(f"rows in several grades: {multi}")
    if empty or multi:
        return problems

    grades = x.argmax(axis=1) + 1
    if grades[0] != 1:
        problems.append(f"wrong endpoint: counterpart 1 is in grade {grades[0]}, expected 1")
    if grades[-1] != lay.m:
        problems.append(f"wrong endpoint: counterpart {lay.n} is in grade {grades[-1]}, expected {lay.m}")
    for i in range(1, lay.n):
        step = grades[i] - grades[i - 1]
        if step not in (0, 1):
            problems.append(
                f"column order violation: counterpart {i} in grade {grades[i - 1]}, counterpart {i + 1} in grade {grades[i]}"
            )
    for j in range(1, lay.m + 1):
        rows = np.flatnonzero(grades == j)
        if rows.size == 0:
            problems.append(f"grade {j} is empty")
        elif rows[-1] - rows[0] + 1 != rows.size:
            problems.append(f"grade {j} is not contiguous")
    return problems


def decode(state: Sequence[int], lay: VariableLayout, ds: Optional[Dataset] = None) -> Partition:
    """Partition encoded by the x-block; auxiliary bits are ignored. Raises DecodeError otherwise."""
    if ds is not None and ds.n != lay.n:
        raise LayoutMismatchError(f"dataset has n={ds.n}, layout n={lay.n}")
    problems = diagnose(state, lay)
    if problems:
        raise DecodeError(problems)
    x = np.asarray(state[: lay.x_size], dtype=np.int64).reshape(lay.n, lay.m)
    return Partition(cardinalities=tuple(int(c) for c in x.sum(axis=0)))


# --------------- Staircase refinement ---------------


def even_partition(n: int, m: int) -> Partition:
    """Cardinalities as equal as possible, the larger grades last."""
    q, r = divmod(n, m)
    return Partition(cardinalities=(q,) * (m - r) + (q + 1,) * r)


def repair_staircase(state: Sequence[int], lay: VariableLayout) -> Optional[Partition]:
    """Staircase keeping how many counterparts each grade holds in the x-block.

    Each row counts for its first set column; empty rows take the previous row's grade.
    Returns None when some grade holds nobody.
    """
    x = np.asarray(state[: lay.x_size], dtype=np.int8).reshape(lay.n, lay.m)
    grades = np.where(x.sum(axis=1) > 0, x.argmax(axis=1), -1)
    previous = 0
    for i in range(lay.n):
        if grades[i] < 0:
            grades[i] = previous
        previous = grades[i]
    counts = np.bincount(grades, minlength=lay.m)
    if (counts == 0).any():
        return None
    return Partition(cardinalities=tuple(int(c) for c in counts))


def _boundary_moves(p: Partition) -> List[Partition]:
    c = p.cardinalities
    moves = []
    for j in range(len(c) - 1):
        for step in (-1, 1):
            a, b = c[j] + step, c[j + 1] - step
            if a >= 1 and b >= 1:
                moves.append(Partition(cardinalities=c[:j] + (a, b) + c[j + 2:]))
    return moves


def _batch_energies(model: QuboModel, states: np.ndarray) -> np.ndarray:
    s = np.atleast_2d(states).astype(np.float64)
    coupled = model.to_csr().dot(s.T).T
    return model.offset + s @ model.arrays()[0] + 0.5 * np.einsum("ki,ki->k", s, coupled)


def refine_staircase(
    model: QuboModel,
    lay: VariableLayout,
    start: Partition,
    max_steps: Optional[int] = None,
) -> List[Tuple[float, Partition]]:
    """Steepest descent over staircases, moving one grade boundary by one counterpart per step.

    Every candidate is scored with its auxiliary bits completed optimally. Returns the visited
    (energy, partition) pairs in order, the start first.
    """
    max_steps = max_steps or lay.n * lay.m
    current = start
    energy = float(_batch_energies(model, staircase_state(start, lay))[0])
    visited = [(energy, current)]
    for _ in range(max_steps):
        moves = _boundary_moves(current)
        if not moves:
            break
        energies = _batch_energies(model, np.stack([staircase_state(p, lay) for p in moves]))
        k = int(np.argmin(energies))
        if energies[k] >= energy - TIE_TOLERANCE * max(1.0, abs(energy)):
            break
        current, energy = moves[k], float(energies[k])
        visited.append((energy, current))
    return visited


def _refine_result(
    model: QuboModel,
    lay: VariableLayout,
    ds: Dataset,
    result: SolveResult,
    vconfig: ValidationConfig,
) -> SolveResult:
    """Replace an annealed state by the best staircase reached from it and from the even split.

    Staircases passing the encoded checks win over lower-energy ones that fail them.
    """
    starts = [even_partition(lay.n, lay.m)]
    repaired = repair_staircase(result.best_state, lay)
    if repaired is not None:
        starts.insert(0, repaired)
    seen: Dict[Tuple[int, ...], float] = {}
    for start in starts:
        for energy, p in refine_staircase(model, lay, start):
            seen[p.cardinalities] = energy

    encoded = vconfig.model_copy(update={"check_heterogeneity": False, "check_homogeneity": False})
    ranked = sorted(seen.items(), key=lambda item: item[1])
    valid = [item for item in ranked if validate(ds, Partition(cardinalities=item[0]), encoded).encoded_valid]
    cardinalities, _ = (valid or ranked)[0]
    state = tuple(int(b) for b in staircase_state(Partition(cardinalities=cardinalities), lay))
    energy = evaluate(model, state)
    logger.info(
        "refine: %d staircases visited (%d valid), picked %s at %.6g (annealed %.6g)",
        len(ranked), len(valid), cardinalities, energy, result.best_energy,
    )
    return result.model_copy(update={"best_state": state, "best_energy": energy})


# --------------- End to end ---------------


def layout_options(ds: Dataset, options: SolverOptions, allow_large: bool = False) -> LayoutOptions:
    return LayoutOptions(
        include_thresholds=options.compose.thresholds,
        lambda1=options.lambda1,
        lambda2=options.lambda2,
        exact_monotonicity=options.compose.monotonicity == MonotonicityVariant.EXACT,
        defaults=ds.defaults,
        allow_large=allow_large,
    )


def solve_model(model: QuboModel, lay: VariableLayout, ds: Dataset, options: SolverOptions) -> SolveResult:
    """Minimize a model built on ``lay``, complete auxiliaries, decode, and validate."""
    if model.dimension != lay.total_variables:
        raise LayoutMismatchError(f"model has {model.dimension} variables, layout {lay.total_variables}")
    vconfig = options.validation
    if lay.include_thresholds:
        vconfig = vconfig.model_copy(update={"lambda1": lay.lambda1, "lambda2": lay.lambda2})
    use_exact = options.solver == "exact" or (options.solver == "auto" and model.dimension <= options.exact_cap)
    if use_exact:
        result = solve_exact(model, cap=options.exact_cap, workers=options.workers)
    else:
        rows = [[lay.x_index(i, j) for j in range(1, lay.m + 1)] for i in range(1, lay.n + 1)]
        result = solve_anneal(
            model,
            schedule=options.schedule,
            restarts=options.restarts,
            seed=options.seed,
            groups=rows,
            workers=options.workers,
            t_end_ratio=ANNEAL_GROUPED_T_END_RATIO,
        )
        completed = tuple(int(b) for b in complete_slacks(result.best_state, lay))
        completed_energy = evaluate(model, completed)
        if completed_energy < result.best_energy:
            result = result.model_copy(update={"best_state": completed, "best_energy": completed_energy})
        if options.refine:
            result = _refine_result(model, lay, ds, result, vconfig)

    try:
        partition = decode(result.best_state, lay, ds)
    except DecodeError as exc:
        logger.warning("solution is not a staircase: %s", exc)
        return result.model_copy(update={"diagnosis": exc.problems})

    report = validate(ds, partition, vconfig)
    logger.info(
        "decoded %s: monotonicity=%s concentration=%s cardinality=%s",
        partition.cardinalities, report.monotonicity, report.concentration, report.cardinality,
    )
    return result.model_copy(update={"decoded": partition, "validity": report})


def solve_and_validate(
    ds: Dataset,
    m: int,
    weights: Optional[PenaltyWeights] = None,
    options: Optional[SolverOptions] = None,
) -> SolveResult:
    """Compose the rating-scale model for ``ds`` with m grades, solve it, and check the result.

    Exact search runs when the model fits under ``options.exact_cap``, annealing otherwise.
    """
    options = options or SolverOptions()
    exact = options.compose.monotonicity == MonotonicityVariant.EXACT
    weights = weights or preset_weights(1, ds.n, m, max(ds.d, 1), exact=exact)
    lay = layout(ds.n, m, layout_options(ds, options))
    model = compose(lay, weights, ds, options.compose)
    return solve_model(model, lay, ds, options)
