"""
Error metric, synthetic data and the parameter-budget sweep harness.

A sweep fits one plan per rank of its last stage and records the parameter
count and NFE of each fit. Optional PARAFAC baselines (a single identity
partition stage) are fitted at ranks whose parameter counts bracket the MRLR
budgets, so the two NFE-versus-parameters curves can be compared at equal
budgets by linear interpolation.
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from typing import Callable, Iterable, List, Optional, Sequence

import numpy as np

from .als import init_factors
from .config_validation import AlsConfig
from .constants import FunctionGridDefaults, Methods, SweepDefaults
from .domain.models import (
    DenseTensor,
    FitReport,
    GridSpec,
    ModePartition,
    PartitionPlan,
    PlanStage,
    SweepRow,
)
from .engine import mrlr_fit, param_count
from .exceptions import ConfigurationError, NumericalError, raise_shape_error
from .tensor_ops import cp_reconstruct

logger = logging.getLogger(__name__)


# --- Metric ---


def nfe(X: DenseTensor, Xhat: DenseTensor) -> float:
    """Normalized Frobenius error ||X - Xhat||_F / ||X||_F."""
    if X.shape != Xhat.shape:
        raise_shape_error("NFE needs tensors of the same shape", expected=X.shape, actual=Xhat.shape)
    norm_x = X.norm()
    if norm_x == 0.0:
        raise NumericalError("NFE is undefined for a zero-norm reference tensor")
    return float(np.linalg.norm(X.data - Xhat.data)) / norm_x


# --- Synthetic data ---


def decay_function(x1: np.ndarray, x2: np.ndarray, x3: np.ndarray) -> np.ndarray:
    """f(x1, x2, x3) = (x1^2 + x2^2) * exp(-|x2 + x3|)."""
    return (x1 ** 2 + x2 ** 2) * np.exp(-np.abs(x2 + x3))


def default_grid() -> GridSpec:
    return GridSpec.uniform(
        FunctionGridDefaults.START,
        FunctionGridDefaults.STEP,
        FunctionGridDefaults.COUNT,
        FunctionGridDefaults.AXES,
    )


def sample_function_tensor(grid: Optional[GridSpec] = None) -> DenseTensor:
    """Sample the three-variable test function on ``grid`` (default: 100 points per axis from -5.0 by 0.1)."""
    grid = grid or default_grid()
    if len(grid.axes) != FunctionGridDefaults.AXES:
        raise ConfigurationError(
            f"The test function takes {FunctionGridDefaults.AXES} variables, the grid has {len(grid.axes)} axes"
        )
    x1, x2, x3 = np.meshgrid(*(axis.points() for axis in grid.axes), indexing="ij")
    return DenseTensor.from_array(decay_function(x1, x2, x3))


def random_cp_tensor(shape: Sequence[int], rank: int, seed: int) -> DenseTensor:
    """Exact rank-``rank`` tensor built from standard normal factors."""
    return cp_reconstruct(init_factors(shape, rank, seed))


def subsample_tensor(X: DenseTensor, shape: Sequence[int]) -> DenseTensor:
    """Keep evenly spaced indices along each mode (first and last index included)."""
    shape = tuple(shape)
    if len(shape) != X.order or any(n < 1 or n > N for n, N in zip(shape, X.shape)):
        raise_shape_error("Subsample shape must have one size per mode, each within 1..N_i", expected=X.shape, actual=shape)
    indices = [np.round(np.linspace(0, N - 1, n)).astype(int) for n, N in zip(shape, X.shape)]
    return DenseTensor.from_array(X.to_array()[np.ix_(*indices)])


# --- Sweeps ---


def point_seed(base_seed: int, rank: int) -> int:
    """Seed of one sweep point, derived from (base seed, rank) only."""
    return int(np.random.SeedSequence([base_seed, rank]).generate_state(1)[0])


def report_to_rows(report: FitReport, method: str = Methods.MRLR) -> List[SweepRow]:
    """
    One row per stage prefix: cumulative params and NFE after that stage. A fit
    with refinement cycles gets one more row with the final NFE.
    """
    rows = []
    for stage in report.stages:
        ranks = tuple(s.rank for s in report.stages[:stage.index])
        rows.append(SweepRow(
            method=method,
            stage_ranks=ranks,
            params=stage.cumulative_params,
            nfe=stage.nfe,
            sweeps=stage.sweeps,
            seconds=stage.seconds,
            seed=report.seed,
        ))
    if report.refinement_nfe and rows:
        rows.append(replace(rows[-1], method=method + Methods.REFINED_SUFFIX, nfe=report.final_nfe))
    return rows


def _fit_row(X: DenseTensor, plan: PartitionPlan, config: AlsConfig, method: str, seed: int) -> SweepRow:
    point_config = config.model_copy(update={"seed": seed})
    started = time.perf_counter()
    _, report = mrlr_fit(X, plan, point_config)
    seconds = time.perf_counter() - started
    row = SweepRow(
        method=method,
        stage_ranks=plan.ranks,
        params=param_count(plan, X.shape),
        nfe=report.final_nfe,
        sweeps=report.total_sweeps,
        seconds=seconds,
        seed=seed,
    )
    logger.info(f"{method} ranks {'+'.join(map(str, plan.ranks))}: {row.params} params, NFE {row.nfe:.6e}")
    return row


def _map_points(fn: Callable, items: Iterable, threads: int) -> List:
    items = list(items)
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def baseline_ranks_for(budgets: Sequence[int], shape: Sequence[int]) -> List[int]:
    """PARAFAC ranks whose parameter counts R * sum(N_i) bracket ``budgets``."""
    per_rank = sum(shape)
    low = max(1, math.floor(min(budgets) / per_rank))
    high = max(low, math.ceil(max(budgets) / per_rank))
    return list(range(low, high + 1))


def parafac_plan(order: int, rank: int) -> PartitionPlan:
    return PartitionPlan((PlanStage(ModePartition.identity(order), rank),))


def _check_ranks(ranks: Sequence[int], what: str) -> None:
    if not ranks:
        raise ConfigurationError(f"{what} must not be empty")
    if any(r < 1 for r in ranks) or any(a >= b for a, b in zip(ranks, ranks[1:])):
        raise ConfigurationError(f"{what} must be positive and strictly ascending", context={what: list(ranks)})


def baseline_sweep(X: DenseTensor, ranks: Sequence[int], config: AlsConfig = None, threads: int = 1) -> List[SweepRow]:
    """PARAFAC fits (one identity-partition stage) at each of ``ranks``."""
    config = config or AlsConfig()
    _check_ranks(list(ranks), "baseline_ranks")

    def parafac_point(rank: int) -> SweepRow:
        return _fit_row(X, parafac_plan(X.order, rank), config, Methods.PARAFAC, point_seed(config.seed, rank))

    return sorted(_map_points(parafac_point, ranks, threads), key=lambda row: row.params)


def rank_sweep(
    X: DenseTensor,
    base_plan: PartitionPlan,
    sweep_ranks: Sequence[int],
    baseline: bool = False,
    config: AlsConfig = None,
    baseline_ranks: Optional[Sequence[int]] = None,
    threads: int = 1,
    reverse: bool = False,
) -> List[SweepRow]:
    """
    Fit ``base_plan`` with its last stage at each rank of ``sweep_ranks``; with
    ``baseline`` also fit PARAFAC at ``baseline_ranks`` (default: the ranks that
    bracket the MRLR budgets). Rows are sorted by (method, params).

    With ``reverse`` the stages are fitted fine-to-coarse; the swept rank still
    belongs to the last stage of ``base_plan``.
    """
    config = config or AlsConfig()
    _check_ranks(list(sweep_ranks), "sweep_ranks")
    method = Methods.MRLR_REVERSE if reverse else Methods.MRLR

    def mrlr_point(rank: int) -> SweepRow:
        plan = base_plan.with_rank(-1, rank)
        return _fit_row(X, plan.reversed() if reverse else plan, config, method, point_seed(config.seed, rank))

    rows = _map_points(mrlr_point, sweep_ranks, threads)

    if baseline:
        ranks = list(baseline_ranks) if baseline_ranks else baseline_ranks_for([r.params for r in rows], X.shape)
        rows += baseline_sweep(X, ranks, config, threads)

    return sorted(rows, key=lambda row: (row.method, row.params))


def coarse_grid_sweep(
    X: DenseTensor,
    base_plan: PartitionPlan,
    sweep_ranks: Sequence[int],
    coarse_ranks: Sequence[int] = tuple(SweepDefaults.COARSE_RANKS),
    config: AlsConfig = None,
    threads: int = 1,
    reverse: bool = False,
) -> List[SweepRow]:
    """rank_sweep once per coarse rank, with every stage before the last at that rank."""
    rows: List[SweepRow] = []
    for coarse in coarse_ranks:
        plan = base_plan
        for index in range(len(plan) - 1):
            plan = plan.with_rank(index, coarse)
        rows += rank_sweep(X, plan, sweep_ranks, config=config, threads=threads, reverse=reverse)
    return sorted(rows, key=lambda row: (row.method, row.params))


# --- Equal-budget comparison ---


def budget_frontier(rows: Sequence[SweepRow]) -> List[SweepRow]:
    """Rows that achieve a lower NFE than every row with a smaller or equal budget."""
    frontier: List[SweepRow] = []
    for row in sorted(rows, key=lambda r: (r.params, r.nfe)):
        if not frontier or row.nfe < frontier[-1].nfe:
            frontier.append(row)
    return frontier


def interpolate_nfe(rows: Sequence[SweepRow], budgets: Sequence[float]) -> np.ndarray:
    """
    Best NFE reachable within each of ``budgets``, linear in params between
    sampled counts; NaN outside the sampled range.
    """
    best = {}
    for row in rows:
        best[row.params] = min(row.nfe, best.get(row.params, math.inf))
    params = np.array(sorted(best), dtype=np.float64)
    # running minimum: a larger budget can always reuse a cheaper fit
    errors = np.minimum.accumulate(np.array([best[p] for p in sorted(best)], dtype=np.float64))
    return np.interp(np.asarray(budgets, dtype=np.float64), params, errors, left=np.nan, right=np.nan)


def dominance_fraction(
    mrlr_rows: Sequence[SweepRow],
    baseline_rows: Sequence[SweepRow],
    budgets: Optional[Sequence[float]] = None,
    n_budgets: int = SweepDefaults.DOMINANCE_BUDGETS,
) -> float:
    """Fraction of budgets where the MRLR curve lies at or below the baseline curve."""
    if budgets is None:
        low = max(min(r.params for r in mrlr_rows), min(r.params for r in baseline_rows))
        high = min(max(r.params for r in mrlr_rows), max(r.params for r in baseline_rows))
        if low > high:
            raise ConfigurationError(
                "The MRLR and baseline parameter ranges do not overlap",
                context={"overlap": (low, high)},
            )
        budgets = np.linspace(low, high, n_budgets)
    mrlr_nfe = interpolate_nfe(mrlr_rows, budgets)
    baseline_nfe = interpolate_nfe(baseline_rows, budgets)
    valid = ~(np.isnan(mrlr_nfe) | np.isnan(baseline_nfe))
    if not np.any(valid):
        return 0.0
    return float(np.mean(mrlr_nfe[valid] <= baseline_nfe[valid] + 1e-12))
