"""
Multi-resolution low-rank (MRLR) decomposition engine.

A tensor X is approximated as a sum of components Z_1 + ... + Z_L where each
ten_reshape(Z_l, P^(l)) has CP rank at most R_l. Components are fitted one at a
time against the residual left by the earlier ones, so the first stages carry
the coarse structure and the later ones fit the remaining detail.
"""

import logging
import math
import time
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .als import als_fit
from .config_validation import AlsConfig
from .constants import EngineDefaults
from .domain.models import (
    AlsTrace,
    DenseTensor,
    FactorSet,
    FitReport,
    ModePartition,
    MrlrModel,
    MrlrStage,
    PartitionPlan,
    PlanStage,
    StageReport,
)
from .domain.specs import levels_to_indices
from .exceptions import NumericalError, PartitionError, raise_shape_error
from .tensor_ops import cp_reconstruct, ten_reshape, unten_reshape

logger = logging.getLogger(__name__)


# --- Partition plans ---


def regular_partitions(order: int) -> List[ModePartition]:
    """
    The I-1 regular partitions: partition l splits 1..I into l+1 contiguous
    groups, group n covering floor((n-1) I/(l+1)) + 1 .. floor(n I/(l+1)).
    """
    if order < 2:
        raise PartitionError(f"Regular partitions need a tensor order of at least 2, got {order}", order=order)
    partitions = []
    for level in range(1, order):
        parts = level + 1
        groups = tuple(
            tuple(range((n - 1) * order // parts + 1, n * order // parts + 1))
            for n in range(1, parts + 1)
        )
        partitions.append(ModePartition(groups))
    return partitions


def plan_from_regular(order: int, ranks: Sequence[int], levels: Optional[Sequence[int]] = None) -> PartitionPlan:
    """Coarse-to-fine plan from the regular partitions at the given 1-based levels."""
    partitions = regular_partitions(order)
    indices = levels_to_indices(levels, len(partitions)) if levels else list(range(len(partitions)))
    if len(ranks) != len(indices):
        raise PartitionError(
            f"Got {len(ranks)} ranks for {len(indices)} stages",
            order=order,
            context={"levels": [i + 1 for i in indices], "ranks": list(ranks)},
        )
    stages = [PlanStage(partitions[i], rank) for i, rank in zip(indices, ranks)]
    return PartitionPlan.coarse_to_fine(stages)


# --- Parameter counting ---


def param_count(model_or_plan: Union[MrlrModel, PartitionPlan], shape: Optional[Sequence[int]] = None) -> int:
    """Number of stored factor entries: sum_l R_l * sum_p prod_{j in P_p^(l)} N_j."""
    if isinstance(model_or_plan, MrlrModel):
        shape = model_or_plan.shape if shape is None else tuple(shape)
        stages = [(stage.partition, stage.rank) for stage in model_or_plan.stages]
    else:
        if shape is None:
            raise_shape_error("param_count of a plan needs the tensor shape")
        stages = [(stage.partition, stage.rank) for stage in model_or_plan]
    return sum(rank * sum(partition.group_sizes(shape)) for partition, rank in stages)


def estimate_params_regular(eta: float, order: int, ranks: Sequence[float]) -> float:
    """Approximate parameter count of the regular plan on an eta x ... x eta tensor."""
    if eta < 1:
        raise_shape_error("Common mode size must be at least 1", expected=">= 1", actual=eta)
    if order < 2:
        raise PartitionError(f"Tensor order must be at least 2, got {order}", order=order)
    if len(ranks) != order - 1:
        raise_shape_error("One rank per regular partition is needed", expected=order - 1, actual=len(ranks))
    return float(sum(rank * (level + 1) * eta ** (order / (level + 1)) for level, rank in enumerate(ranks, start=1)))


# --- Fitting ---


def _stage_component(factors: FactorSet, partition: ModePartition, shape: Tuple[int, ...]) -> np.ndarray:
    return unten_reshape(cp_reconstruct(factors), partition, shape).data


def _fit_stage(
    residual: np.ndarray,
    shape: Tuple[int, ...],
    partition: ModePartition,
    rank: int,
    config: AlsConfig,
    norm_x: float,
    threads: int,
    init: Optional[FactorSet] = None,
) -> Tuple[FactorSet, AlsTrace, np.ndarray]:
    sizes = partition.group_sizes(shape)
    residual_norm = float(np.linalg.norm(residual))
    if residual_norm < EngineDefaults.RESIDUAL_FLOOR * norm_x:
        logger.info(f"Residual is negligible ({residual_norm:.3e}); stage {partition} gets zero factors")
        trace = AlsTrace(errors=[residual_norm], sweeps_run=0, converged=True, seed=config.seed)
        return FactorSet.zeros(sizes, rank), trace, np.zeros_like(residual)

    reshaped = ten_reshape(DenseTensor(shape, residual), partition)
    factors, trace = als_fit(reshaped, rank, config, init=init, threads=threads)
    return factors, trace, _stage_component(factors, partition, shape)


def _check_plan(X: DenseTensor, plan: PartitionPlan) -> None:
    if not isinstance(plan, PartitionPlan) or len(plan) == 0:
        raise PartitionError("At least one stage is required to fit an MRLR model")
    for stage in plan:
        stage.partition.check_order(X.order)


def mrlr_fit(
    X: DenseTensor,
    plan: PartitionPlan,
    config: AlsConfig = None,
    refinement_cycles: int = EngineDefaults.REFINEMENT_CYCLES,
    threads: int = 1,
) -> Tuple[MrlrModel, FitReport]:
    """
    Fit the stages of ``plan`` in order, each by ALS on the reshaped residual
    of the stages before it.

    ``refinement_cycles`` extra passes re-fit every stage against the residual
    of all the others, warm-started from its current factors; a re-fit is kept
    only if it does not increase the error.
    """
    config = config or AlsConfig()
    _check_plan(X, plan)
    if refinement_cycles < 0:
        raise PartitionError(f"refinement_cycles must be >= 0, got {refinement_cycles}")
    if not X.is_finite():
        raise NumericalError("Input tensor contains non-finite values", context={"shape": X.shape})
    norm_x = X.norm()
    if norm_x == 0.0:
        raise NumericalError("Cannot fit a zero-norm tensor", context={"shape": X.shape})

    residual = np.array(X.data, copy=True)
    stages: List[MrlrStage] = []
    components: List[np.ndarray] = []
    report = FitReport(shape=X.shape, seed=config.seed)
    cumulative = 0

    for index, plan_stage in enumerate(plan, start=1):
        started = time.perf_counter()
        factors, trace, component = _fit_stage(
            residual, X.shape, plan_stage.partition, plan_stage.rank, config, norm_x, threads
        )
        residual -= component
        seconds = time.perf_counter() - started

        params = factors.n_params
        cumulative += params
        nfe = float(np.linalg.norm(residual)) / norm_x
        stages.append(MrlrStage(plan_stage.partition, factors, trace))
        components.append(component)
        report.stages.append(StageReport(
            index=index,
            partition=plan_stage.partition,
            rank=plan_stage.rank,
            nfe=nfe,
            params=params,
            cumulative_params=cumulative,
            sweeps=trace.sweeps_run,
            seconds=seconds,
            converged=trace.converged,
        ))
        logger.info(
            f"Stage {index}/{len(plan)} [{plan_stage}]: NFE {nfe:.6e}, "
            f"{cumulative} params, {trace.sweeps_run} sweeps, {seconds:.2f}s"
        )

    for cycle in range(1, refinement_cycles + 1):
        for i, stage in enumerate(stages):
            target = residual + components[i]
            warm = stage.factors if any(np.any(f) for f in stage.factors) else None
            factors, trace, component = _fit_stage(
                target, X.shape, stage.partition, stage.rank, config, norm_x, threads, init=warm
            )
            candidate = target - component
            if np.linalg.norm(candidate) <= np.linalg.norm(residual):
                residual = candidate
                components[i] = component
                stages[i] = MrlrStage(stage.partition, factors, trace)
        nfe = float(np.linalg.norm(residual)) / norm_x
        report.refinement_nfe.append(nfe)
        logger.info(f"Refinement cycle {cycle}/{refinement_cycles}: NFE {nfe:.6e}")

    return MrlrModel(X.shape, tuple(stages)), report


def mrlr_reconstruct(model: MrlrModel, n_stages: Optional[int] = None) -> DenseTensor:
    """Sum of unten_reshape(cp_reconstruct(stage factors)) over the first ``n_stages`` stages (all by default)."""
    total = np.zeros(math.prod(model.shape))
    for stage in model.stages[:n_stages]:
        total += _stage_component(stage.factors, stage.partition, model.shape)
    return DenseTensor(model.shape, total)
