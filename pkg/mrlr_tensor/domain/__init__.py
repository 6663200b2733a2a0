"""
Domain module for MRLR Tensor.

This module contains the core data types (tensors, partitions, factor sets,
plans, fitted models and reports) and the spec-string grammar used to describe
partitions and plans on the command line.
"""

from .models import (
    DenseTensor,
    ModePartition,
    FactorSet,
    AlsTrace,
    PlanOrdering,
    PlanStage,
    PartitionPlan,
    MrlrStage,
    MrlrModel,
    StageReport,
    FitReport,
    AxisGrid,
    GridSpec,
    SweepRow,
)

from .specs import (
    parse_int_list,
    parse_partition_spec,
    format_partition_spec,
    parse_plan_stages,
    resolve_plan_text,
    format_plan_spec,
    parse_rank_range,
    parse_random_cp,
    levels_to_indices,
    parse_rank_list,
    parse_partition_list,
    parse_grid_spec,
)

__all__ = [
    # Core models
    'DenseTensor',
    'ModePartition',
    'FactorSet',
    'AlsTrace',
    'PlanOrdering',
    'PlanStage',
    'PartitionPlan',
    'MrlrStage',
    'MrlrModel',
    'StageReport',
    'FitReport',
    'AxisGrid',
    'GridSpec',
    'SweepRow',

    # Spec strings
    'parse_int_list',
    'parse_partition_spec',
    'format_partition_spec',
    'parse_plan_stages',
    'resolve_plan_text',
    'format_plan_spec',
    'parse_rank_range',
    'parse_random_cp',
    'levels_to_indices',
    'parse_rank_list',
    'parse_partition_list',
    'parse_grid_spec',
]
