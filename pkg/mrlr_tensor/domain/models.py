"""
Core domain models for MRLR Tensor.

These models describe dense tensors, mode partitions, CP factor sets and the
multi-resolution model built from them. They are independent of the solvers
and file formats and serve as the common vocabulary of the package.

Tensors are stored flat in colexicographic order: the first mode index varies
fastest, which is numpy's Fortran ("F") order.
"""

import math
import operator
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from ..constants import CsvSchema, SpecGrammar
from ..exceptions import ConfigurationError, NumericalError, PartitionError, ShapeMismatchError
from ..validators import PartitionValidator, require_valid_shape


def _as_index_tuple(values: Sequence[Any], error_cls=ShapeMismatchError) -> Tuple[int, ...]:
    """Convert integer-like values (python or numpy ints) to a tuple of ints."""
    try:
        return tuple(operator.index(v) for v in values)
    except TypeError as e:
        raise error_cls(f"Expected integers, got {list(values)!r}", context={"error": str(e)})


class PlanOrdering(Enum):
    """Fit order of the stages in a partition plan."""

    COARSE_TO_FINE = "coarse-to-fine"
    AS_GIVEN = "as-given"


@dataclass(frozen=True, eq=False)
class DenseTensor:
    """
    Order-I real tensor with an explicit shape and colexicographic storage.

    ``data`` is a read-only flat float64 array of length prod(shape).
    """

    shape: Tuple[int, ...]
    data: np.ndarray

    def __post_init__(self):
        shape = _as_index_tuple(self.shape)
        require_valid_shape(shape)

        data = np.array(self.data, dtype=np.float64, copy=True)
        if data.ndim != 1:
            raise ShapeMismatchError(
                "DenseTensor data must be flat; use DenseTensor.from_array for n-d arrays",
                expected=1,
                actual=data.ndim,
            )
        if data.size != math.prod(shape):
            raise ShapeMismatchError(
                "Data length does not match the product of the shape",
                expected=math.prod(shape),
                actual=data.size,
                context={"shape": shape},
            )
        data.flags.writeable = False

        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "data", data)

    @classmethod
    def from_array(cls, array: np.ndarray) -> "DenseTensor":
        """Wrap an n-d array, flattening it colexicographically."""
        array = np.asarray(array, dtype=np.float64)
        if array.ndim == 0:
            array = array.reshape(1)
        return cls(array.shape, array.ravel(order="F"))

    @classmethod
    def zeros(cls, shape: Sequence[int]) -> "DenseTensor":
        shape = _as_index_tuple(shape)
        require_valid_shape(shape)
        return cls(shape, np.zeros(math.prod(shape)))

    @property
    def order(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return self.data.size

    def to_array(self) -> np.ndarray:
        """Return an n-d (read-only) view indexed as X[n_1, ..., n_I]."""
        return self.data.reshape(self.shape, order="F")

    def norm(self) -> float:
        """Frobenius norm."""
        return float(np.linalg.norm(self.data))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.data)))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DenseTensor):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.data, other.data)

    __hash__ = None

    def __repr__(self) -> str:
        dims = " x ".join(str(n) for n in self.shape)
        return f"DenseTensor({dims}, norm={self.norm():.6g})"


@dataclass(frozen=True)
class ModePartition:
    """
    Ordered partition of the mode set {1..I} into ordered groups.

    Groups are disjoint, non-empty and cover 1..I. Within a group the first
    listed mode varies fastest in the reshaped index.
    """

    groups: Tuple[Tuple[int, ...], ...]

    def __post_init__(self):
        try:
            groups = tuple(_as_index_tuple(g, PartitionError) for g in self.groups)
        except TypeError:
            raise PartitionError(f"Partition groups must be sequences of mode indices, got {self.groups!r}")
        PartitionValidator.validate_groups(groups).raise_if_invalid(PartitionError, groups=groups)
        object.__setattr__(self, "groups", groups)

    @classmethod
    def identity(cls, order: int) -> "ModePartition":
        """{{1}, {2}, ..., {I}}: reshaping leaves the tensor unchanged."""
        return cls(tuple((mode,) for mode in range(1, order + 1)))

    @classmethod
    def vectorizing(cls, order: int) -> "ModePartition":
        """{{1, ..., I}}: reshaping yields vec(X)."""
        return cls((tuple(range(1, order + 1)),))

    @classmethod
    def unfolding(cls, order: int, mode: int) -> "ModePartition":
        """{{1..I} minus {p}, {p}}: the matrix unfolding along ``mode``."""
        if not 1 <= mode <= order:
            raise PartitionError(f"Mode {mode} is out of range for an order-{order} tensor", order=order)
        rest = tuple(m for m in range(1, order + 1) if m != mode)
        if not rest:
            return cls(((mode,),))
        return cls((rest, (mode,)))

    @property
    def order(self) -> int:
        """Order I of the tensors this partition applies to."""
        return sum(len(g) for g in self.groups)

    def __len__(self) -> int:
        return len(self.groups)

    def __iter__(self) -> Iterator[Tuple[int, ...]]:
        return iter(self.groups)

    def axes(self) -> Tuple[int, ...]:
        """0-based tensor axes in group-concatenated order."""
        return tuple(mode - 1 for group in self.groups for mode in group)

    def group_sizes(self, shape: Sequence[int]) -> Tuple[int, ...]:
        """Mode sizes of the reshaped tensor: prod of N_j over each group."""
        self.check_order(len(shape))
        return tuple(math.prod(shape[mode - 1] for mode in group) for group in self.groups)

    def check_order(self, order: int) -> None:
        if self.order != order:
            raise PartitionError(
                f"Partition {self} covers {self.order} modes but the tensor has order {order}",
                groups=self.groups,
                order=order,
            )

    def __str__(self) -> str:
        return SpecGrammar.GROUP_SEPARATOR.join(
            SpecGrammar.MODE_SEPARATOR.join(str(mode) for mode in group) for group in self.groups
        )


@dataclass(frozen=True, eq=False)
class FactorSet:
    """CP factor matrices sharing a common column count (the rank R)."""

    factors: Tuple[np.ndarray, ...]

    def __post_init__(self):
        factors = tuple(np.asarray(f, dtype=np.float64) for f in self.factors)
        if not factors:
            raise ShapeMismatchError("A factor set needs at least one factor matrix")
        for index, factor in enumerate(factors, start=1):
            if factor.ndim != 2:
                raise ShapeMismatchError(f"Factor {index} is not a matrix", expected=2, actual=factor.ndim)
        ranks = {f.shape[1] for f in factors}
        if len(ranks) != 1:
            raise ShapeMismatchError(
                "All factors must share the same column count",
                context={"column_counts": [f.shape[1] for f in factors]},
            )
        if ranks.pop() < 1:
            raise ShapeMismatchError("Factor rank must be at least 1", expected=">= 1", actual=0)
        for index, factor in enumerate(factors, start=1):
            if not np.all(np.isfinite(factor)):
                raise NumericalError(f"Factor {index} contains non-finite entries")
        object.__setattr__(self, "factors", factors)

    @classmethod
    def zeros(cls, shape: Sequence[int], rank: int) -> "FactorSet":
        return cls(tuple(np.zeros((n, rank)) for n in shape))

    @property
    def rank(self) -> int:
        return self.factors[0].shape[1]

    @property
    def shape(self) -> Tuple[int, ...]:
        """Row counts, i.e. the mode sizes of the tensor the factors describe."""
        return tuple(f.shape[0] for f in self.factors)

    @property
    def order(self) -> int:
        return len(self.factors)

    @property
    def n_params(self) -> int:
        """Number of stored scalars."""
        return sum(f.size for f in self.factors)

    def __len__(self) -> int:
        return len(self.factors)

    def __iter__(self) -> Iterator[np.ndarray]:
        return iter(self.factors)

    def __getitem__(self, index: int) -> np.ndarray:
        return self.factors[index]


@dataclass
class AlsTrace:
    """Convergence record of one ALS fit (the winning restart)."""

    errors: List[float] = field(default_factory=list)
    sweeps_run: int = 0
    converged: bool = False
    singular_solves: int = 0
    restart: int = 0
    seed: Optional[int] = None

    @property
    def final_error(self) -> float:
        return self.errors[-1] if self.errors else math.nan


@dataclass(frozen=True)
class PlanStage:
    """One entry of a partition plan: a partition and the CP rank fitted after reshaping."""

    partition: ModePartition
    rank: int

    def __post_init__(self):
        rank = operator.index(self.rank)
        if rank < 1:
            raise PartitionError(f"Stage rank must be at least 1, got {rank}", groups=self.partition.groups)
        object.__setattr__(self, "rank", rank)

    def params(self, shape: Sequence[int]) -> int:
        return self.rank * sum(self.partition.group_sizes(shape))

    def __str__(self) -> str:
        return f"{self.partition}{SpecGrammar.RANK_MARKER}{self.rank}"


@dataclass(frozen=True)
class PartitionPlan:
    """
    Ordered list of stages; the list order is the fit order.

    With COARSE_TO_FINE ordering the group counts must be non-decreasing.
    """

    stages: Tuple[PlanStage, ...]
    ordering: PlanOrdering = PlanOrdering.AS_GIVEN

    def __post_init__(self):
        stages = tuple(self.stages)
        if not stages:
            raise PartitionError("A partition plan needs at least one stage")
        orders = {stage.partition.order for stage in stages}
        if len(orders) != 1:
            raise PartitionError(
                "All stages of a plan must partition the same number of modes",
                context={"stage_orders": [stage.partition.order for stage in stages]},
            )
        if self.ordering is PlanOrdering.COARSE_TO_FINE:
            counts = [len(stage.partition) for stage in stages]
            if any(a > b for a, b in zip(counts, counts[1:])):
                raise PartitionError(
                    "Coarse-to-fine plans need non-decreasing group counts",
                    context={"group_counts": counts},
                    suggestions=["Build the plan with PartitionPlan.coarse_to_fine to sort the stages"],
                )
        object.__setattr__(self, "stages", stages)

    @classmethod
    def coarse_to_fine(cls, stages: Sequence[PlanStage]) -> "PartitionPlan":
        """Sort stages by group count (stable) so coarse stages are fitted first."""
        ordered = sorted(stages, key=lambda stage: len(stage.partition))
        return cls(tuple(ordered), PlanOrdering.COARSE_TO_FINE)

    def reversed(self) -> "PartitionPlan":
        """Fine-to-coarse arrangement of the same stages."""
        return PartitionPlan(tuple(reversed(self.stages)), PlanOrdering.AS_GIVEN)

    def with_rank(self, index: int, rank: int) -> "PartitionPlan":
        """Copy of the plan with stage ``index`` (0-based, negative allowed) at ``rank``."""
        stages = list(self.stages)
        stages[index] = replace(stages[index], rank=rank)
        return PartitionPlan(tuple(stages), self.ordering)

    @property
    def order(self) -> int:
        return self.stages[0].partition.order

    @property
    def ranks(self) -> Tuple[int, ...]:
        return tuple(stage.rank for stage in self.stages)

    def __len__(self) -> int:
        return len(self.stages)

    def __iter__(self) -> Iterator[PlanStage]:
        return iter(self.stages)

    def __str__(self) -> str:
        return SpecGrammar.STAGE_SEPARATOR.join(str(stage) for stage in self.stages)


@dataclass(frozen=True)
class MrlrStage:
    """A fitted stage: CP factors over the modes of the reshaped tensor."""

    partition: ModePartition
    factors: FactorSet
    trace: AlsTrace = field(default_factory=AlsTrace, compare=False)

    @property
    def rank(self) -> int:
        return self.factors.rank


@dataclass(frozen=True)
class MrlrModel:
    """Original shape plus the ordered fitted stages; enough to reconstruct."""

    shape: Tuple[int, ...]
    stages: Tuple[MrlrStage, ...]

    def __post_init__(self):
        shape = _as_index_tuple(self.shape)
        require_valid_shape(shape)
        stages = tuple(self.stages)
        for index, stage in enumerate(stages, start=1):
            expected = stage.partition.group_sizes(shape)
            if stage.factors.shape != expected:
                raise ShapeMismatchError(
                    f"Stage {index} factor rows do not match the reshaped mode sizes",
                    expected=expected,
                    actual=stage.factors.shape,
                )
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "stages", stages)

    @property
    def ranks(self) -> Tuple[int, ...]:
        return tuple(stage.rank for stage in self.stages)

    @property
    def n_params(self) -> int:
        return sum(stage.factors.n_params for stage in self.stages)

    def to_plan(self) -> PartitionPlan:
        return PartitionPlan(tuple(PlanStage(s.partition, s.rank) for s in self.stages))


@dataclass
class StageReport:
    """Bookkeeping for one stage after it was added to the model."""

    index: int
    partition: ModePartition
    rank: int
    nfe: float
    params: int
    cumulative_params: int
    sweeps: int
    seconds: float
    converged: bool


@dataclass
class FitReport:
    """Per-stage NFE trajectory, parameter counts and timings of an MRLR fit."""

    shape: Tuple[int, ...]
    seed: int
    stages: List[StageReport] = field(default_factory=list)
    refinement_nfe: List[float] = field(default_factory=list)

    @property
    def nfe_trajectory(self) -> List[float]:
        return [stage.nfe for stage in self.stages]

    @property
    def final_nfe(self) -> float:
        if self.refinement_nfe:
            return self.refinement_nfe[-1]
        return self.stages[-1].nfe if self.stages else 1.0

    @property
    def total_params(self) -> int:
        return self.stages[-1].cumulative_params if self.stages else 0

    @property
    def total_sweeps(self) -> int:
        return sum(stage.sweeps for stage in self.stages)

    @property
    def total_seconds(self) -> float:
        return sum(stage.seconds for stage in self.stages)


@dataclass(frozen=True)
class AxisGrid:
    """Equispaced sample points start + k * step for k = 0..count-1."""

    start: float
    step: float
    count: int

    def __post_init__(self):
        if not self.step > 0:
            raise ConfigurationError(f"Grid step must be positive, got {self.step}")
        if operator.index(self.count) < 1:
            raise ConfigurationError(f"Grid count must be at least 1, got {self.count}")

    def points(self) -> np.ndarray:
        return self.start + np.arange(self.count) * self.step


@dataclass(frozen=True)
class GridSpec:
    """Per-axis sampling grid of a multivariate function."""

    axes: Tuple[AxisGrid, ...]

    @classmethod
    def uniform(cls, start: float, step: float, count: int, n_axes: int = 3) -> "GridSpec":
        return cls(tuple(AxisGrid(start, step, count) for _ in range(n_axes)))

    @classmethod
    def symmetric(cls, half_width: float, step: float, n_axes: int = 3) -> "GridSpec":
        """Grid from -half_width to +half_width inclusive."""
        count = int(round(2 * half_width / step)) + 1
        return cls.uniform(-half_width, step, count, n_axes)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(axis.count for axis in self.axes)


@dataclass(frozen=True)
class SweepRow:
    """One point of an NFE-versus-parameters curve."""

    method: str
    stage_ranks: Tuple[int, ...]
    params: int
    nfe: float
    sweeps: int
    seconds: float
    seed: int

    def to_csv_dict(self, record_timing: bool = True) -> Dict[str, str]:
        real = CsvSchema.REAL_FORMAT
        return {
            "method": self.method,
            "stage_ranks": CsvSchema.RANK_SEPARATOR.join(str(r) for r in self.stage_ranks),
            "params": str(self.params),
            "nfe": real.format(self.nfe),
            "sweeps": str(self.sweeps),
            "seconds": real.format(self.seconds if record_timing else 0.0),
            "seed": str(self.seed),
        }
