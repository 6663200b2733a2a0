"""
Parsers and printers for the shell-friendly spec strings used by the CLI.

    partition   "1,2|3"            groups split by '|', 1-based modes by ','
    plan        "1,2|3@2;1|2|3@1"  stages split by ';', each '<partition>@<rank>'
    rank range  "1:40" / "1:40:2"  inclusive
    rank list   "1,2,5" or a rank range
    grid        "-5,0.1,100"       start,step,count
    int list    "100,100,100"

Parsing errors raise SpecSyntaxError; well-formed text describing an invalid
partition raises PartitionError from the domain model.
"""

import re
from typing import List, Sequence, Tuple

from ..constants import PLAN_PRESETS, SpecGrammar
from ..exceptions import SpecSyntaxError
from .models import GridSpec, ModePartition, PartitionPlan, PlanStage

_INT = re.compile(r"^\s*[+-]?\d+\s*$")


def parse_int_list(text: str, what: str = "list") -> Tuple[int, ...]:
    """Parse '3,4,5' into (3, 4, 5)."""
    parts = text.split(SpecGrammar.MODE_SEPARATOR)
    if not text.strip() or not all(_INT.match(p) for p in parts):
        raise SpecSyntaxError(f"Cannot parse {what} {text!r}", text=text, grammar="comma-separated integers")
    return tuple(int(p) for p in parts)


def parse_partition_spec(text: str) -> ModePartition:
    """Parse '1,2|3' into {{1,2},{3}}."""
    groups: List[Tuple[int, ...]] = []
    for raw_group in text.split(SpecGrammar.GROUP_SEPARATOR):
        modes = raw_group.split(SpecGrammar.MODE_SEPARATOR)
        if not raw_group.strip() or not all(_INT.match(m) for m in modes):
            raise SpecSyntaxError(
                f"Cannot parse partition {text!r}",
                text=text,
                grammar=SpecGrammar.PARTITION_HELP,
            )
        groups.append(tuple(int(m) for m in modes))
    return ModePartition(tuple(groups))


def format_partition_spec(partition: ModePartition) -> str:
    return str(partition)


def parse_plan_stages(text: str) -> List[PlanStage]:
    """Parse '1,2|3@2;1|2|3@1' into plan stages (in the written order)."""
    stages: List[PlanStage] = []
    for raw_stage in text.split(SpecGrammar.STAGE_SEPARATOR):
        partition_text, marker, rank_text = raw_stage.strip().rpartition(SpecGrammar.RANK_MARKER)
        if not marker or not _INT.match(rank_text):
            raise SpecSyntaxError(f"Cannot parse plan stage {raw_stage!r}", text=text, grammar=SpecGrammar.PLAN_HELP)
        stages.append(PlanStage(parse_partition_spec(partition_text), int(rank_text)))
    return stages


def resolve_plan_text(text: str) -> str:
    """Expand a preset name (see constants.PLAN_PRESETS) to its plan spec."""
    return PLAN_PRESETS.get(text.strip(), text)


def format_plan_spec(plan: PartitionPlan) -> str:
    return str(plan)


def parse_rank_range(text: str) -> List[int]:
    """Parse 'a:b' or 'a:b:step' into the inclusive list of ranks."""
    parts = text.split(SpecGrammar.RANGE_SEPARATOR)
    if len(parts) == 1 and _INT.match(parts[0]):
        parts = [parts[0], parts[0]]
    if len(parts) not in (2, 3) or not all(_INT.match(p) for p in parts):
        raise SpecSyntaxError(f"Cannot parse rank range {text!r}", text=text, grammar=SpecGrammar.RANGE_HELP)
    start, stop = int(parts[0]), int(parts[1])
    step = int(parts[2]) if len(parts) == 3 else 1
    if start < 1 or stop < start or step < 1:
        raise SpecSyntaxError(
            f"Rank range {text!r} must satisfy 1 <= a <= b and step >= 1",
            text=text,
            grammar=SpecGrammar.RANGE_HELP,
        )
    return list(range(start, stop + 1, step))


def parse_random_cp(text: str) -> Tuple[Tuple[int, ...], int, int]:
    """Parse '6,7,8/2/0' into (shape, rank, seed)."""
    parts = text.split(SpecGrammar.RANDOM_CP_SEPARATOR)
    if len(parts) != 3 or not _INT.match(parts[1]) or not _INT.match(parts[2]):
        raise SpecSyntaxError(f"Cannot parse random CP spec {text!r}", text=text, grammar="shape/rank/seed, e.g. '6,7,8/2/0'")
    return parse_int_list(parts[0], "shape"), int(parts[1]), int(parts[2])


def levels_to_indices(levels: Sequence[int], n_partitions: int) -> List[int]:
    """Map 1-based regular-partition levels to 0-based indices, validating range."""
    indices = []
    for level in levels:
        if not 1 <= level <= n_partitions:
            raise SpecSyntaxError(
                f"Level {level} is out of range; valid levels are 1..{n_partitions}",
                text=str(list(levels)),
            )
        indices.append(level - 1)
    return indices


def parse_rank_list(text: str) -> List[int]:
    """Parse either a rank range ('1:40') or an explicit list ('1,2,5')."""
    if SpecGrammar.RANGE_SEPARATOR in text:
        return parse_rank_range(text)
    return list(parse_int_list(text, "rank list"))


def parse_partition_list(text: str) -> List[ModePartition]:
    """Parse partitions separated by ';' without ranks, e.g. '1,2|3;1|2|3'."""
    return [parse_partition_spec(part) for part in text.split(SpecGrammar.STAGE_SEPARATOR)]


def parse_grid_spec(text: str, n_axes: int = 3) -> GridSpec:
    """Parse 'start,step,count' into a uniform grid over ``n_axes`` axes."""
    parts = text.split(SpecGrammar.MODE_SEPARATOR)
    try:
        if len(parts) != 3 or not _INT.match(parts[2]):
            raise ValueError(text)
        start, step, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise SpecSyntaxError(f"Cannot parse grid {text!r}", text=text, grammar=SpecGrammar.GRID_HELP)
    return GridSpec.uniform(start, step, count, n_axes)
