"""
Validation utilities for MRLR Tensor.

Validators collect every problem they find into a ValidationResult instead of
stopping at the first one, so error messages list all offending groups or
dimensions at once.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Type

from .exceptions import MrlrError, PartitionError, ShapeMismatchError


@dataclass
class ValidationResult:
    """Result of a validation operation."""

    is_valid: bool = True
    errors: List[str] = field(default_factory=list)

    def __post_init__(self):
        """Ensure consistency."""
        if self.errors and self.is_valid:
            self.is_valid = False

    def add_error(self, error: str) -> None:
        """Add an error."""
        self.errors.append(error)
        self.is_valid = False

    def raise_if_invalid(self, error_cls: Type[MrlrError] = PartitionError, **kwargs) -> None:
        """Raise ``error_cls`` carrying every collected error if invalid."""
        if not self.is_valid:
            context = kwargs.pop("context", {})
            context["errors"] = self.errors
            raise error_cls(f"Validation failed: {'; '.join(self.errors)}", context=context, **kwargs)


class PartitionValidator:
    """Validates ordered mode partitions (disjoint, non-empty, covering 1..I)."""

    @staticmethod
    def validate_groups(groups: Sequence[Sequence[int]], order: Optional[int] = None) -> ValidationResult:
        result = ValidationResult()

        if not groups:
            result.add_error("A partition needs at least one group")
            return result

        seen: dict = {}
        for index, group in enumerate(groups, start=1):
            if not group:
                result.add_error(f"Group {index} is empty")
            for mode in group:
                if isinstance(mode, bool) or not isinstance(mode, int):
                    result.add_error(f"Group {index} holds non-integer mode {mode!r}")
                    continue
                if mode < 1:
                    result.add_error(f"Group {index} holds mode {mode}; modes are 1-based")
                if mode in seen:
                    result.add_error(f"Mode {mode} appears in groups {seen[mode]} and {index}")
                else:
                    seen[mode] = index

        if not result.is_valid:
            return result

        expected_order = order if order is not None else len(seen)
        missing = sorted(set(range(1, expected_order + 1)) - set(seen))
        extra = sorted(set(seen) - set(range(1, expected_order + 1)))
        if missing:
            result.add_error(f"Modes {missing} are not covered by any group")
        if extra:
            result.add_error(f"Modes {extra} exceed the tensor order {expected_order}")

        return result


class ShapeValidator:
    """Validates tensor shapes and matrix dimensions."""

    @staticmethod
    def validate_shape(shape: Sequence[int]) -> ValidationResult:
        result = ValidationResult()

        if len(shape) < 1:
            result.add_error("A tensor needs at least one mode")
        for index, size in enumerate(shape, start=1):
            if isinstance(size, bool) or not isinstance(size, int):
                result.add_error(f"Mode {index} size {size!r} is not an integer")
            elif size < 1:
                result.add_error(f"Mode {index} has size {size}; sizes must be >= 1")

        return result

    @staticmethod
    def validate_matrix(rows: int, cols: int, expected_rows: int, expected_cols: int, label: str = "matrix") -> ValidationResult:
        result = ValidationResult()

        if rows != expected_rows:
            result.add_error(f"{label} has {rows} rows, expected {expected_rows}")
        if cols != expected_cols:
            result.add_error(f"{label} has {cols} columns, expected {expected_cols}")

        return result


def require_valid_shape(shape: Sequence[int]) -> None:
    """Raise ShapeMismatchError unless ``shape`` is a valid tensor shape."""
    ShapeValidator.validate_shape(shape).raise_if_invalid(ShapeMismatchError)
