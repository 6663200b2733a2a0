"""
Custom exception hierarchy for MRLR Tensor.

Every error raised by the library carries a context dictionary, recovery
suggestions and an error code. The CLI maps each family to a process exit
code through the ``exit_code`` class attribute.
"""

from typing import Dict, Any, Optional, List, Sequence

from .constants import ExitCodes


class MrlrError(Exception):
    """
    Base exception for all MRLR Tensor errors.

    Provides rich context and error recovery guidance.
    """

    exit_code: int = ExitCodes.PARSE_OR_IO

    def __init__(
        self,
        message: str,
        context: Optional[Dict[str, Any]] = None,
        suggestions: Optional[List[str]] = None,
        error_code: Optional[str] = None
    ):
        """
        Initialize the exception with context and recovery suggestions.

        Args:
            message: Human-readable error message
            context: Additional context about where/why the error occurred
            suggestions: List of potential solutions or next steps
            error_code: Unique error code for programmatic handling
        """
        super().__init__(message)
        self.message = message
        self.context = context or {}
        self.suggestions = suggestions or []
        self.error_code = error_code

    def __str__(self) -> str:
        """Return formatted error message with context."""
        lines = [super().__str__()]

        if self.error_code:
            lines.append(f"Error Code: {self.error_code}")

        if self.context:
            lines.append("Context:")
            for key, value in self.context.items():
                lines.append(f"  {key}: {value}")

        if self.suggestions:
            lines.append("Suggestions:")
            for suggestion in self.suggestions:
                lines.append(f"  • {suggestion}")

        return "\n".join(lines)


class ConfigurationError(MrlrError):
    """Raised when configuration is invalid or missing."""

    exit_code = ExitCodes.PARSE_OR_IO

    def __init__(self, message: str, config_file: str = None, **kwargs):
        context = kwargs.get('context', {})
        if config_file:
            context['config_file'] = config_file

        suggestions = kwargs.get('suggestions', [])
        if not suggestions:
            suggestions = [
                "Check the configuration file syntax",
                "Compare your file against config.sample.yaml",
                "Check that numeric options are in range (max_sweeps >= 1, restarts >= 1)",
            ]

        super().__init__(
            message,
            context=context,
            suggestions=suggestions,
            error_code="CONFIG_ERROR"
        )


class SpecSyntaxError(MrlrError):
    """Raised when a partition, plan, range or shape string cannot be parsed."""

    exit_code = ExitCodes.PARSE_OR_IO

    def __init__(self, message: str, text: str = None, grammar: str = None, **kwargs):
        context = kwargs.get('context', {})
        if text is not None:
            context['text'] = repr(text)
        if grammar:
            context['expected'] = grammar

        super().__init__(
            message,
            context=context,
            suggestions=kwargs.get('suggestions', []),
            error_code="SPEC_SYNTAX_ERROR"
        )


class TensorFileError(MrlrError):
    """Raised when a tensor or model file cannot be read or written."""

    exit_code = ExitCodes.PARSE_OR_IO
    default_code = "FILE_FORMAT_ERROR"

    def __init__(self, message: str, path: str = None, offset: int = None, **kwargs):
        context = kwargs.get('context', {})
        if path:
            context['path'] = path
        if offset is not None:
            context['byte_offset'] = offset

        suggestions = kwargs.get('suggestions', [])
        if not suggestions:
            suggestions = [
                "Check that the file was written by 'mrlr generate' or write_tensor/write_model",
                "Check that the file was not truncated during copy",
            ]

        super().__init__(
            message,
            context=context,
            suggestions=suggestions,
            error_code=self.default_code
        )


class BadMagicError(TensorFileError):
    """The file does not start with a known magic string."""

    default_code = "BAD_MAGIC"


class TruncatedFileError(TensorFileError):
    """The binary payload ends before the header says it should."""

    default_code = "TRUNCATED_FILE"

    def __init__(self, message: str, expected_bytes: int, actual_bytes: int, **kwargs):
        context = kwargs.pop('context', {})
        context['expected_bytes'] = expected_bytes
        context['actual_bytes'] = actual_bytes
        self.expected_bytes = expected_bytes
        self.actual_bytes = actual_bytes
        super().__init__(message, context=context, **kwargs)


class PayloadMismatchError(TensorFileError):
    """Header fields are inconsistent or bytes follow the declared payload."""

    default_code = "PAYLOAD_MISMATCH"


class PartitionError(MrlrError):
    """Raised when a mode partition or partition plan is invalid."""

    exit_code = ExitCodes.VALIDATION

    def __init__(self, message: str, groups: Sequence[Sequence[int]] = None, order: int = None, **kwargs):
        context = kwargs.get('context', {})
        if groups is not None:
            context['groups'] = [list(g) for g in groups]
        if order is not None:
            context['tensor_order'] = order

        suggestions = kwargs.get('suggestions', [])
        if not suggestions:
            suggestions = [
                "Every mode 1..I must appear in exactly one group",
                "Groups must not be empty",
                "Use the partition format '1,2|3' (groups split by '|', modes by ',')",
            ]

        super().__init__(
            message,
            context=context,
            suggestions=suggestions,
            error_code="PARTITION_ERROR"
        )


class ShapeMismatchError(MrlrError):
    """Raised when tensor, matrix or factor dimensions do not agree."""

    exit_code = ExitCodes.VALIDATION

    def __init__(self, message: str, expected: Any = None, actual: Any = None, **kwargs):
        context = kwargs.get('context', {})
        if expected is not None:
            context['expected'] = expected
        if actual is not None:
            context['actual'] = actual

        super().__init__(
            message,
            context=context,
            suggestions=kwargs.get('suggestions', []),
            error_code="SHAPE_ERROR"
        )


class NumericalError(MrlrError):
    """Raised on non-finite data or numerically meaningless requests."""

    exit_code = ExitCodes.NUMERICAL

    def __init__(self, message: str, **kwargs):
        suggestions = kwargs.get('suggestions', [])
        if not suggestions:
            suggestions = [
                "Check the input tensor for NaN or infinite values",
                "Check that the reference tensor is not identically zero",
            ]

        super().__init__(
            message,
            context=kwargs.get('context', {}),
            suggestions=suggestions,
            error_code="NUMERICAL_ERROR"
        )


# Convenience function for the most common error pattern
def raise_shape_error(message: str, expected: Any = None, actual: Any = None, **kwargs):
    """Convenience function to raise shape errors."""
    raise ShapeMismatchError(message, expected=expected, actual=actual, **kwargs)
