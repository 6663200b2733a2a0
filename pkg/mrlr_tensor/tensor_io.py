"""
Readers and writers for tensor files, model files and sweep CSV.

Tensor file::

    MRLR1 <I> <N_1> ... <N_I>\\n
    <prod(N_i) little-endian float64 values, mode 1 fastest>

Model file::

    MRLRM1 <I> <N_1> ... <N_I> <L>\\n
    stage <partition spec> <rank> <J>\\n          (L times)
    factor <rows> <cols>\\n                        (J times per stage)
    <rows * cols little-endian float64 values, column-major>

Every format error names the byte offset where reading stopped.
"""

import csv
import io
import logging
import math
import sys
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np

from .constants import CsvSchema, FileFormat
from .domain.models import DenseTensor, FactorSet, MrlrModel, MrlrStage, SweepRow
from .domain.specs import parse_partition_spec
from .exceptions import (
    BadMagicError,
    MrlrError,
    PayloadMismatchError,
    TensorFileError,
    TruncatedFileError,
)

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _read_bytes(path: PathLike) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as e:
        raise TensorFileError(
            f"Cannot read {path}: {e.strerror or e}",
            path=str(path),
            suggestions=["Check the path and the file permissions"],
        )


def _write_bytes(path: PathLike, payload: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(payload)


class _ByteCursor:
    """Sequential reader over a file's bytes that tracks the offset for error messages."""

    def __init__(self, raw: bytes, path: str):
        self.raw = raw
        self.path = path
        self.offset = 0

    def read_line(self, what: str) -> List[str]:
        end = self.raw.find(b"\n", self.offset, self.offset + FileFormat.MAX_HEADER_BYTES)
        if end < 0:
            raise TruncatedFileError(
                f"Missing newline-terminated {what}",
                expected_bytes=self.offset + 1,
                actual_bytes=len(self.raw),
                path=self.path,
                offset=self.offset,
            )
        try:
            tokens = self.raw[self.offset:end].decode("ascii").split()
        except UnicodeDecodeError:
            raise PayloadMismatchError(f"The {what} is not ASCII text", path=self.path, offset=self.offset)
        self.offset = end + 1
        return tokens

    def read_reals(self, count: int, what: str) -> np.ndarray:
        n_bytes = count * FileFormat.ITEM_SIZE
        available = len(self.raw) - self.offset
        if available < n_bytes:
            raise TruncatedFileError(
                f"The {what} is truncated: expected {n_bytes} bytes, found {available}",
                expected_bytes=n_bytes,
                actual_bytes=available,
                path=self.path,
                offset=len(self.raw),
            )
        values = np.frombuffer(self.raw, dtype=FileFormat.DTYPE, count=count, offset=self.offset)
        self.offset += n_bytes
        return values.astype(np.float64)

    def expect_end(self) -> None:
        trailing = len(self.raw) - self.offset
        if trailing:
            raise PayloadMismatchError(
                f"{trailing} unexpected bytes after the declared payload",
                path=self.path,
                offset=self.offset,
                context={"trailing_bytes": trailing},
            )


def _parse_ints(tokens: Sequence[str], what: str, cursor: _ByteCursor, line_offset: int) -> Tuple[int, ...]:
    try:
        values = tuple(int(t) for t in tokens)
    except ValueError:
        raise PayloadMismatchError(f"Non-integer field in the {what}: {' '.join(tokens)!r}", path=cursor.path, offset=line_offset)
    if any(v < 1 for v in values):
        raise PayloadMismatchError(f"Sizes in the {what} must be positive: {values}", path=cursor.path, offset=line_offset)
    return values


def _check_starts_with(raw: bytes, magic: str, path: str) -> None:
    head = raw[:len(magic) + 1]
    if head != (magic + " ").encode("ascii"):
        raise BadMagicError(
            f"Bad magic {head[:len(magic)]!r}: expected {magic!r}",
            path=path,
            offset=0,
        )


# --- Tensor files ---


def write_tensor(path: PathLike, X: DenseTensor) -> None:
    header = " ".join([FileFormat.TENSOR_MAGIC, str(X.order), *map(str, X.shape)]) + "\n"
    _write_bytes(path, header.encode("ascii") + X.data.astype(FileFormat.DTYPE).tobytes())
    logger.debug(f"Wrote tensor {X.shape} to {path}")


def read_tensor(path: PathLike) -> DenseTensor:
    """Read a tensor file; raises BadMagicError, TruncatedFileError or PayloadMismatchError."""
    raw = _read_bytes(path)
    _check_starts_with(raw, FileFormat.TENSOR_MAGIC, str(path))
    cursor = _ByteCursor(raw, str(path))
    tokens = cursor.read_line("tensor header")

    fields = _parse_ints(tokens[1:], "tensor header", cursor, 0)
    if not fields or len(fields) != fields[0] + 1:
        raise PayloadMismatchError(
            f"Tensor header declares order {fields[0] if fields else '?'} but lists {max(len(fields) - 1, 0)} mode sizes",
            path=str(path),
            offset=0,
        )
    shape = fields[1:]
    data = cursor.read_reals(math.prod(shape), "tensor payload")
    cursor.expect_end()
    logger.debug(f"Read tensor {shape} from {path}")
    return DenseTensor(shape, data)


# --- Model files ---


def write_model(path: PathLike, model: MrlrModel) -> None:
    header = " ".join([FileFormat.MODEL_MAGIC, str(len(model.shape)), *map(str, model.shape), str(len(model.stages))]) + "\n"
    out = io.BytesIO()
    out.write(header.encode("ascii"))
    for stage in model.stages:
        line = f"{FileFormat.STAGE_TAG} {stage.partition} {stage.rank} {len(stage.factors)}\n"
        out.write(line.encode("ascii"))
        for factor in stage.factors:
            rows, cols = factor.shape
            out.write(f"{FileFormat.FACTOR_TAG} {rows} {cols}\n".encode("ascii"))
            out.write(np.asarray(factor).ravel(order="F").astype(FileFormat.DTYPE).tobytes())
    _write_bytes(path, out.getvalue())
    logger.debug(f"Wrote model with {len(model.stages)} stages to {path}")


def _read_stage(cursor: _ByteCursor, index: int) -> MrlrStage:
    line_offset = cursor.offset
    tokens = cursor.read_line(f"stage {index} header")
    if len(tokens) != 4 or tokens[0] != FileFormat.STAGE_TAG:
        raise PayloadMismatchError(f"Malformed stage {index} header: {' '.join(tokens)!r}", path=cursor.path, offset=line_offset)
    try:
        partition = parse_partition_spec(tokens[1])
    except MrlrError as e:
        raise PayloadMismatchError(f"Invalid partition in stage {index}: {e.message}", path=cursor.path, offset=line_offset)
    rank, n_factors = _parse_ints(tokens[2:], f"stage {index} header", cursor, line_offset)
    if n_factors != len(partition):
        raise PayloadMismatchError(
            f"Stage {index} declares {n_factors} factors for a partition of {len(partition)} groups",
            path=cursor.path,
            offset=line_offset,
        )

    factors = []
    for j in range(1, n_factors + 1):
        line_offset = cursor.offset
        tokens = cursor.read_line(f"factor {j} header of stage {index}")
        if len(tokens) != 3 or tokens[0] != FileFormat.FACTOR_TAG:
            raise PayloadMismatchError(f"Malformed factor header: {' '.join(tokens)!r}", path=cursor.path, offset=line_offset)
        rows, cols = _parse_ints(tokens[1:], "factor header", cursor, line_offset)
        if cols != rank:
            raise PayloadMismatchError(
                f"Factor {j} of stage {index} has {cols} columns, the stage rank is {rank}",
                path=cursor.path,
                offset=line_offset,
            )
        values = cursor.read_reals(rows * cols, f"factor {j} payload of stage {index}")
        factors.append(values.reshape((rows, cols), order="F"))
    return MrlrStage(partition, FactorSet(tuple(factors)))


def read_model(path: PathLike) -> MrlrModel:
    """Read a model file written by write_model; factor values are restored bit-exactly."""
    raw = _read_bytes(path)
    _check_starts_with(raw, FileFormat.MODEL_MAGIC, str(path))
    cursor = _ByteCursor(raw, str(path))
    tokens = cursor.read_line("model header")

    fields = _parse_ints(tokens[1:], "model header", cursor, 0)
    if len(fields) < 2 or len(fields) != fields[0] + 2:
        raise PayloadMismatchError("Model header must be 'MRLRM1 I N_1 .. N_I L'", path=str(path), offset=0)
    shape, n_stages = fields[1:-1], fields[-1]

    stages = tuple(_read_stage(cursor, index) for index in range(1, n_stages + 1))
    cursor.expect_end()
    try:
        model = MrlrModel(shape, stages)
    except MrlrError as e:
        raise PayloadMismatchError(f"Model stages do not fit shape {shape}: {e.message}", path=str(path), offset=0)
    logger.debug(f"Read model with {n_stages} stages from {path}")
    return model


def sniff_format(path: PathLike) -> str:
    """Return 'tensor' or 'model' from the magic at the start of the file."""
    try:
        with open(path, "rb") as f:
            head = f.read(len(FileFormat.MODEL_MAGIC) + 1)
    except OSError as e:
        raise TensorFileError(f"Cannot read {path}: {e.strerror or e}", path=str(path))
    if head.startswith((FileFormat.TENSOR_MAGIC + " ").encode("ascii")):
        return "tensor"
    if head.startswith((FileFormat.MODEL_MAGIC + " ").encode("ascii")):
        return "model"
    raise BadMagicError(
        f"Unknown file magic {head!r}: expected {FileFormat.TENSOR_MAGIC!r} or {FileFormat.MODEL_MAGIC!r}",
        path=str(path),
        offset=0,
    )


# --- CSV ---


def format_rows_csv(rows: Sequence[SweepRow], record_timing: bool = True) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=CsvSchema.COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row.to_csv_dict(record_timing))
    return buffer.getvalue()


def write_rows_csv(path: PathLike, rows: Sequence[SweepRow], record_timing: bool = True) -> None:
    """Write rows in the sweep/report CSV schema; '-' writes to stdout."""
    text = format_rows_csv(rows, record_timing)
    if str(path) == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as f:
        f.write(text)
    logger.debug(f"Wrote {len(rows)} CSV rows to {path}")
