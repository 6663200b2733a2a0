"""
Dense tensor operators: unfolding, partition reshaping, Khatri-Rao products and
CP reconstruction.

All operators follow the colexicographic layout of DenseTensor (mode 1 fastest).
Reshaping by a partition is a transpose to the group-concatenated axis order
followed by a Fortran-order reshape, which reproduces the index map

    k_p = n_{P_p(1)} + sum_{i>=2} (n_{P_p(i)} - 1) * prod_{j<i} N_{P_p(j)}.

Unfold and reshape are pure permutations of the data, so they are exact.
"""

import logging
import math
from functools import reduce
from typing import Sequence

import numpy as np

from .domain.models import DenseTensor, FactorSet, ModePartition
from .exceptions import PartitionError, ShapeMismatchError, raise_shape_error
from .validators import ShapeValidator, require_valid_shape

logger = logging.getLogger(__name__)


def _check_mode(mode: int, order: int) -> None:
    if not 1 <= mode <= order:
        raise PartitionError(f"Mode {mode} is out of range 1..{order}", order=order)


# --- Unfolding and reshaping ---


def ten_reshape(X: DenseTensor, partition: ModePartition) -> DenseTensor:
    """Reshape X into the order-|P| tensor defined by ``partition``."""
    partition.check_order(X.order)
    sizes = partition.group_sizes(X.shape)
    permuted = np.transpose(X.to_array(), partition.axes())
    return DenseTensor(sizes, permuted.reshape(-1, order="F"))


def unten_reshape(Y: DenseTensor, partition: ModePartition, shape: Sequence[int]) -> DenseTensor:
    """Inverse of ten_reshape: recover the order-I tensor of the given shape."""
    shape = tuple(shape)
    require_valid_shape(shape)
    partition.check_order(len(shape))
    expected = partition.group_sizes(shape)
    if Y.shape != expected:
        raise_shape_error(
            f"Tensor shape does not match partition {partition} of shape {shape}",
            expected=expected,
            actual=Y.shape,
        )
    axes = partition.axes()
    permuted_shape = tuple(shape[axis] for axis in axes)
    permuted = Y.data.reshape(permuted_shape, order="F")
    original = np.transpose(permuted, np.argsort(axes))
    return DenseTensor(shape, original.reshape(-1, order="F"))


def mat_unfold(X: DenseTensor, mode: int) -> np.ndarray:
    """
    Matrix unfolding along ``mode`` (1-based): rows enumerate the other modes
    colexicographically, columns enumerate n_p.
    """
    _check_mode(mode, X.order)
    if X.order == 1:
        return X.data.reshape(1, -1).copy()
    unfolded = ten_reshape(X, ModePartition.unfolding(X.order, mode))
    return unfolded.to_array().copy()


def mat_fold(M: np.ndarray, shape: Sequence[int], mode: int) -> DenseTensor:
    """Inverse of mat_unfold."""
    shape = tuple(shape)
    require_valid_shape(shape)
    _check_mode(mode, len(shape))
    M = np.asarray(M, dtype=np.float64)
    n_mode = shape[mode - 1]
    n_rest = math.prod(shape) // n_mode
    if M.ndim != 2:
        raise_shape_error("mat_fold expects a matrix", expected=2, actual=M.ndim)
    ShapeValidator.validate_matrix(M.shape[0], M.shape[1], n_rest, n_mode, "unfolding").raise_if_invalid(
        ShapeMismatchError
    )
    if len(shape) == 1:
        return DenseTensor(shape, M.reshape(-1))
    partition = ModePartition.unfolding(len(shape), mode)
    return unten_reshape(DenseTensor(M.shape, M.ravel(order="F")), partition, shape)


def vectorize(X: DenseTensor) -> np.ndarray:
    """vec(X): the storage order, equal to ten_reshape with {{1..I}}."""
    return X.data.copy()


# --- Khatri-Rao products ---


def khatri_rao(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """
    Column-wise Kronecker product A ⊙ B; B's row index varies fastest, so in
    F_I ⊙ ... ⊙ F_1 the mode-1 index is fastest.
    """
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.ndim != 2 or B.ndim != 2:
        raise_shape_error("khatri_rao expects two matrices", actual=(A.ndim, B.ndim))
    if A.shape[1] != B.shape[1]:
        raise_shape_error("khatri_rao needs equal column counts", expected=A.shape[1], actual=B.shape[1])
    return (A[:, None, :] * B[None, :, :]).reshape(A.shape[0] * B.shape[0], A.shape[1])


def khatri_rao_chain(matrices: Sequence[np.ndarray], rank: int = None) -> np.ndarray:
    """M_1 ⊙ M_2 ⊙ ... ⊙ M_k; the empty chain is the 1 x rank all-ones matrix."""
    if not matrices:
        if rank is None:
            raise ShapeMismatchError("The rank is needed for an empty Khatri-Rao chain")
        return np.ones((1, rank))
    return reduce(khatri_rao, matrices)


def mttkrp(X: DenseTensor, factors: FactorSet, mode: int) -> np.ndarray:
    """
    mat_unfold(X, mode)^T @ (F_I ⊙ ... ⊙ F_{p+1} ⊙ F_{p-1} ⊙ ... ⊙ F_1), computed by
    contracting the tensor with the other factors without forming the
    Khatri-Rao matrix.
    """
    _check_mode(mode, X.order)
    if factors.shape != X.shape:
        raise_shape_error("Factor rows do not match the tensor shape", expected=X.shape, actual=factors.shape)
    order, rank = X.order, factors.rank
    if order == 1:
        return np.repeat(X.data[:, None], rank, axis=1)

    operands = [X.to_array(), list(range(order))]
    for axis, factor in enumerate(factors):
        if axis != mode - 1:
            operands += [factor, [axis, order]]
    return np.einsum(*operands, [mode - 1, order], optimize=True)


# --- CP forms ---


def cp_mat_form(F: FactorSet, mode: int) -> np.ndarray:
    """(F_I ⊙ ... ⊙ F_{p+1} ⊙ F_{p-1} ⊙ ... ⊙ F_1) @ F_p^T, equal to mat_unfold of the CP tensor."""
    _check_mode(mode, F.order)
    others = [F[axis] for axis in reversed(range(F.order)) if axis != mode - 1]
    return khatri_rao_chain(others, F.rank) @ F[mode - 1].T


def cp_reconstruct(F: FactorSet, shape: Sequence[int] = None) -> DenseTensor:
    """Sum over r of the outer products of the r-th factor columns."""
    if shape is not None and tuple(shape) != F.shape:
        raise_shape_error("Factor rows do not match the requested shape", expected=tuple(shape), actual=F.shape)
    # Colex storage: reshaped to N_1 x prod(rest), X = F_1 (F_I ⊙ ... ⊙ F_2)^T
    rest = khatri_rao_chain(list(reversed(F.factors[1:])), F.rank)
    return DenseTensor(F.shape, (F[0] @ rest.T).ravel(order="F"))


def cp_reshape_factors(F: FactorSet, partition: ModePartition) -> FactorSet:
    """Factors of ten_reshape(cp_reconstruct(F), P): group p gets F_{P_p(last)} ⊙ ... ⊙ F_{P_p(1)}."""
    partition.check_order(F.order)
    return FactorSet(tuple(
        khatri_rao_chain([F[mode - 1] for mode in reversed(group)])
        for group in partition.groups
    ))
