"""
Rank-R CP (PARAFAC) fitting by alternating least squares.

Each sweep updates the factors in mode order 1..J. The update of factor j is the
exact least squares solution of

    min_H || mat_unfold(X, j) - K_j H^T ||_F,   K_j = F_J ⊙ ... ⊙ F_{j+1} ⊙ F_{j-1} ⊙ ... ⊙ F_1

obtained from the normal equations. K_j is never formed: its Gram matrix is
the Hadamard product of the per-factor Gram matrices and K_j^T mat_unfold(X, j)
is computed by an MTTKRP contraction.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from .config_validation import AlsConfig
from .constants import AlsDefaults
from .domain.models import AlsTrace, DenseTensor, FactorSet
from .exceptions import NumericalError, raise_shape_error
from .tensor_ops import cp_reconstruct, mttkrp

logger = logging.getLogger(__name__)


def init_factors(shape: Sequence[int], rank: int, seed: int) -> FactorSet:
    """Standard normal factors from a generator seeded by ``seed``."""
    if rank < 1:
        raise_shape_error("Rank must be at least 1", expected=">= 1", actual=rank)
    rng = np.random.default_rng(seed)
    return FactorSet(tuple(rng.standard_normal((n, rank)) for n in shape))


def solve_gram(gram: np.ndarray, rhs: np.ndarray) -> Tuple[np.ndarray, bool]:
    """
    Solve ``gram @ Y = rhs`` for a symmetric positive semi-definite Gram matrix.

    Returns (Y, singular). When the Gram matrix is singular to working precision
    the eigenvalue-thresholded pseudo-inverse is used and ``singular`` is True.
    """
    eigenvalues = linalg.eigvalsh(gram)
    largest = eigenvalues[-1]
    if largest > 0 and eigenvalues[0] > AlsDefaults.PINV_THRESHOLD * largest:
        try:
            return linalg.cho_solve(linalg.cho_factor(gram), rhs), False
        except linalg.LinAlgError:
            logger.debug("Cholesky factorization failed, using the pseudo-inverse")

    w, V = linalg.eigh(gram)
    keep = w > AlsDefaults.PINV_THRESHOLD * max(w[-1], 0.0)
    V_kept = V[:, keep]
    return (V_kept / w[keep]) @ (V_kept.T @ rhs), True


def ls_update(Xhat_p: np.ndarray, K: np.ndarray) -> Tuple[np.ndarray, bool]:
    """
    Least squares minimizer H of ||Xhat_p - K H^T||_F via the Gram system.

    Returns (H, singular) where ``singular`` flags the pseudo-inverse fallback.
    """
    Xhat_p = np.asarray(Xhat_p, dtype=np.float64)
    K = np.asarray(K, dtype=np.float64)
    if Xhat_p.shape[0] != K.shape[0]:
        raise_shape_error("Unfolding and Khatri-Rao matrix row counts differ", expected=K.shape[0], actual=Xhat_p.shape[0])
    H_t, singular = solve_gram(K.T @ K, K.T @ Xhat_p)
    return H_t.T, singular


def _hadamard_of_grams(grams: List[np.ndarray], skip: int, rank: int) -> np.ndarray:
    gram = np.ones((rank, rank))
    for axis, g in enumerate(grams):
        if axis != skip:
            gram *= g
    return gram


def _run_als(
    X: DenseTensor,
    start: FactorSet,
    config: AlsConfig,
    norm_x: float,
    restart: int,
) -> Tuple[FactorSet, AlsTrace]:
    factors = [f.copy() for f in start]
    grams = [f.T @ f for f in factors]
    rank = start.rank
    trace = AlsTrace(restart=restart, seed=config.seed + restart)

    for sweep in range(1, config.max_sweeps + 1):
        for axis in range(X.order):
            rhs = mttkrp(X, FactorSet(tuple(factors)), axis + 1)
            H_t, singular = solve_gram(_hadamard_of_grams(grams, axis, rank), rhs.T)
            factors[axis] = H_t.T
            grams[axis] = factors[axis].T @ factors[axis]
            trace.singular_solves += int(singular)

        fitted = FactorSet(tuple(factors))
        error = float(np.linalg.norm(X.data - cp_reconstruct(fitted).data))
        trace.errors.append(error)
        trace.sweeps_run = sweep
        logger.debug(f"restart {restart} sweep {sweep}: error {error:.6e}")

        if error <= AlsDefaults.EXACT_FIT_FLOOR * norm_x:
            trace.converged = True
            break
        if sweep > 1 and abs(trace.errors[-2] - error) < config.rel_tol * trace.errors[-2]:
            trace.converged = True
            break

    if trace.singular_solves:
        logger.warning(
            f"ALS restart {restart}: {trace.singular_solves} singular Gram solves used the pseudo-inverse"
        )
    return FactorSet(tuple(factors)), trace


def als_fit(
    X: DenseTensor,
    rank: int,
    config: AlsConfig = None,
    init: Optional[FactorSet] = None,
    threads: int = 1,
) -> Tuple[FactorSet, AlsTrace]:
    """
    Fit a rank-``rank`` CP model to X.

    Runs ``config.restarts`` random starts (seeds ``seed + k``) and keeps the one
    with the lowest final error, ties going to the lower restart index. With
    ``init`` a single warm-started run is made instead.
    """
    config = config or AlsConfig()
    if rank < 1:
        raise_shape_error("Rank must be at least 1", expected=">= 1", actual=rank)
    if not X.is_finite():
        raise NumericalError("Input tensor contains non-finite values", context={"shape": X.shape})

    norm_x = X.norm()
    if norm_x == 0.0:
        logger.debug("Zero tensor: returning zero factors")
        return FactorSet.zeros(X.shape, rank), AlsTrace(
            errors=[0.0], sweeps_run=1, converged=True, seed=config.seed
        )

    if init is not None:
        if init.shape != X.shape or init.rank != rank:
            raise_shape_error(
                "Warm-start factors do not match the tensor shape and rank",
                expected=(X.shape, rank),
                actual=(init.shape, init.rank),
            )
        return _run_als(X, init, config, norm_x, restart=0)

    def run(restart: int) -> Tuple[FactorSet, AlsTrace]:
        start = init_factors(X.shape, rank, config.seed + restart)
        return _run_als(X, start, config, norm_x, restart)

    restarts = range(config.restarts)
    if threads > 1 and config.restarts > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, restarts))
    else:
        results = [run(restart) for restart in restarts]

    best_factors, best_trace = min(results, key=lambda result: (result[1].final_error, result[1].restart))
    logger.debug(
        f"ALS rank {rank} on {X.shape}: best restart {best_trace.restart} "
        f"error {best_trace.final_error:.6e} after {best_trace.sweeps_run} sweeps"
    )
    return best_factors, best_trace
