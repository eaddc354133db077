"""Small dense solvers shared by the registration, trend and tps services."""
import warnings
from typing import NamedTuple

import numpy as np
from scipy import linalg

from morphogrid.core.config import RANK_TOLERANCE


class LeastSquaresSolution(NamedTuple):
    coefficients: np.ndarray
    fitted: np.ndarray
    residuals: np.ndarray
    rank: int
    condition_number: float


def qr_least_squares(design: np.ndarray, rhs: np.ndarray) -> LeastSquaresSolution:
    """Ordinary least squares by economic QR with a rank check on R's diagonal.

    ``rank`` is less than the column count when some |R_ii| falls below
    RANK_TOLERANCE times the largest one; coefficients are then NaN and
    callers raise their own rank error.
    """
    q, r = linalg.qr(design, mode="economic")
    diagonal = np.abs(np.diag(r))
    scale = diagonal.max() if diagonal.size else 0.0
    rank = int(np.sum(diagonal > RANK_TOLERANCE * max(scale, 1e-300)))
    singular = np.linalg.svd(design, compute_uv=False)
    condition = float(singular[0] / singular[-1]) if singular[-1] > 0 else float("inf")
    if rank < design.shape[1]:
        nan = np.full((design.shape[1],) + rhs.shape[1:], np.nan)
        return LeastSquaresSolution(nan, np.full_like(rhs, np.nan), np.full_like(rhs, np.nan), rank, condition)
    coefficients = linalg.solve_triangular(r, q.T @ rhs)
    fitted = design @ coefficients
    return LeastSquaresSolution(coefficients, fitted, rhs - fitted, rank, condition)


def lu_solve_checked(matrix: np.ndarray, rhs: np.ndarray):
    """Pivoted LU solve; returns (solution, smallest |pivot| / largest |pivot|)."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", linalg.LinAlgWarning)
        lu, piv = linalg.lu_factor(matrix, check_finite=True)
    pivots = np.abs(np.diag(lu))
    ratio = float(pivots.min() / pivots.max()) if pivots.max() > 0 else 0.0
    if ratio <= np.finfo(float).eps:
        return None, ratio
    return linalg.lu_solve((lu, piv), rhs), ratio
