"""Recovery-quality metrics.

Subspace extraction error, permutation/sign alignment of estimated sources,
element-wise BSS error and the source-encoder covariance map.
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from ..errors import AlignmentError, DimensionError
from .spectral import as_matrix


@dataclass(frozen=True)
class Alignment:
    """Column ``perm[i]`` of the estimate, times ``signs[i]``, encodes source i."""
    permutation: np.ndarray
    signs: np.ndarray
    score: float

    def apply(self, u_hat: np.ndarray) -> np.ndarray:
        """Reorder and sign-flip the estimate columns."""
        return np.asarray(u_hat)[:, self.permutation] * self.signs


@dataclass(frozen=True)
class MetricsRecord:
    """Scores of one recovery run. NaN marks a score that was not computed."""
    subspace_error: float
    bss_mse: float
    diag_cov_min: float
    offdiag_cov_max: float


def _paired(u_hat, s) -> Tuple[np.ndarray, np.ndarray]:
    u_hat = as_matrix(u_hat, "u_hat")
    s = as_matrix(s, "s")
    if u_hat.shape != s.shape:
        raise DimensionError(f"Shape mismatch: estimates {u_hat.shape} vs sources {s.shape}")
    return u_hat, s


def subspace_error(P_M: np.ndarray, U_L: np.ndarray) -> float:
    """1 - tr[P_M^T U_L U_L^T P_M] / k for column-orthonormal bases."""
    P_M = as_matrix(P_M, "P_M")
    U_L = as_matrix(U_L, "U_L")
    if P_M.shape != U_L.shape:
        raise DimensionError(f"Shape mismatch: {P_M.shape} vs {U_L.shape}")
    overlap = P_M.T @ U_L
    value = 1.0 - float(np.sum(overlap * overlap)) / P_M.shape[1]
    return min(max(value, 0.0), 1.0)


def correlation_matrix(s: np.ndarray, u_hat: np.ndarray) -> np.ndarray:
    """Pearson correlations C[i, j] = corr(s_i, u_hat_j).

    Raises:
        AlignmentError: If any column has zero variance.
    """
    u_hat, s = _paired(u_hat, s)
    if s.shape[0] < 2:
        raise DimensionError("Need at least 2 samples to correlate")
    s_c = s - s.mean(axis=0)
    u_c = u_hat - u_hat.mean(axis=0)
    s_norm = np.linalg.norm(s_c, axis=0)
    u_norm = np.linalg.norm(u_c, axis=0)
    if np.any(s_norm == 0.0) or np.any(u_norm == 0.0):
        raise AlignmentError("Cannot align a zero-variance column")
    return (s_c.T @ u_c) / np.outer(s_norm, u_norm)


def align_sources(u_hat: np.ndarray, s: np.ndarray) -> Alignment:
    """Optimal permutation and signs by the Hungarian algorithm on -|corr|."""
    corr = correlation_matrix(s, u_hat)
    rows, cols = linear_sum_assignment(-np.abs(corr))
    permutation = cols[np.argsort(rows)]
    picked = corr[np.arange(corr.shape[0]), permutation]
    signs = np.where(picked < 0.0, -1.0, 1.0)
    return Alignment(
        permutation=permutation.astype(np.int64),
        signs=signs,
        score=float(np.sum(np.abs(picked))),
    )


def bss_mse(u_aligned: np.ndarray, s: np.ndarray) -> float:
    """E[|s - u|^2] / k on already aligned estimates."""
    u_aligned, s = _paired(u_aligned, s)
    diff = s - u_aligned
    return float(np.mean(diff * diff))


def source_encoder_cov(u_hat: np.ndarray, s: np.ndarray, absolute: bool = False) -> np.ndarray:
    """Empirical Cov[u_hat, s] with rows indexing estimates, columns sources."""
    u_hat, s = _paired(u_hat, s)
    u_c = u_hat - u_hat.mean(axis=0)
    s_c = s - s.mean(axis=0)
    cov = u_c.T @ s_c / u_hat.shape[0]
    return np.abs(cov) if absolute else cov


def evaluate(u_hat: np.ndarray, s: np.ndarray, P_M: Optional[np.ndarray] = None,
             U_L: Optional[np.ndarray] = None) -> Tuple[MetricsRecord, Alignment]:
    """Align the estimates and compute every score at once."""
    alignment = align_sources(u_hat, s)
    aligned = alignment.apply(u_hat)
    cov = source_encoder_cov(aligned, s, absolute=True)
    k = cov.shape[0]
    off = cov[~np.eye(k, dtype=bool)]
    record = MetricsRecord(
        subspace_error=subspace_error(P_M, U_L) if P_M is not None and U_L is not None else float("nan"),
        bss_mse=bss_mse(aligned, s),
        diag_cov_min=float(np.min(np.diag(cov))),
        offdiag_cov_max=float(np.max(off)) if off.size else 0.0,
    )
    return record, alignment
