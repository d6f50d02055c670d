"""Dense linear-algebra kernel.

Symmetric eigendecomposition, thin SVD, Moore-Penrose pseudo-inverse and
Hadamard powers. Every function is pure: inputs are never modified and the
outputs are freshly allocated arrays.

Sign convention: each eigenvector (and each left singular vector) is flipped
so that its largest-magnitude component is positive. Ties in magnitude go to
the lowest row index. Eigenvalues are returned in descending order; equal
eigenvalues keep the column order LAPACK produced.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg

from ..errors import DimensionError

SYMMETRY_TOLERANCE = 1e-10


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenpairs of a symmetric matrix, sorted by descending eigenvalue."""
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def size(self) -> int:
        return int(self.eigenvalues.shape[0])

    def reconstruct(self) -> np.ndarray:
        """Return P diag(lambda) P^T."""
        return (self.eigenvectors * self.eigenvalues) @ self.eigenvectors.T


@dataclass(frozen=True)
class SvdDecomposition:
    """Thin SVD ``M = U diag(s) V^T`` with descending singular values."""
    left: np.ndarray
    singular_values: np.ndarray
    right: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.left * self.singular_values) @ self.right.T


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Validate a finite 2-D float array."""
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"{name} must have at least one row and column")
    if not np.all(np.isfinite(arr)):
        raise DimensionError(f"{name} has non-finite entries")
    return arr


def symmetrize(m: np.ndarray) -> np.ndarray:
    """Symmetric part (M + M^T) / 2, used on sample covariances."""
    m = np.asarray(m, dtype=np.float64)
    return 0.5 * (m + m.T)


def _column_signs(vectors: np.ndarray) -> np.ndarray:
    """+1/-1 per column making the largest-magnitude entry positive."""
    if vectors.size == 0:
        return np.ones(vectors.shape[1])
    pivots = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivots, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return signs


def sym_eig(m, k: Optional[int] = None) -> SpectralDecomposition:
    """Eigendecomposition of a symmetric matrix.

    Args:
        m: Square symmetric matrix (relative asymmetry <= 1e-10).
        k: If given, only the top-k eigenpairs are computed.

    Returns:
        SpectralDecomposition with eigenvalues in descending order.

    Raises:
        DimensionError: If ``m`` is not square, not symmetric, or ``k`` is
            out of range.
    """
    m = as_matrix(m)
    n = m.shape[0]
    if m.shape[1] != n:
        raise DimensionError(f"sym_eig needs a square matrix, got {m.shape}")
    scale = np.linalg.norm(m)
    if np.linalg.norm(m - m.T) > SYMMETRY_TOLERANCE * max(scale, np.finfo(float).tiny):
        raise DimensionError("sym_eig needs a symmetric matrix")
    if k is not None and not 1 <= k <= n:
        raise DimensionError(f"k must lie in [1, {n}], got {k}")

    if k is None or k == n:
        values, vectors = linalg.eigh(m)
    else:
        # LAPACK's subset driver returns exactly the full solution's top-k.
        values, vectors = linalg.eigh(m, subset_by_index=[n - k, n - 1])

    order = np.argsort(-values, kind="stable")
    values = values[order]
    vectors = vectors[:, order]
    vectors = vectors * _column_signs(vectors)
    return SpectralDecomposition(eigenvalues=values, eigenvectors=vectors)


def svd_thin(m) -> SvdDecomposition:
    """Thin SVD with min(rows, cols) singular values in descending order."""
    m = as_matrix(m)
    u, s, vt = linalg.svd(m, full_matrices=False, lapack_driver="gesdd")
    signs = _column_signs(u)
    return SvdDecomposition(left=u * signs, singular_values=s, right=vt.T * signs)


def pinv(m, tol: float = 1e-12) -> np.ndarray:
    """Moore-Penrose pseudo-inverse via SVD.

    Singular values below ``tol * s_max`` are treated as zero.
    """
    if not 0.0 < tol < 1.0:
        raise DimensionError(f"tol must lie in (0, 1), got {tol}")
    svd = svd_thin(m)
    s = svd.singular_values
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((svd.right.shape[0], svd.left.shape[0]))
    keep = s > tol * s[0]
    inv = np.zeros_like(s)
    inv[keep] = 1.0 / s[keep]
    return (svd.right * inv) @ svd.left.T


def hadamard_pow(m, n: int) -> np.ndarray:
    """Element-wise n-th power (M)^{odot n}."""
    if int(n) != n or n < 1:
        raise DimensionError(f"Hadamard power needs a positive integer, got {n}")
    return np.power(as_matrix(m), int(n))


def orthonormal_complement(u: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the complement of span(u) via full QR."""
    u = as_matrix(u)
    q, _ = linalg.qr(u, mode="full")
    return q[:, u.shape[1]:]


def principal_cosines(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cosines of the principal angles between span(a) and span(b)."""
    angles = linalg.subspace_angles(as_matrix(a), as_matrix(b))
    return np.cos(angles)
