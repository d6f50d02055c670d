"""Closed-form predictions for the PCA-ICA cascade.

Gaussian coefficients of the basis nonlinearity, the linearization-error
covariances (general and asymptotic forms), the anisotropy of B, the
signal/noise eigenvalue ratio and the first-order eigenpair perturbation of
the input covariance.
"""

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Tuple

import numpy as np
from numpy.polynomial import hermite_e
from scipy import special

from ..errors import DimensionError, NotApplicableError, SingularityError
from .generative import Nonlinearity
from .spectral import as_matrix, orthonormal_complement, pinv, svd_thin, sym_eig, symmetrize

DEFAULT_NODES = 200
RANK_TOLERANCE = 1e-12


# ---------------------------------------------------------------------------
# Gaussian expectations
# ---------------------------------------------------------------------------

def hermite_e_poly(n: int, x: np.ndarray) -> np.ndarray:
    """Probabilists' Hermite polynomial He_n(x) by the three-term recurrence."""
    x = np.asarray(x, dtype=np.float64)
    if n == 0:
        return np.ones_like(x)
    prev, curr = np.ones_like(x), x.copy()
    for k in range(1, n):
        prev, curr = curr, x * curr - k * prev
    return curr


@lru_cache(maxsize=8)
def _hermite_rule(n_nodes: int) -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = hermite_e.hermegauss(n_nodes)
    return nodes, weights / math.sqrt(2.0 * math.pi)


@lru_cache(maxsize=16)
def _laguerre_rule(n_nodes: int, alpha: float) -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = special.roots_genlaguerre(n_nodes, alpha)
    return nodes, weights


def _half_line(fn: Callable[[np.ndarray], np.ndarray], n_nodes: int) -> float:
    """Integral of fn(x) phi(x) over x > 0, phi the standard normal density.

    The integrand is split into even and odd parts; with x = sqrt(2t) both
    become Gauss-Laguerre integrals (alpha = -1/2 and 0), exact for
    polynomial fn.
    """
    t_even, w_even = _laguerre_rule(n_nodes, -0.5)
    x_even = np.sqrt(2.0 * t_even)
    even = 0.5 * (fn(x_even) + fn(-x_even))
    t_odd, w_odd = _laguerre_rule(n_nodes, 0.0)
    x_odd = np.sqrt(2.0 * t_odd)
    odd = 0.5 * (fn(x_odd) - fn(-x_odd)) / x_odd
    return float(w_even @ even / (2.0 * math.sqrt(math.pi))
                 + w_odd @ odd / math.sqrt(2.0 * math.pi))


def gaussian_expectation(fn: Callable[[np.ndarray], np.ndarray],
                         branches=None, n_nodes: int = DEFAULT_NODES) -> float:
    """E[fn(xi)] for xi ~ Normal(0, 1).

    Args:
        fn: Vectorised integrand.
        branches: Optional ``(left, right)`` smooth pieces of ``fn`` on the
            negative and positive half-lines. When given, each half-line is
            integrated separately so a kink at 0 costs no accuracy.
        n_nodes: Quadrature order.
    """
    if branches is None:
        nodes, weights = _hermite_rule(n_nodes)
        return float(weights @ fn(nodes))
    left, right = branches
    return _half_line(lambda x: left(-x), n_nodes) + _half_line(right, n_nodes)


def hermite_moment(nl: Nonlinearity, n: int, sigma: float = 1.0,
                   n_nodes: int = DEFAULT_NODES) -> float:
    """E[f(sigma xi) He_n(xi)], which equals sigma^n E[f^(n)(sigma xi)]."""
    branches = nl.branches
    if branches is not None:
        left, right = branches
        branches = (lambda x: left(sigma * x) * hermite_e_poly(n, x),
                    lambda x: right(sigma * x) * hermite_e_poly(n, x))
    return gaussian_expectation(lambda x: nl(sigma * x) * hermite_e_poly(n, x),
                                branches=branches, n_nodes=n_nodes)


@dataclass(frozen=True)
class GaussianCoefficients:
    """Unit-Gaussian averages of f', f^2 and f'''."""
    kind: str
    odd: bool
    f_bar_prime: float
    f_bar_sq: float
    f_bar_third: float


def gaussian_coefficients(nl: Nonlinearity, n_nodes: int = DEFAULT_NODES) -> GaussianCoefficients:
    """Gaussian coefficients by Hermite integration by parts.

    E[f'] = E[f xi] and E[f'''] = E[f (xi^3 - 3 xi)], so no derivative of f
    is ever evaluated (sign and relu only have distributional ones).
    """
    if isinstance(nl, str):
        nl = Nonlinearity(nl)
    sq_branches = None
    if nl.branches is not None:
        left, right = nl.branches
        sq_branches = (lambda x: left(x) ** 2, lambda x: right(x) ** 2)
    return GaussianCoefficients(
        kind=nl.kind,
        odd=nl.is_odd,
        f_bar_prime=hermite_moment(nl, 1, n_nodes=n_nodes),
        f_bar_sq=gaussian_expectation(lambda x: nl(x) ** 2, sq_branches, n_nodes),
        f_bar_third=hermite_moment(nl, 3, n_nodes=n_nodes),
    )


# ---------------------------------------------------------------------------
# Analytic structure of H and Sigma
# ---------------------------------------------------------------------------

def analytic_h(A: np.ndarray, coeffs: GaussianCoefficients) -> np.ndarray:
    """Leading-order H = f_bar' A."""
    return coeffs.f_bar_prime * as_matrix(A, "A")


def sigma_structure(A: np.ndarray, a: np.ndarray, coeffs: GaussianCoefficients) -> np.ndarray:
    """Leading-order Sigma without the residual term.

    (f_bar^2 - f_bar'^2) I + f_bar'''^2 / (2 N_s) (A A^T + a a^T)
    """
    A = as_matrix(A, "A")
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    if a.shape[0] != A.shape[0]:
        raise DimensionError(f"a must have length {A.shape[0]}, got {a.shape[0]}")
    n_bases, n_sources = A.shape
    diag = coeffs.f_bar_sq - coeffs.f_bar_prime ** 2
    cross = coeffs.f_bar_third ** 2 / (2.0 * n_sources)
    return diag * np.eye(n_bases) + cross * (A @ A.T + np.outer(a, a))


@dataclass(frozen=True)
class StructureComparison:
    """Relative Frobenius distances of measured H and Sigma from their leading-order forms."""
    h_relative_error: float
    sigma_relative_error: float


def _relative_distance(measured: np.ndarray, analytic: np.ndarray) -> float:
    scale = float(np.linalg.norm(analytic))
    if scale == 0.0:
        return math.inf if np.any(measured) else 0.0
    return float(np.linalg.norm(measured - analytic)) / scale


def compare_structure(H: np.ndarray, Sigma: np.ndarray, A: np.ndarray, a: np.ndarray,
                      coeffs: GaussianCoefficients) -> StructureComparison:
    """Distance of a sampled (H, Sigma) from ``analytic_h`` and ``sigma_structure``.

    Sigma keeps an O(1/N_s^2) residual the leading-order form drops, so its
    distance does not vanish with T.
    """
    H = as_matrix(H, "H")
    Sigma = as_matrix(Sigma, "Sigma")
    h_model = analytic_h(A, coeffs)
    sigma_model = sigma_structure(A, a, coeffs)
    if H.shape != h_model.shape or Sigma.shape != sigma_model.shape:
        raise DimensionError(
            f"H {H.shape} / Sigma {Sigma.shape} do not match A {np.shape(A)}"
        )
    return StructureComparison(
        h_relative_error=_relative_distance(H, h_model),
        sigma_relative_error=_relative_distance(Sigma, sigma_model),
    )


def signal_directions(A: np.ndarray) -> np.ndarray:
    """U_A: left singular vectors of A."""
    return svd_thin(A).left


def anisotropy_delta(B: np.ndarray, U_A: np.ndarray) -> np.ndarray:
    """Delta = U_A^T (B^T B - I)^2 U_A, evaluated without forming B^T B."""
    B = as_matrix(B, "B")
    U_A = as_matrix(U_A, "U_A")
    if B.shape[1] != U_A.shape[0]:
        raise DimensionError(f"B has {B.shape[1]} columns but U_A has {U_A.shape[0]} rows")
    deviation = B.T @ (B @ U_A) - U_A
    return symmetrize(deviation.T @ deviation)


# ---------------------------------------------------------------------------
# Linearization error
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ErrorPrediction:
    """Predicted Cov[eps] of ``u = Omega (s + eps)``.

    ``finite_width_term`` and ``finite_source_term`` split the per-element
    value into its O(N_s/N_f) and O(1/N_s) parts; the general form does not
    separate them and leaves both None.
    """
    cov_eps: np.ndarray
    per_element_mse: float
    finite_width_term: Optional[float] = None
    finite_source_term: Optional[float] = None

    @property
    def largest_eigenvalue(self) -> float:
        return float(sym_eig(self.cov_eps, k=1).eigenvalues[0])


def _check_full_column_rank(BH: np.ndarray) -> None:
    s = svd_thin(BH).singular_values
    if s.size == 0 or s[0] == 0.0 or s[-1] <= RANK_TOLERANCE * s[0]:
        raise SingularityError("BH is rank deficient; the linearization error is undefined")


def error_cov_general(BH: np.ndarray, B: np.ndarray, Sigma: np.ndarray) -> ErrorPrediction:
    """Cov[eps] = (BH)^+ B Sigma B^T (BH)^+T.

    Raises:
        SingularityError: If BH does not have full column rank.
    """
    BH = as_matrix(BH, "BH")
    B = as_matrix(B, "B")
    Sigma = as_matrix(Sigma, "Sigma")
    if B.shape[0] != BH.shape[0] or Sigma.shape != (B.shape[1], B.shape[1]):
        raise DimensionError(
            f"Inconsistent shapes BH {BH.shape}, B {B.shape}, Sigma {Sigma.shape}"
        )
    _check_full_column_rank(BH)
    projector = pinv(BH) @ B
    cov = symmetrize(projector @ Sigma @ projector.T)
    return ErrorPrediction(cov_eps=cov, per_element_mse=float(np.trace(cov)) / BH.shape[1])


def error_cov_asymptotic(n_sources: int, n_bases: int, coeffs: GaussianCoefficients,
                         delta: Optional[np.ndarray] = None) -> ErrorPrediction:
    """Large-N form of Cov[eps] for odd nonlinearities.

    (N_s/N_f)(f_bar^2/f_bar'^2 - 1)(I + Delta) + f_bar'''^2 / (2 N_s f_bar'^2) I

    ``delta=None`` stands for Delta = I (Gaussian B).

    Raises:
        NotApplicableError: For non-odd nonlinearities; use
            :func:`error_cov_general` with a measured Sigma instead.
        SingularityError: If f_bar' is zero.
    """
    if not coeffs.odd:
        raise NotApplicableError(
            f"The asymptotic error formula does not apply to the non-odd nonlinearity "
            f"'{coeffs.kind}'; use error_cov_general with a measured Sigma"
        )
    if coeffs.f_bar_prime == 0.0:
        raise SingularityError(f"f_bar' vanishes for '{coeffs.kind}'")
    if n_sources < 1 or n_bases < 1:
        raise DimensionError("N_s and N_f must be positive")
    if delta is None:
        delta = np.eye(n_sources)
    delta = as_matrix(delta, "Delta")
    if delta.shape != (n_sources, n_sources):
        raise DimensionError(f"Delta must be {n_sources}x{n_sources}, got {delta.shape}")

    slope_sq = coeffs.f_bar_prime ** 2
    width = (n_sources / n_bases) * (coeffs.f_bar_sq / slope_sq - 1.0)
    source = coeffs.f_bar_third ** 2 / (2.0 * n_sources * slope_sq)
    identity = np.eye(n_sources)
    cov = symmetrize(width * (identity + delta) + source * identity)
    width_term = width * float(np.trace(identity + delta)) / n_sources
    return ErrorPrediction(
        cov_eps=cov,
        per_element_mse=float(np.trace(cov)) / n_sources,
        finite_width_term=width_term,
        finite_source_term=source,
    )


def eigenvalue_ratio(BH: np.ndarray, B: np.ndarray, Sigma: np.ndarray) -> float:
    """max eig[B Sigma B^T] / min eig[H^T B^T B H]; inf if the signal is degenerate."""
    BH = as_matrix(BH, "BH")
    B = as_matrix(B, "B")
    Sigma = as_matrix(Sigma, "Sigma")
    if B.shape[0] != BH.shape[0] or Sigma.shape != (B.shape[1], B.shape[1]):
        raise DimensionError(
            f"Inconsistent shapes BH {BH.shape}, B {B.shape}, Sigma {Sigma.shape}"
        )
    noise_top = max(float(sym_eig(symmetrize(B @ Sigma @ B.T), k=1).eigenvalues[0]), 0.0)
    signal_min = float(svd_thin(BH).singular_values[-1]) ** 2
    if signal_min == 0.0:
        return math.inf
    return noise_top / signal_min


@dataclass(frozen=True)
class EigenvalueBound:
    """Largest eigenvalue of Cov[eps] against its eigenvalue-ratio bound."""
    largest_error_eigenvalue: float
    bound: float
    prediction: Optional[ErrorPrediction] = field(default=None, compare=False, repr=False)

    @property
    def holds(self) -> bool:
        return self.largest_error_eigenvalue <= self.bound * (1.0 + 1e-9)


def eigenvalue_bound(BH: np.ndarray, B: np.ndarray, Sigma: np.ndarray) -> EigenvalueBound:
    """max eig Cov[eps] <= max eig[B Sigma B^T] / min eig[H^T B^T B H]."""
    prediction = error_cov_general(BH, B, Sigma)
    return EigenvalueBound(
        largest_error_eigenvalue=prediction.largest_eigenvalue,
        bound=eigenvalue_ratio(BH, B, Sigma),
        prediction=prediction,
    )


# ---------------------------------------------------------------------------
# First-order eigenpair perturbation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PerturbationReport:
    """First-order eigenpairs of ``U_L S_L^2 U_L^T + B Sigma B^T``."""
    E: np.ndarray
    corrected_major_eigenvalues: np.ndarray
    corrected_major_vectors: np.ndarray
    corrected_minor_eigenvalues: np.ndarray
    subspace_error_estimate: float
    X_LL: np.ndarray
    X_NL: np.ndarray
    X_NN: np.ndarray


def perturbation_correction(U_L: np.ndarray, S_L: np.ndarray,
                            noise_cov: np.ndarray) -> PerturbationReport:
    """Block-perturbation estimate of the major eigenpairs of Cov[x].

    U_N completes U_L to an orthonormal basis and is rotated so that
    X_NN = U_N^T C U_N is diagonal with descending entries. Then
    E = X_NL S_L^-2, Lambda_M = S_L^2 + diag(X_LL),
    Lambda_m = diag(X_NN) - 2 diag(X_NL S_L^-2 X_NL^T), P_M = U_L + U_N E.

    Raises:
        SingularityError: If any singular value in S_L is zero.
    """
    U_L = as_matrix(U_L, "U_L")
    S_L = np.asarray(S_L, dtype=np.float64).reshape(-1)
    noise_cov = as_matrix(noise_cov, "noise_cov")
    n_inputs, n_sources = U_L.shape
    if S_L.shape[0] != n_sources:
        raise DimensionError(f"S_L must have {n_sources} entries, got {S_L.shape[0]}")
    if noise_cov.shape != (n_inputs, n_inputs):
        raise DimensionError(f"noise_cov must be {n_inputs}x{n_inputs}, got {noise_cov.shape}")
    if np.any(S_L == 0.0):
        raise SingularityError("S_L contains zero singular values")
    if not np.allclose(U_L.T @ U_L, np.eye(n_sources), atol=1e-8):
        raise DimensionError("U_L must have orthonormal columns")
    noise_cov = symmetrize(noise_cov)

    inv_sq = 1.0 / S_L ** 2
    X_LL = U_L.T @ noise_cov @ U_L
    if n_inputs == n_sources:
        # No complement: the signal fills the input space.
        empty = np.zeros((0, n_sources))
        return PerturbationReport(
            E=empty, corrected_major_eigenvalues=S_L ** 2 + np.diag(X_LL),
            corrected_major_vectors=U_L.copy(), corrected_minor_eigenvalues=np.zeros(0),
            subspace_error_estimate=0.0, X_LL=X_LL, X_NL=empty, X_NN=np.zeros((0, 0)),
        )

    complement = orthonormal_complement(U_L)
    rotation = sym_eig(symmetrize(complement.T @ noise_cov @ complement))
    U_N = complement @ rotation.eigenvectors
    X_NN = np.diag(rotation.eigenvalues)
    X_NL = U_N.T @ noise_cov @ U_L

    E = X_NL * inv_sq
    major = S_L ** 2 + np.diag(X_LL)
    minor = rotation.eigenvalues - 2.0 * np.einsum("ij,j,ij->i", X_NL, inv_sq, X_NL)
    return PerturbationReport(
        E=E,
        corrected_major_eigenvalues=major,
        corrected_major_vectors=U_L + U_N @ E,
        corrected_minor_eigenvalues=minor,
        subspace_error_estimate=float(np.sum(E * E)) / n_sources,
        X_LL=X_LL,
        X_NL=X_NL,
        X_NN=X_NN,
    )
