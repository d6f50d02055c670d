"""Linear inversion pipeline: PCA whitening, Oja's subspace rule, Amari ICA.

Batch PCA reads the top eigenpairs of the empirical input covariance. The
Hebbian variants learn the same maps from mini-batch expectations with a
constant learning rate and a fixed epoch budget. The orthogonal ambiguity
left by whitening is never resolved here; see ``metrics.align_sources``.
"""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy import linalg

from ..errors import ConfigurationError, DimensionError, DivergenceError, RankError
from .generative import SampleBatch, input_covariance
from .metrics import align_sources, bss_mse, subspace_error
from .random_streams import stream
from .spectral import as_matrix, sym_eig, symmetrize

DIVERGENCE_NORM = 1e6
RANK_FLOOR = 1e-12


# ---------------------------------------------------------------------------
# Encoders and training logs
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PcaEncoder:
    """Whitening encoder ``u = Lambda_M^-1/2 P_M^T (x - mean)``."""
    components: np.ndarray
    eigenvalues: np.ndarray
    whitening: np.ndarray
    input_mean: np.ndarray

    @property
    def n_components(self) -> int:
        return int(self.eigenvalues.shape[0])

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.input_mean) @ self.whitening.T


@dataclass(frozen=True, eq=False)
class IcaEncoder:
    """Separation matrix applied to whitened inputs."""
    W_ica: np.ndarray
    g_kind: str = "cube"

    @property
    def condition_number(self) -> float:
        return float(np.linalg.cond(self.W_ica))

    def transform(self, U: np.ndarray) -> np.ndarray:
        return np.asarray(U, dtype=np.float64) @ self.W_ica.T


@dataclass(frozen=True)
class TrainRecord:
    epoch: int
    error: float
    weight_change: float


@dataclass
class TrainLog:
    """Per-epoch learning curve.

    ``error`` is a subspace error for PCA stages and an aligned BSS error (or
    an off-diagonality score without reference sources) for ICA stages.
    """
    stage: str
    records: List[TrainRecord] = field(default_factory=list)

    def append(self, epoch: int, error: float, weight_change: float) -> None:
        if self.records and epoch <= self.records[-1].epoch:
            raise ValueError(f"Epoch {epoch} does not follow {self.records[-1].epoch}")
        self.records.append(TrainRecord(int(epoch), float(error), float(weight_change)))

    @property
    def final_error(self) -> float:
        return self.records[-1].error if self.records else float("nan")

    def __len__(self) -> int:
        return len(self.records)


# ---------------------------------------------------------------------------
# Batch PCA
# ---------------------------------------------------------------------------

def pca_whiten_batch(X: np.ndarray, k: int, mean: Optional[np.ndarray] = None) -> PcaEncoder:
    """Top-k eigenpairs of the empirical input covariance and the whitening map.

    Raises:
        RankError: If the k-th eigenvalue is below 1e-12 of the largest.
    """
    X = as_matrix(X, "X")
    n_inputs = X.shape[1]
    if not 1 <= k <= n_inputs:
        raise DimensionError(f"k must lie in [1, {n_inputs}], got {k}")
    if mean is None:
        mean = X.mean(axis=0)
    decomposition = sym_eig(input_covariance(X, mean), k=k)
    values = decomposition.eigenvalues
    if values[0] <= 0.0 or values[-1] < RANK_FLOOR * values[0]:
        raise RankError(
            f"Input covariance has rank below {k} (eigenvalue {values[-1]:.3e} vs max {values[0]:.3e})"
        )
    return PcaEncoder(
        components=decomposition.eigenvectors,
        eigenvalues=values,
        whitening=decomposition.eigenvectors.T / np.sqrt(values)[:, None],
        input_mean=np.asarray(mean, dtype=np.float64),
    )


# ---------------------------------------------------------------------------
# Oja's subspace rule
# ---------------------------------------------------------------------------

def oja_update(W: np.ndarray, Xc: np.ndarray) -> np.ndarray:
    """Mini-batch direction E[u (x - W^T u)^T] with u = W x on centred rows."""
    U = Xc @ W.T
    return (U.T @ Xc - (U.T @ U) @ W) / Xc.shape[0]


def _row_space(W: np.ndarray) -> np.ndarray:
    q, _ = linalg.qr(W.T, mode="economic")
    return q


def _encoder_from_rows(W: np.ndarray, X: np.ndarray, mean: np.ndarray) -> PcaEncoder:
    """Whitening derived from the empirical covariance of the learned outputs."""
    basis = _row_space(W)
    Y = (X - mean) @ basis
    decomposition = sym_eig(symmetrize(Y.T @ Y / X.shape[0]))
    values = decomposition.eigenvalues
    if values[-1] < RANK_FLOOR * max(values[0], np.finfo(float).tiny):
        raise RankError("Learned components span a degenerate subspace")
    components = basis @ decomposition.eigenvectors
    return PcaEncoder(
        components=components,
        eigenvalues=values,
        whitening=components.T / np.sqrt(values)[:, None],
        input_mean=mean,
    )


def oja_train(X: np.ndarray, k: int, eta: float = 1e-3, epochs: int = 30,
              batch_size: int = 256, seed: int = 0,
              reference: Optional[np.ndarray] = None):
    """Learn the top-k subspace with Oja's rule.

    Args:
        X: T x N_x inputs. Rows are visited in a seeded random order each epoch.
        k: Number of components.
        eta: Constant learning rate.
        epochs: Fixed epoch budget.
        batch_size: Samples per expectation.
        seed: Seeds the N(0, 1/N_x) initial weights and the visiting order.
        reference: Optional N_x x k orthonormal basis scored in the log
            (typically U_L); without it the log tracks the batch-PCA span of X.

    Returns:
        (PcaEncoder, TrainLog)

    Raises:
        DivergenceError: If the weight norm exceeds 1e6.
    """
    X = as_matrix(X, "X")
    n_samples, n_inputs = X.shape
    if eta <= 0:
        raise ConfigurationError(f"eta must be positive, got {eta}")
    if not 1 <= k <= n_inputs:
        raise DimensionError(f"k must lie in [1, {n_inputs}], got {k}")
    mean = X.mean(axis=0)
    if reference is None:
        reference = pca_whiten_batch(X, k, mean).components

    W = stream(seed, "oja", "init").standard_normal((k, n_inputs)) / np.sqrt(n_inputs)
    order_rng = stream(seed, "oja", "order")
    log = TrainLog(stage="pca")
    for epoch in range(1, epochs + 1):
        start_weights = W.copy()
        order = order_rng.permutation(n_samples)
        for start in range(0, n_samples, batch_size):
            rows = order[start:start + batch_size]
            W = W + eta * oja_update(W, X[rows] - mean)
        norm = np.linalg.norm(W)
        if not np.isfinite(norm) or norm > DIVERGENCE_NORM:
            raise DivergenceError(f"Oja weights diverged (norm {norm:.3e})", epoch)
        log.append(epoch, subspace_error(_row_space(W), reference),
                   np.linalg.norm(W - start_weights))
    return _encoder_from_rows(W, X, mean), log


# ---------------------------------------------------------------------------
# Amari's natural-gradient ICA
# ---------------------------------------------------------------------------

def ica_nonlinearity(g_kind: str):
    """Score function g of the ICA rule: cube for sub-Gaussian, tanh for super-Gaussian."""
    if g_kind == "cube":
        return lambda y: y * y * y
    if g_kind == "tanh":
        return np.tanh
    raise ConfigurationError(f"Unknown ICA nonlinearity '{g_kind}'")


def amari_update(W: np.ndarray, U: np.ndarray, g) -> np.ndarray:
    """Mini-batch direction (I - E[g(y) y^T]) W with y = W u."""
    Y = U @ W.T
    moment = g(Y).T @ Y / U.shape[0]
    return (np.eye(W.shape[0]) - moment) @ W


def off_diagonality(Y: np.ndarray, g) -> float:
    """Largest off-diagonal |E[g(y_i) y_j]|, 0 for independent outputs."""
    moment = g(Y).T @ Y / Y.shape[0]
    k = moment.shape[0]
    off = np.abs(moment[~np.eye(k, dtype=bool)])
    return float(off.max()) if off.size else 0.0


def amari_train(U: np.ndarray, eta: float = 0.02, g_kind: str = "cube", epochs: int = 30,
                batch_size: int = 256, seed: int = 0,
                reference_sources: Optional[np.ndarray] = None):
    """Separate whitened inputs with Amari's natural-gradient rule.

    W_ica starts from N(0, 1/k) entries. After the last epoch each row is
    rescaled to unit output variance on ``U``.

    Returns:
        (IcaEncoder, TrainLog)

    Raises:
        DivergenceError: If the weight norm exceeds 1e6.
    """
    U = as_matrix(U, "U")
    n_samples, k = U.shape
    if eta <= 0:
        raise ConfigurationError(f"eta must be positive, got {eta}")
    g = ica_nonlinearity(g_kind)
    if reference_sources is not None and np.shape(reference_sources) != U.shape:
        raise DimensionError("reference_sources must match the shape of U")

    W = stream(seed, "amari", "init").standard_normal((k, k)) / np.sqrt(k)
    order_rng = stream(seed, "amari", "order")
    log = TrainLog(stage="ica")
    for epoch in range(1, epochs + 1):
        start_weights = W.copy()
        order = order_rng.permutation(n_samples)
        for start in range(0, n_samples, batch_size):
            rows = order[start:start + batch_size]
            W = W + eta * amari_update(W, U[rows], g)
        norm = np.linalg.norm(W)
        if not np.isfinite(norm) or norm > DIVERGENCE_NORM:
            raise DivergenceError(f"ICA weights diverged (norm {norm:.3e})", epoch)
        Y = U @ W.T
        if reference_sources is not None:
            error = _aligned_error(Y, reference_sources)
        else:
            error = off_diagonality(Y, g)
        log.append(epoch, error, np.linalg.norm(W - start_weights))

    scale = np.std(U @ W.T, axis=0)
    if np.any(scale == 0.0):
        raise DivergenceError("ICA output collapsed to zero variance", epochs)
    return IcaEncoder(W_ica=W / scale[:, None], g_kind=g_kind), log


def _aligned_error(Y: np.ndarray, sources: np.ndarray) -> float:
    # Unit-variance outputs so the score is comparable across epochs.
    scale = np.std(Y, axis=0)
    scale[scale == 0.0] = 1.0
    Y = Y / scale
    return bss_mse(align_sources(Y, sources).apply(Y), sources)


# ---------------------------------------------------------------------------
# Cascade
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CascadeConfig:
    """PCA stage (batch or Oja) followed by Amari ICA."""
    mode: str = "batch"
    eta_pca: float = 1e-3
    eta_ica: float = 0.02
    epochs_pca: int = 30
    epochs_ica: int = 30
    batch_size: int = 256
    g_kind: str = "cube"
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("batch", "oja"):
            raise ConfigurationError(f"Unknown cascade mode '{self.mode}'")


@dataclass(frozen=True, eq=False)
class CascadeResult:
    estimates: np.ndarray
    pca: PcaEncoder
    ica: IcaEncoder
    pca_log: Optional[TrainLog] = None
    ica_log: Optional[TrainLog] = None

    def transform(self, X: np.ndarray) -> np.ndarray:
        """Source estimates for new inputs."""
        return self.ica.transform(self.pca.transform(X))


def cascade(batch: SampleBatch, k: int, config: Optional[CascadeConfig] = None,
            reference: Optional[np.ndarray] = None) -> CascadeResult:
    """u_tilde = W_ica W_pca (x - mean) for every row of the batch.

    ``reference`` (an orthonormal basis such as U_L) only feeds the Oja
    learning curve; the batch sources always feed the ICA curve.
    """
    config = config or CascadeConfig()
    pca_log = None
    if config.mode == "batch":
        pca = pca_whiten_batch(batch.X, k, batch.input_mean)
    else:
        pca, pca_log = oja_train(
            batch.X, k, eta=config.eta_pca, epochs=config.epochs_pca,
            batch_size=config.batch_size, seed=config.seed, reference=reference,
        )
    U = pca.transform(batch.X)
    sources = batch.S if batch.S.shape[1] == k else None
    ica, ica_log = amari_train(
        U, eta=config.eta_ica, g_kind=config.g_kind, epochs=config.epochs_ica,
        batch_size=config.batch_size, seed=config.seed, reference_sources=sources,
    )
    return CascadeResult(
        estimates=ica.transform(U), pca=pca, ica=ica, pca_log=pca_log, ica_log=ica_log,
    )
