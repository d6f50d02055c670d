"""Two-layer nonlinear generative process ``x = B f(A s + a)``.

Builds seeded processes, draws sample batches and computes the oracle-side
split of the bases into a signal part ``H s`` and a residual ``phi`` that is
uncorrelated with the sources.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np
from scipy import stats

from ..errors import ConfigurationError, DimensionError
from .random_streams import stream
from .spectral import svd_thin

# Pre-truncation cut of the "close to Gaussian" source, in standard deviations.
TRUNCATION = 2.5
DEFAULT_SHARD_SIZE = 50_000


@dataclass(frozen=True)
class SourceDistribution:
    """Zero-mean, unit-variance source law.

    ``kind`` is one of ``uniform``, ``truncated-normal`` or ``gaussian``.
    """
    kind: str = "uniform"

    KINDS = ("uniform", "truncated-normal", "gaussian")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ConfigurationError(
                f"Unknown source distribution '{self.kind}' (expected one of {self.KINDS})"
            )

    @property
    def kurtosis(self) -> float:
        """Excess kurtosis E[s^4] - 3."""
        if self.kind == "uniform":
            return -1.2
        if self.kind == "gaussian":
            return 0.0
        return float(stats.truncnorm.stats(-TRUNCATION, TRUNCATION, moments="k"))

    @property
    def fourth_moment(self) -> float:
        return 3.0 + self.kurtosis

    @property
    def is_symmetric(self) -> bool:
        return True

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        """Draw an array of the given shape."""
        if self.kind == "uniform":
            half_width = math.sqrt(3.0)
            return rng.uniform(-half_width, half_width, size=size)
        if self.kind == "gaussian":
            return rng.standard_normal(size=size)
        scale = math.sqrt(stats.truncnorm.var(-TRUNCATION, TRUNCATION))
        draws = stats.truncnorm.rvs(-TRUNCATION, TRUNCATION, size=size, random_state=rng)
        return draws / scale


def _sign(x):
    return np.sign(x)


def _relu(x):
    return np.maximum(x, 0.0)


def _cube(x):
    return x * x * x


def _identity(x):
    return np.asarray(x, dtype=np.float64)


_NONLINEARITIES: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "sign": _sign,
    "cube": _cube,
    "relu": _relu,
    "tanh": np.tanh,
    "identity": _identity,
}

# Smooth pieces on (-inf, 0) and (0, inf) for functions with a kink at 0.
_BRANCHES = {
    "sign": (lambda x: -np.ones_like(x), lambda x: np.ones_like(x)),
    "relu": (lambda x: np.zeros_like(x), lambda x: np.asarray(x, dtype=np.float64)),
}


@dataclass(frozen=True)
class Nonlinearity:
    """Element-wise basis function ``f``.

    Built-in kinds: sign, cube, relu, tanh, identity. New kinds can be
    registered with :func:`register_nonlinearity`.
    """
    kind: str = "sign"

    def __post_init__(self):
        if self.kind not in _NONLINEARITIES:
            raise ConfigurationError(
                f"Unknown nonlinearity '{self.kind}' (expected one of {sorted(_NONLINEARITIES)})"
            )

    @property
    def is_odd(self) -> bool:
        return self.kind in ("sign", "cube", "tanh", "identity")

    @property
    def branches(self):
        """``(left, right)`` smooth pieces if f has a kink at 0, else None."""
        return _BRANCHES.get(self.kind)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return _NONLINEARITIES[self.kind](x)


def register_nonlinearity(kind: str, fn: Callable[[np.ndarray], np.ndarray],
                          branches=None) -> None:
    """Add a user-supplied nonlinearity.

    The function must be vectorised. Pass ``branches=(left, right)`` when it
    is non-smooth at 0 so the Gaussian coefficients are integrated piecewise.
    Oddness is never assumed for registered kinds.
    """
    _NONLINEARITIES[kind] = fn
    if branches is not None:
        _BRANCHES[kind] = branches


@dataclass(frozen=True, eq=False)
class GenerativeProcess:
    """Frozen parameters of ``x = B f(A s + a)``."""
    n_sources: int
    n_bases: int
    n_inputs: int
    A: np.ndarray
    a: np.ndarray
    B: np.ndarray
    nonlinearity: Nonlinearity
    source_dist: SourceDistribution
    seed: int

    def __post_init__(self):
        if self.A.shape != (self.n_bases, self.n_sources):
            raise DimensionError(f"A must be {self.n_bases}x{self.n_sources}, got {self.A.shape}")
        if self.a.shape != (self.n_bases,):
            raise DimensionError(f"a must have length {self.n_bases}, got {self.a.shape}")
        if self.B.shape != (self.n_inputs, self.n_bases):
            raise DimensionError(f"B must be {self.n_inputs}x{self.n_bases}, got {self.B.shape}")

    def bases(self, sources: np.ndarray) -> np.ndarray:
        """Rows ``f(A s + a)`` for each row ``s`` of ``sources``."""
        return self.nonlinearity(sources @ self.A.T + self.a)

    def inputs(self, bases: np.ndarray) -> np.ndarray:
        """Rows ``B f`` for each row ``f`` of ``bases``."""
        return bases @ self.B.T


@dataclass(frozen=True, eq=False)
class SampleBatch:
    """T matched draws of sources S, bases F and inputs X (rows are draws)."""
    S: np.ndarray
    F: np.ndarray
    X: np.ndarray
    input_mean: np.ndarray

    @property
    def n_samples(self) -> int:
        return int(self.S.shape[0])

    def split(self, fraction: float = 0.5):
        """Deterministic (head, tail) split, e.g. train / held-out halves."""
        cut = int(round(self.n_samples * fraction))
        if cut < 2 or self.n_samples - cut < 2:
            raise DimensionError(f"Cannot split {self.n_samples} samples at {fraction}")
        return (_batch_from_rows(self.S[:cut], self.F[:cut], self.X[:cut]),
                _batch_from_rows(self.S[cut:], self.F[cut:], self.X[cut:]))


def _batch_from_rows(S, F, X) -> SampleBatch:
    return SampleBatch(S=S, F=F, X=X, input_mean=X.mean(axis=0))


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """Oracle decomposition of a drawn process.

    ``undersampled`` is set when T < 10 N_f, in which case Sigma is noisy.
    """
    H: np.ndarray
    Sigma: np.ndarray
    BH: np.ndarray
    U_L: np.ndarray
    S_L: np.ndarray
    undersampled: bool = False
    basis_mean: Optional[np.ndarray] = field(default=None, repr=False)

    def residuals(self, batch: SampleBatch) -> np.ndarray:
        """phi rows ``f - E[f] - H s`` for another batch of the same process."""
        mean = self.basis_mean if self.basis_mean is not None else batch.F.mean(axis=0)
        return batch.F - mean - batch.S @ self.H.T


def default_sample_count(n_bases: int) -> int:
    """T = max(1e5, 20 N_f)."""
    return max(100_000, 20 * int(n_bases))


def build_process(n_sources: int, n_bases: int, n_inputs: int,
                  nonlinearity: Nonlinearity, source_dist: SourceDistribution,
                  seed: int) -> GenerativeProcess:
    """Draw A, a ~ Normal(0, 1/N_s) and B ~ Normal(0, 1/N_f), seeded.

    Raises:
        ConfigurationError: Unless 1 <= N_s <= N_f and N_x >= 1.
    """
    if not (1 <= n_sources <= n_bases) or n_inputs < 1:
        raise ConfigurationError(
            f"Need 1 <= N_s <= N_f and N_x >= 1 (got N_s={n_sources}, N_f={n_bases}, N_x={n_inputs})"
        )
    if isinstance(nonlinearity, str):
        nonlinearity = Nonlinearity(nonlinearity)
    if isinstance(source_dist, str):
        source_dist = SourceDistribution(source_dist)

    a_scale = 1.0 / math.sqrt(n_sources)
    b_scale = 1.0 / math.sqrt(n_bases)
    A = stream(seed, "A").standard_normal((n_bases, n_sources)) * a_scale
    a = stream(seed, "a").standard_normal(n_bases) * a_scale
    B = stream(seed, "B").standard_normal((n_inputs, n_bases)) * b_scale
    return GenerativeProcess(
        n_sources=n_sources, n_bases=n_bases, n_inputs=n_inputs,
        A=A, a=a, B=B, nonlinearity=nonlinearity, source_dist=source_dist,
        seed=int(seed),
    )


def sample_batch(process: GenerativeProcess, n_samples: int, seed: int,
                 shard_size: int = DEFAULT_SHARD_SIZE) -> SampleBatch:
    """Draw ``n_samples`` i.i.d. rows of (s, f, x).

    Sources are drawn shard by shard, each shard from its own sub-stream
    ``(seed, "sources", shard_index)``, so the result does not depend on how
    shards are scheduled.
    """
    if n_samples < 2:
        raise DimensionError(f"Need at least 2 samples, got {n_samples}")
    shard_size = max(1, int(shard_size))
    shards = []
    for index, start in enumerate(range(0, n_samples, shard_size)):
        rows = min(shard_size, n_samples - start)
        rng = stream(seed, "sources", index)
        shards.append(process.source_dist.sample(rng, (rows, process.n_sources)))
    S = np.concatenate(shards, axis=0)
    F = process.bases(S)
    X = process.inputs(F)
    return SampleBatch(S=S, F=F, X=X, input_mean=X.mean(axis=0))


def ground_truth_decomposition(process: GenerativeProcess, batch: SampleBatch,
                               chunk_size: int = 20_000) -> GroundTruth:
    """Empirical signal/noise split of the bases.

    H = E[f s^T] (valid for unit-variance sources), phi = f - E[f] - H s,
    Sigma = Cov[phi], BH = B H and its thin SVD (U_L, S_L).
    """
    S, F = batch.S, batch.F
    if S.shape[1] != process.n_sources or F.shape[1] != process.n_bases:
        raise DimensionError("Batch does not match the process dimensions")
    T = batch.n_samples
    H = F.T @ S / T
    basis_mean = F.mean(axis=0)

    # Cov[phi] accumulated in chunks to bound the temporary T x N_f buffer.
    phi_sum = np.zeros(process.n_bases)
    phi_outer = np.zeros((process.n_bases, process.n_bases))
    for start in range(0, T, chunk_size):
        phi = F[start:start + chunk_size] - basis_mean - S[start:start + chunk_size] @ H.T
        phi_sum += phi.sum(axis=0)
        phi_outer += phi.T @ phi
    phi_mean = phi_sum / T
    Sigma = phi_outer / T - np.outer(phi_mean, phi_mean)
    Sigma = 0.5 * (Sigma + Sigma.T)

    BH = process.B @ H
    svd = svd_thin(BH)
    return GroundTruth(
        H=H, Sigma=Sigma, BH=BH, U_L=svd.left, S_L=svd.singular_values,
        undersampled=T < 10 * process.n_bases, basis_mean=basis_mean,
    )


def noise_covariance(process: GenerativeProcess, truth: GroundTruth) -> np.ndarray:
    """B Sigma B^T."""
    noise = process.B @ truth.Sigma @ process.B.T
    return 0.5 * (noise + noise.T)


def input_covariance(X: np.ndarray, mean: Optional[np.ndarray] = None) -> np.ndarray:
    """Empirical Cov[x] (1/T normalisation), symmetrised.

    Shared by batch PCA and the signal/noise checks so both see the same
    matrix bit for bit.
    """
    X = np.asarray(X, dtype=np.float64)
    if mean is None:
        mean = X.mean(axis=0)
    centered = X - mean
    cov = centered.T @ centered / X.shape[0]
    return 0.5 * (cov + cov.T)
