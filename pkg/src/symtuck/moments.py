"""Sample moments, the synthetic NIG factor model, whitening and batch streams.

Samples are stored column-wise: a data matrix is ``n x p`` with one
observation per column.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional

import numpy as np

from .errors import (
    ExplicitTooLargeError,
    InvalidOrderError,
    ShapeError,
    SingularCovarianceError,
    StreamUnderrunError,
    TurnstileError,
)
from .tensor import SymTensor

EXPLICIT_BUDGET = 10**8
_MOMENT_CHUNK = 256


# Stream keys for generators derived from a model seed.  Keys go into the
# spawn key rather than the entropy: numpy zero-pads entropy, so
# default_rng([seed, 0]) would replay default_rng(seed).
LOADINGS, SAMPLES, STREAM, OUTLIERS = range(4)


def derived_rng(seed: int, key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(key,)))


def as_samples(samples) -> np.ndarray:
    X = np.asarray(samples.data if isinstance(samples, SampleBatch) else samples,
                   dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ShapeError(f"samples must be an n x p matrix, got shape {X.shape}")
    return X


def check_explicit_budget(n: int, d: int, budget: int = EXPLICIT_BUDGET) -> None:
    if n**d > budget:
        raise ExplicitTooLargeError(
            f"explicit tensor needs {n}**{d} = {n**d} entries (budget {budget})"
        )


def build_moment(samples, d: int) -> SymTensor:
    """Return the sample moment ``(1/p) sum_i x_i^{⊗d}`` as a dense tensor."""
    X = as_samples(samples)
    if d < 2:
        raise InvalidOrderError(f"order must be >= 2, got {d}")
    n, p = X.shape
    if p < 1:
        raise ShapeError("need at least one sample")
    check_explicit_budget(n, d)
    unfolded = np.zeros((n, n ** (d - 1)))
    for start in range(0, p, _MOMENT_CHUNK):
        Xc = X[:, start:start + _MOMENT_CHUNK]
        # Khatri-Rao power with the earliest trailing index varying fastest.
        kr = Xc
        for _ in range(d - 2):
            kr = (Xc[:, None, :] * kr[None, :, :]).reshape(-1, Xc.shape[1])
        unfolded += Xc @ kr.T
    unfolded /= p
    return SymTensor._wrap(unfolded.reshape((n,) * d, order="F"))


# --------------------------------------------------------------------------
# Synthetic linear factor model with NIG latent factors


def nig_moments(alpha: float, beta: float, delta: float) -> tuple[float, float]:
    """Mean and variance of NIG(alpha, beta, delta, mu=0)."""
    gamma = np.sqrt(alpha**2 - beta**2)
    return delta * beta / gamma, delta * alpha**2 / gamma**3


def sample_nig(rng: np.random.Generator, size, alpha: float = 1.0,
               beta: float = 0.5, delta: float = 1.0) -> np.ndarray:
    """Draw standardized (zero mean, unit variance) NIG variates.

    Uses the normal variance-mean mixture ``beta*V + sqrt(V)*Z`` with an
    inverse-Gaussian mixing variable ``V ~ IG(delta/gamma, delta**2)``.
    """
    if not (alpha > abs(beta) and delta > 0):
        raise ValueError("NIG parameters need alpha > |beta| and delta > 0")
    gamma = np.sqrt(alpha**2 - beta**2)
    v = rng.wald(delta / gamma, delta**2, size=size)
    z = rng.standard_normal(size)
    x = beta * v + np.sqrt(v) * z
    mean, var = nig_moments(alpha, beta, delta)
    return (x - mean) / np.sqrt(var)


@dataclass(frozen=True)
class FactorModel:
    """Linear factor model ``x = B f + eps`` with NIG factors and Gaussian noise.

    ``alpha``, ``beta`` and ``delta`` parametrize the NIG law of each latent
    factor before standardization; the default ``beta/alpha = 0.5`` gives
    skewed factors so third moments carry signal.
    """

    loadings: np.ndarray
    sigma: float = 0.0
    alpha: float = 1.0
    beta: float = 0.5
    delta: float = 1.0
    seed: int = 0

    def __post_init__(self):
        B = np.asarray(self.loadings, dtype=np.float64)
        if B.ndim != 2:
            raise ShapeError("loadings must be an n x r_true matrix")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if not (self.alpha > abs(self.beta) and self.delta > 0):
            raise ValueError("NIG parameters need alpha > |beta| and delta > 0")
        if np.linalg.matrix_rank(B) < B.shape[1]:
            raise ValueError("loadings must have full column rank")
        object.__setattr__(self, "loadings", B)

    @classmethod
    def random(cls, n: int, r_true: int, snr_inverse: float = 0.0,
               seed: int = 0, **nig) -> "FactorModel":
        """Standard-normal loadings drawn from ``seed``; noise set from ``snr_inverse``."""
        B = derived_rng(seed, LOADINGS).standard_normal((n, r_true))
        sigma = snr_inverse * np.linalg.norm(B, 2) / np.sqrt(n)
        return cls(B, sigma=float(sigma), seed=seed, **nig)

    @property
    def dim(self) -> int:
        return self.loadings.shape[0]

    @property
    def rank(self) -> int:
        return self.loadings.shape[1]

    def with_seed(self, seed: int) -> "FactorModel":
        return dataclasses.replace(self, seed=seed)

    def true_basis(self) -> np.ndarray:
        """Orthonormal factor of the QR decomposition of the loadings."""
        from .explicit import qr_retract

        return qr_retract(self.loadings)

    def draw(self, rng: np.random.Generator, count: int, factor_scale: float = 1.0) -> np.ndarray:
        f = sample_nig(rng, (self.rank, count), self.alpha, self.beta, self.delta)
        eps = rng.standard_normal((self.dim, count))
        return factor_scale * (self.loadings @ f) + self.sigma * eps


def sample_factor_model(model: FactorModel, count: int) -> "SampleBatch":
    """Draw ``count`` observations; identical output for identical ``model.seed``."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = derived_rng(model.seed, SAMPLES)
    return SampleBatch(model.draw(rng, count), 0)


def snr_inverse(model: FactorModel) -> float:
    """``sigma * sqrt(n) / ||B||_2``."""
    spectral = np.linalg.norm(model.loadings, 2)
    if spectral == 0:
        raise ValueError("zero loading matrix")
    return float(model.sigma * np.sqrt(model.dim) / spectral)


# --------------------------------------------------------------------------
# Whitening


def whitening(samples, ridge: Optional[float] = None) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(mean, W)`` such that ``W @ (X - mean)`` has identity covariance.

    The covariance is ``(1/p) Xc Xc^T``.  ``ridge`` defaults to
    ``1e-10 * trace / n``; pass ``0`` to disable it, in which case a singular
    covariance raises :class:`SingularCovarianceError`.
    """
    X = as_samples(samples)
    n, p = X.shape
    mean = X.mean(axis=1, keepdims=True)
    Xc = X - mean
    cov = Xc @ Xc.T / p
    evals, evecs = np.linalg.eigh(cov)
    if ridge is None:
        ridge = 1e-10 * np.trace(cov) / n
    top = max(evals[-1], 0.0)
    if ridge == 0 and (top == 0 or evals[0] <= n * np.finfo(float).eps * top):
        raise SingularCovarianceError(
            f"sample covariance is singular (p={p}, n={n}); enable the ridge"
        )
    scale = 1.0 / np.sqrt(np.clip(evals, 0.0, None) + ridge)
    W = (evecs * scale) @ evecs.T
    return mean, W


def whiten(samples, ridge: Optional[float] = None) -> np.ndarray:
    """Center and whiten the columns of an ``n x p`` sample matrix."""
    X = as_samples(samples)
    mean, W = whitening(X, ridge)
    return W @ (X - mean)


# --------------------------------------------------------------------------
# Turnstile streams


@dataclass(frozen=True)
class SampleBatch:
    data: np.ndarray
    index: int

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @property
    def size(self) -> int:
        return self.data.shape[1]


# A source returns the next `width` columns, or fewer if it is running dry.
Source = Callable[[int], np.ndarray]


@dataclass
class SampleStream:
    """Single-consumer sequence of sample batches; each batch is read once.

    ``source(width)`` returns the next ``width`` columns or fewer when the
    underlying data is exhausted; a short read is an underrun and the
    partial batch is dropped.  ``total_batches`` (if known) caps the number
    of batches handed out.
    """

    source: Source
    dim: int
    batch_size: int
    total_batches: Optional[int] = None
    _next_index: int = field(default=0, init=False)

    @property
    def consumed(self) -> int:
        return self._next_index

    def next_batch(self, width: Optional[int] = None) -> SampleBatch:
        width = self.batch_size if width is None else width
        if width < 1:
            raise ValueError("batch width must be >= 1")
        if self.total_batches is not None and self._next_index >= self.total_batches:
            raise StreamUnderrunError(
                f"stream exhausted after {self.total_batches} batches"
            )
        data = np.asarray(self.source(width), dtype=np.float64)
        if data.ndim != 2 or data.shape[1] < width:
            got = 0 if data.ndim != 2 else data.shape[1]
            raise StreamUnderrunError(
                f"batch {self._next_index} needs {width} samples, only {got} left"
            )
        if not np.all(np.isfinite(data)):
            raise ValueError(f"batch {self._next_index} contains non-finite values")
        batch = SampleBatch(data, self._next_index)
        self._next_index += 1
        return batch

    def batch(self, t: int) -> SampleBatch:
        """Return batch ``t``, which must be the next unread batch."""
        if t < self._next_index:
            raise TurnstileError(f"batch {t} was already consumed")
        if t > self._next_index:
            raise TurnstileError(f"batch {t} requested before batch {self._next_index}")
        return self.next_batch()

    def __iter__(self) -> Iterator[SampleBatch]:
        while self.total_batches is None or self._next_index < self.total_batches:
            try:
                yield self.next_batch()
            except StreamUnderrunError:
                return


def stream_from_pool(pool, b: int) -> SampleStream:
    """Stream consecutive non-overlapping column blocks of an in-memory pool."""
    X = as_samples(pool)
    n, p = X.shape
    if b < 1 or b > p:
        raise ValueError(f"batch size {b} must be in [1, {p}]")
    cursor = 0

    def source(width: int) -> np.ndarray:
        nonlocal cursor
        block = X[:, cursor:cursor + width]
        cursor += block.shape[1]
        return block

    return SampleStream(source, n, b, p // b)


def stream_from_model(model: FactorModel, b: int,
                      total_batches: Optional[int] = None) -> SampleStream:
    """Endless (or ``total_batches``-long) stream of fresh factor-model draws."""
    rng = derived_rng(model.seed, STREAM)
    return SampleStream(lambda width: model.draw(rng, width), model.dim, b, total_batches)
