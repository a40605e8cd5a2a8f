"""Tensor-free (implicit) computations on sample moments and the streaming solver.

Every routine here works from the ``n x b`` sample blocks directly and never
forms an ``n**d`` array: the moment ``(1/b) sum_i x_i^{⊗d}`` enters only
through the ``b x b`` Gram matrix ``(X^T Q Q^T X)^{[d]}`` (or
``(X^T X)^{[d-1]}`` for the HOEVD cost).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import ShapeError
from .explicit import PgdRecord, PgdTrace, as_stiefel, qr_retract
from .moments import SampleBatch, SampleStream, as_samples, build_moment
from .tensor import SymTensor, elementwise_pow

GAMMA0 = 1e-5
_EVAL_BLOCK = 256


def _check(X: np.ndarray, Q: np.ndarray) -> None:
    if Q.ndim != 2 or Q.shape[0] != X.shape[0]:
        raise ShapeError(f"basis of shape {Q.shape} does not match samples of dimension {X.shape[0]}")


_GRAM_ENTRIES = 1 << 17


def _gram_pow_apply(A: np.ndarray, k: int, R: np.ndarray) -> np.ndarray:
    """``(A^T A)^{[k]} @ R`` computed in row blocks that stay cache-resident."""
    b = A.shape[1]
    step = max(16, _GRAM_ENTRIES // max(b, 1))
    out = np.empty((b, R.shape[1]))
    for i in range(0, b, step):
        S = A[:, i:i + step].T @ A
        out[i:i + step] = _pow_inplace(S, k) @ R
    return out


def _pow_inplace(S: np.ndarray, k: int) -> np.ndarray:
    # Overwrites S; the b x b Gram matrices dominate memory traffic.
    if k == 1:
        return S
    if k == 2:
        return np.square(S, out=S)
    base = S.copy()
    for _ in range(k - 1):
        S *= base
    return S


def implicit_gradient(batch, Q, d: int) -> np.ndarray:
    """Gradient of ``||(1/b) sum_i (Q^T x_i)^{⊗d}||^2`` without forming the moment.

    Evaluates ``(2d/b^2) X (X^T Q Q^T X)^{[d-1]} X^T Q`` in ``O(rnb + rb^2)``.
    """
    X, Q = as_samples(batch), np.asarray(Q, dtype=np.float64)
    _check(X, Q)
    b = X.shape[1]
    Y = Q.T @ X
    return (2.0 * d / b**2) * (X @ _gram_pow_apply(Y, d - 1, Y.T))


def hoevd_implicit_gradient(batch, Q, d: int) -> np.ndarray:
    """``2 mat(M) mat(M)^T Q`` for the batch moment ``M``, as ``(2/b^2) X (X^T X)^{[d-1]} X^T Q``."""
    X, Q = as_samples(batch), np.asarray(Q, dtype=np.float64)
    _check(X, Q)
    b = X.shape[1]
    return (2.0 / b**2) * (X @ _gram_pow_apply(X, d - 1, X.T @ Q))


def implicit_objective_and_gradient(samples, Q, d: int,
                                    block: int = _EVAL_BLOCK) -> tuple[float, np.ndarray]:
    """Objective and gradient of the full-sample moment cost, in column blocks.

    Memory stays at ``O(block**2 + n r)`` regardless of the sample count.
    """
    X, Q = as_samples(samples), np.asarray(Q, dtype=np.float64)
    _check(X, Q)
    p = X.shape[1]
    Y = Q.T @ X
    total = 0.0
    grad = np.zeros_like(Q)
    for i in range(0, p, block):
        Yi = Y[:, i:i + block]
        acc = np.zeros((Yi.shape[1], Q.shape[1]))
        for j in range(0, p, block):
            Yj = Y[:, j:j + block]
            S = Yi.T @ Yj
            K = elementwise_pow(S, d - 1)
            total += float(np.vdot(K, S))
            acc += K @ Yj.T
        grad += X[:, i:i + block] @ acc
    return total / p**2, (2.0 * d / p**2) * grad


def batch_objective(samples, Q, d: int) -> float:
    """``F(Q)`` of the sample moment, as ``(1/p^2) * sum_ij [(X^T Q Q^T X)_ij]^d``."""
    X, Q = as_samples(samples), np.asarray(Q, dtype=np.float64)
    _check(X, Q)
    p = X.shape[1]
    Y = Q.T @ X
    total = 0.0
    for i in range(0, p, _EVAL_BLOCK):
        Yi = Y[:, i:i + _EVAL_BLOCK]
        for j in range(0, p, _EVAL_BLOCK):
            S = Yi.T @ Y[:, j:j + _EVAL_BLOCK]
            total += float(np.vdot(elementwise_pow(S, d - 1), S))
    return total / p**2


def hoevd_implicit_full(samples, r: int, d: int) -> np.ndarray:
    """Non-streaming HOEVD: top ``r`` eigenvectors of ``X (X^T X)^{[d-1]} X^T / p^2``."""
    X = as_samples(samples)
    p = X.shape[1]
    gram = X @ elementwise_pow(X.T @ X, d - 1) @ X.T / p**2
    evals, evecs = np.linalg.eigh(0.5 * (gram + gram.T))
    return np.ascontiguousarray(evecs[:, ::-1][:, :r])


def estimate_core(Q, fresh, d: int) -> SymTensor:
    """Core ``(1/p_c) sum_i (Q^T x_i)^{⊗d}`` from fresh samples; an ``r**d`` tensor."""
    X, Q = as_samples(fresh), np.asarray(Q, dtype=np.float64)
    _check(X, Q)
    return build_moment(Q.T @ X, d)


@dataclass(frozen=True)
class AdaGradState:
    """Column-wise AdaGrad accumulator: ``gamma_j = sqrt(sum_t ||G_t[:, j]||^2)``."""

    gamma: np.ndarray
    c: float

    @classmethod
    def initial(cls, r: int, c: float, gamma0: float = GAMMA0) -> "AdaGradState":
        return cls(np.full(r, gamma0), float(c))


def adagrad_step(state: AdaGradState, G, Q) -> tuple[AdaGradState, np.ndarray]:
    """Accumulate column norms of ``G`` and return ``qr(Q + c * G ./ gamma)``."""
    G = np.asarray(G, dtype=np.float64)
    Q = np.asarray(Q, dtype=np.float64)
    if G.shape != Q.shape or G.shape[1] != state.gamma.size:
        raise ShapeError(f"gradient {G.shape}, basis {Q.shape} and state of size "
                         f"{state.gamma.size} disagree")
    gamma = np.sqrt(state.gamma**2 + np.sum(G * G, axis=0))
    return replace(state, gamma=gamma), qr_retract(Q + state.c * (G / gamma))


@dataclass(frozen=True)
class TwoPhaseConfig:
    """Settings for :func:`scalable_pgd`.

    ``T1`` batches of width ``b1`` feed the HOEVD phase; the PGD phase then
    consumes ``T2 - T1`` batches of width ``b2``.
    """

    r: int
    T1: int = 250
    T2: int = 500
    b1: int = 50
    b2: int = 50
    c1: float = 0.05
    c2: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if min(self.r, self.b1, self.b2) < 1 or self.T1 < 0 or self.T2 < self.T1:
            raise ValueError(f"invalid configuration {self}")
        if not (self.c1 > 0 and self.c2 > 0):
            raise ValueError("step constants must be positive")


def initial_basis(n: int, r: int, seed: int) -> np.ndarray:
    """Random Gaussian ``n x r`` matrix, QR-retracted."""
    if not 1 <= r <= n:
        raise ShapeError(f"rank {r} must lie in [1, {n}]")
    return qr_retract(np.random.default_rng(seed).standard_normal((n, r)))


class _Monitor:
    """Fills a trace with optional held-out objective / relgrad / subspace error."""

    def __init__(self, trace, d, eval_samples, truth, eval_every):
        self.trace = trace
        self.d = d
        self.eval = None if eval_samples is None else as_samples(eval_samples)
        self.truth = None if truth is None else np.asarray(truth, dtype=np.float64)
        self.every = max(1, eval_every)
        self.start = time.perf_counter()

    def __call__(self, t: int, phase: str, Q: np.ndarray, step: float, last: bool) -> None:
        if self.trace is None:
            return
        rec = PgdRecord(t, phase, 0.0, step)
        if last or t % self.every == 0:
            if self.eval is not None:
                F, G = implicit_objective_and_gradient(self.eval, Q, self.d)
                rec.objective = F
                if F > 0:
                    rec.relgrad = float(np.linalg.norm(G - Q @ (Q.T @ G))) / F
            if self.truth is not None:
                from .manifold import subspace_error

                rec.subspace_error = subspace_error(Q, self.truth)
        rec.elapsed_s = time.perf_counter() - self.start
        self.trace.append(rec)


def _run_hoevd_phase(stream, Q, iters, width, c, d, monitor, offset=0):
    state = AdaGradState.initial(Q.shape[1], c)
    for t in range(1, iters + 1):
        batch = stream.next_batch(width)
        G = hoevd_implicit_gradient(batch, Q, d)
        state, Q = adagrad_step(state, G, Q)
        monitor(offset + t, "hoevd", Q, float(np.mean(c / state.gamma)), t == iters)
    return Q


def s_hoevd(stream: SampleStream, cfg: TwoPhaseConfig, d: int,
            trace: Optional[PgdTrace] = None, eval_samples=None, truth=None,
            eval_every: int = 1) -> np.ndarray:
    """Streaming HOEVD: AdaGrad ascent on the batch HOEVD cost over ``cfg.T1`` batches.

    Starts from a seeded random basis; output is deterministic given
    ``cfg.seed`` and the stream contents.
    """
    Q = initial_basis(stream.dim, cfg.r, cfg.seed)
    monitor = _Monitor(trace, d, eval_samples, truth, eval_every)
    return _run_hoevd_phase(stream, Q, cfg.T1, cfg.b1, cfg.c1, d, monitor)


def scalable_pgd(stream: SampleStream, cfg: TwoPhaseConfig, d: int,
                 eval_samples=None, truth=None, eval_every: int = 1,
                 Q0=None) -> tuple[np.ndarray, PgdTrace]:
    """Two-phase streaming decomposition of the sample moment of order ``d``.

    Phase I runs :func:`s_hoevd` on the first ``cfg.T1`` batches (skipped
    when ``Q0`` is given).  Phase II applies implicit stochastic gradients
    with column-wise AdaGrad steps on the next ``cfg.T2 - cfg.T1`` batches.

    Parameters
    ----------
    eval_samples : array, n x p_test, optional
        Held-out samples; when given, the trace records the objective and the
        relative gradient of their moment every ``eval_every`` iterations.
    truth : array, n x r', optional
        Reference basis for the subspace error column of the trace.

    Returns
    -------
    Q : array, n x r
    trace : PgdTrace
        One record per consumed batch, phases ``"hoevd"`` then ``"pgd"``.
    """
    trace = PgdTrace()
    monitor = _Monitor(trace, d, eval_samples, truth, eval_every)
    if Q0 is None:
        Q = initial_basis(stream.dim, cfg.r, cfg.seed)
        Q = _run_hoevd_phase(stream, Q, cfg.T1, cfg.b1, cfg.c1, d, monitor)
    else:
        Q = as_stiefel(Q0)
    state = AdaGradState.initial(cfg.r, cfg.c2)
    steps = cfg.T2 - cfg.T1
    for k in range(1, steps + 1):
        batch = stream.next_batch(cfg.b2)
        G = implicit_gradient(batch, Q, d)
        state, Q = adagrad_step(state, G, Q)
        monitor(cfg.T1 + k, "pgd", Q, float(np.mean(cfg.c2 / state.gamma)), k == steps)
    return Q, trace
