"""Projected gradient ascent and HOEVD on explicit (dense) symmetric tensors.

These routines materialize ``n**d`` arrays and are meant for small problems
and as oracles for the tensor-free solvers in :mod:`symtuck.streaming`.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import NotOrthonormalError, NumericalError, RetractionError, ShapeError
from .tensor import SymTensor, inner_all_but_first, matricize, multi_mode_product, norm, tucker_product

Step = Union[float, Sequence[float], Callable[[int], float]]

STIEFEL_TOL = 1e-10
STIEFEL_REPAIR_TOL = 1e-6


def qr_retract(M) -> np.ndarray:
    """Orthonormal factor of the thin QR decomposition, with ``diag(R) > 0``."""
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[1] > M.shape[0]:
        raise ShapeError(f"need a tall n x r matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise RetractionError("cannot retract a matrix with non-finite entries")
    Q, R = np.linalg.qr(M)
    diag = np.diag(R)
    scale = np.max(np.abs(diag)) if diag.size else 0.0
    if scale == 0 or np.min(np.abs(diag)) <= M.shape[0] * np.finfo(float).eps * scale:
        raise RetractionError("matrix is numerically rank deficient")
    return Q * np.where(diag < 0, -1.0, 1.0)


def as_stiefel(Q, tol: float = STIEFEL_TOL, repair_tol: float = STIEFEL_REPAIR_TOL) -> np.ndarray:
    """Validate orthonormal columns, re-orthonormalizing small drift.

    Returns ``Q`` unchanged when ``||Q^T Q - I||_F <= tol``, the QR-retracted
    matrix when the defect is below ``repair_tol``, and raises otherwise.
    """
    Q = np.asarray(Q, dtype=np.float64)
    if Q.ndim != 2 or Q.shape[1] > Q.shape[0]:
        raise ShapeError(f"need a tall n x r matrix, got shape {Q.shape}")
    defect = np.linalg.norm(Q.T @ Q - np.eye(Q.shape[1]))
    if defect <= tol:
        return Q
    if defect <= repair_tol:
        return qr_retract(Q)
    raise NotOrthonormalError(f"||Q^T Q - I||_F = {defect:.3e} exceeds {repair_tol}")


def _check_dims(X: SymTensor, Q: np.ndarray) -> None:
    if Q.ndim != 2 or Q.shape[0] != X.dim or Q.shape[1] > X.dim:
        raise ShapeError(f"basis of shape {Q.shape} does not fit dimension {X.dim}")


def objective_explicit(X: SymTensor, Q) -> float:
    """``F(Q) = ||X · (Q, ..., Q)||^2``."""
    Q = np.asarray(Q, dtype=np.float64)
    _check_dims(X, Q)
    return norm(tucker_product(X, Q)) ** 2


def _objective_and_gradient(X: SymTensor, Q: np.ndarray) -> tuple[float, np.ndarray]:
    d = X.order
    partial = multi_mode_product(X, [None] + [Q] * (d - 1))  # X · (I, Q, ..., Q)
    core = np.tensordot(Q, partial, axes=([0], [0]))  # X · (Q, ..., Q)
    grad = 2 * d * inner_all_but_first(partial, core)
    return float(np.sum(core * core)), grad


def euclidean_gradient_explicit(X: SymTensor, Q) -> np.ndarray:
    """``2d <X · (I, Q, ..., Q), X · (Q, ..., Q)>_{-1}``, an ``n x r`` matrix."""
    Q = np.asarray(Q, dtype=np.float64)
    _check_dims(X, Q)
    return _objective_and_gradient(X, Q)[1]


def projected_gradient_norm(Q: np.ndarray, G: np.ndarray) -> float:
    """Frobenius norm of ``(I - QQ^T) G``."""
    return float(np.linalg.norm(G - Q @ (Q.T @ G)))


@dataclass
class PgdRecord:
    iter: int
    phase: str
    elapsed_s: float
    step: Optional[float] = None
    objective: Optional[float] = None
    relgrad: Optional[float] = None
    subspace_error: Optional[float] = None

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}


@dataclass
class PgdTrace:
    """Per-iteration log of a solver run (one record per executed iteration)."""

    records: list[PgdRecord] = field(default_factory=list)
    initial_objective: Optional[float] = None

    def __len__(self) -> int:
        return len(self.records)

    def append(self, record: PgdRecord) -> None:
        self.records.append(record)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r.to_dict()) + "\n" for r in self.records)

    def write(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_jsonl())


def default_step(X: SymTensor, c: float = 0.5) -> float:
    """``c / (2d ||X||^2)``; keeps the gradient term O(1) relative to ``Q``."""
    scale = norm(X) ** 2
    if scale == 0:
        return 1.0
    return c / (2 * X.order * scale)


def _step_schedule(step: Step) -> Callable[[int], float]:
    if callable(step):
        return step
    if np.ndim(step) == 0:
        value = float(step)
        return lambda t: value
    values = list(step)
    return lambda t: float(values[min(t - 1, len(values) - 1)])


def pgd_explicit(
    X: SymTensor,
    Q0,
    step: Optional[Step] = None,
    iters: int = 1000,
    tol: float = 1e-10,
) -> tuple[np.ndarray, PgdTrace]:
    """Projected gradient ascent for ``max ||X · (Q, ..., Q)||^2`` on the Stiefel manifold.

    Each iteration takes ``Q <- qr(Q + step_t * grad F(Q))``.  The run stops
    after ``iters`` iterations or as soon as the relative gradient
    ``||(I - QQ^T) grad F(Q)|| / F(Q)`` drops below ``tol`` (``tol=0``
    disables early stopping).

    Parameters
    ----------
    X : SymTensor
        Tensor to decompose.
    Q0 : array, n x r
        Starting basis; orthonormal columns.
    step : float, sequence or callable, optional
        Step sizes ``gamma_t``; a callable receives the 1-based iteration.
        Defaults to :func:`default_step`.

    Returns
    -------
    Q : array, n x r
    trace : PgdTrace
        Objective and relative gradient at every iterate ``Q_1 .. Q_T``.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    Q = as_stiefel(Q0)
    _check_dims(X, Q)
    schedule = _step_schedule(default_step(X) if step is None else step)
    trace = PgdTrace()
    F, G = _objective_and_gradient(X, Q)
    trace.initial_objective = F
    start = time.perf_counter()
    for t in range(1, iters + 1):
        gamma = schedule(t)
        if not gamma > 0:
            raise ValueError(f"step size must be positive, got {gamma} at iteration {t}")
        Q = qr_retract(Q + gamma * G)
        F, G = _objective_and_gradient(X, Q)
        if not (np.isfinite(F) and np.all(np.isfinite(G))):
            raise NumericalError(f"non-finite objective at iteration {t}")
        relgrad = projected_gradient_norm(Q, G) / F if F > 0 else np.inf
        trace.append(PgdRecord(t, "pgd", time.perf_counter() - start, gamma, F, relgrad))
        if relgrad < tol:
            break
    return Q, trace


def hoevd_explicit(X: SymTensor, r: int) -> np.ndarray:
    """Leading ``r`` eigenvectors of ``mat(X) mat(X)^T`` (non-increasing eigenvalues)."""
    if not 1 <= r <= X.dim:
        raise ShapeError(f"rank {r} must lie in [1, {X.dim}]")
    unfolded = matricize(X)
    evals, evecs = np.linalg.eigh(unfolded @ unfolded.T)
    return np.ascontiguousarray(evecs[:, ::-1][:, :r])


def project(X: SymTensor, Q) -> SymTensor:
    """Rank-``r`` reconstruction ``X · (QQ^T, ..., QQ^T)``."""
    Q = np.asarray(Q, dtype=np.float64)
    return tucker_product(X, Q @ Q.T)


def reconstruction_error(X: SymTensor, Q) -> float:
    """``||X - X · (QQ^T, ..., QQ^T)||``."""
    return norm(X.array - project(X, Q).array)


def random_stiefel(n: int, r: int, rng: np.random.Generator) -> np.ndarray:
    return qr_retract(rng.standard_normal((n, r)))
