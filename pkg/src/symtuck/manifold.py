"""Grassmannian geometry of ``f(P) = ||X · (P, ..., P)||^2`` and optimality checks.

A point is an orthogonal projector ``P = QQ^T`` of rank ``r``; tangent vectors
at ``P`` are symmetric ``n x n`` matrices with ``P dP + dP P = dP``.  All norms
are Frobenius.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .errors import ShapeError, UndefinedMetricError
from .explicit import _objective_and_gradient, as_stiefel
from .tensor import SymTensor, inner_all_but_first, multi_mode_product, norm, symmetrize_matrix

PROJECTOR_TOL = 1e-9
TANGENT_TOL = 1e-9
POWER_ITERS = 200
POWER_TOL = 1e-8


def projector(Q) -> np.ndarray:
    Q = np.asarray(Q, dtype=np.float64)
    return Q @ Q.T


def _check_projector(P) -> np.ndarray:
    P = np.asarray(P, dtype=np.float64)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ShapeError(f"projector must be square, got shape {P.shape}")
    tr = np.trace(P)
    if (np.linalg.norm(P - P.T) > PROJECTOR_TOL
            or np.linalg.norm(P @ P - P) > PROJECTOR_TOL
            or abs(tr - round(tr)) > PROJECTOR_TOL):
        raise ValueError("matrix is not an orthogonal projector")
    return P


def _basis_of(P: np.ndarray) -> np.ndarray:
    r = int(round(np.trace(P)))
    evals, evecs = np.linalg.eigh(P)
    return evecs[:, ::-1][:, :r]


def _check_tangent(P: np.ndarray, dP: np.ndarray) -> None:
    scale = TANGENT_TOL * max(1.0, np.linalg.norm(dP))
    if dP.shape != P.shape:
        raise ShapeError(f"tangent of shape {dP.shape} at a point of shape {P.shape}")
    if (np.linalg.norm(dP - dP.T) > scale
            or np.linalg.norm(P @ dP + dP @ P - dP) > scale
            or abs(np.trace(dP)) > scale):
        raise ValueError("matrix is not tangent to the Grassmannian at P")


def _ad(P: np.ndarray, S: np.ndarray) -> np.ndarray:
    return P @ S - S @ P


def tangent_project(P, S) -> np.ndarray:
    """Orthogonal projection of a symmetric ``S`` onto the tangent space at ``P``."""
    P = _check_projector(P)
    S = np.asarray(S, dtype=np.float64)
    if S.shape != P.shape:
        raise ShapeError(f"shape mismatch {S.shape} vs {P.shape}")
    if np.linalg.norm(S - S.T) > 1e-12 * max(1.0, np.linalg.norm(S)):
        raise ValueError("tangent projection needs a symmetric matrix")
    return _ad(P, _ad(P, S))


def _check_dims(X: SymTensor, P: np.ndarray) -> None:
    if P.shape != (X.dim, X.dim):
        raise ShapeError(f"projector of shape {P.shape} does not fit dimension {X.dim}")


def w_matrix(X: SymTensor, P) -> np.ndarray:
    """``d <X · (I, P, ..., P), X · (I, P, ..., P)>_{-1}``; symmetric PSD."""
    P = np.asarray(P, dtype=np.float64)
    _check_dims(X, P)
    A = multi_mode_product(X, [None] + [P] * (X.order - 1))
    return X.order * inner_all_but_first(A, A)


def _grad_from_w(P: np.ndarray, w: np.ndarray) -> np.ndarray:
    return symmetrize_matrix(2.0 * (np.eye(len(P)) - P) @ w @ P)


def riemannian_gradient_grassmann(X: SymTensor, P, check: bool = True) -> np.ndarray:
    """``sym(2 (I - P) w(P) P)``.

    With ``check`` the result is compared against ``sym((I - QQ^T) gradF(Q) Q^T)``
    for a basis ``Q`` of ``P``; a disagreement beyond round-off raises.
    """
    P = _check_projector(P)
    _check_dims(X, P)
    grad = _grad_from_w(P, w_matrix(X, P))
    if check:
        Q = _basis_of(P)
        _, G = _objective_and_gradient(X, Q)
        alt = symmetrize_matrix((G - Q @ (Q.T @ G)) @ Q.T)
        if np.linalg.norm(grad - alt) > 1e-10 * max(1.0, norm(X) ** 2):
            raise ArithmeticError("gradient formulas disagree")
    return grad


def hessian_apply(X: SymTensor, P, dP, w: Optional[np.ndarray] = None) -> np.ndarray:
    """Riemannian Hessian of ``f`` at ``P`` applied to a tangent vector ``dP``.

    ``2 sym((I - P) v[dP] + w dP P - dP w P)`` with
    ``v[dP] = d(d-1) <X · (I, dP, P, ..., P), X · (I, I, P, ..., P)>_{-1} P``.
    """
    P = _check_projector(P)
    _check_dims(X, P)
    dP = np.asarray(dP, dtype=np.float64)
    _check_tangent(P, dP)
    return _hessian(X, P, dP, w_matrix(X, P) if w is None else w)


def _hessian(X: SymTensor, P, dP, w) -> np.ndarray:
    d = X.order
    rest = [P] * (d - 2)
    B1 = multi_mode_product(X, [None, dP] + rest)
    B2 = multi_mode_product(X, [None, None] + rest)
    v = d * (d - 1) * inner_all_but_first(B1, B2) @ P
    eye = np.eye(len(P))
    return 2.0 * symmetrize_matrix((eye - P) @ v + w @ dP @ P - dP @ w @ P)


def relative_gradient(source, Q, d: Optional[int] = None) -> float:
    """``||(I - QQ^T) gradF(Q)|| / F(Q)``.

    ``source`` is either a :class:`SymTensor` (explicit path) or an ``n x p``
    sample matrix whose moment of order ``d`` is handled implicitly.
    """
    Q = as_stiefel(Q)
    if isinstance(source, SymTensor):
        if Q.shape[0] != source.dim:
            raise ShapeError(f"basis of shape {Q.shape} does not fit dimension {source.dim}")
        F, G = _objective_and_gradient(source, Q)
    else:
        if d is None:
            raise ValueError("order d is required for sample input")
        from .streaming import implicit_objective_and_gradient

        F, G = implicit_objective_and_gradient(source, Q, d)
    if not F > 0:
        raise UndefinedMetricError("relative gradient is undefined at zero objective")
    return float(np.linalg.norm(G - Q @ (Q.T @ G))) / F


def subspace_error(Q1, Q2) -> float:
    """``||Q1 Q1^T - Q2 Q2^T||_F`` for bases of equal shape."""
    Q1 = np.asarray(Q1, dtype=np.float64)
    Q2 = np.asarray(Q2, dtype=np.float64)
    if Q1.shape != Q2.shape or Q1.ndim != 2:
        raise ShapeError(f"bases must share a shape, got {Q1.shape} and {Q2.shape}")
    # ||P1 - P2||^2 = 2 ||(I - P1) Q2||^2 for equal ranks; avoids cancellation near 0.
    return float(np.sqrt(2.0) * np.linalg.norm(Q2 - Q1 @ (Q1.T @ Q2)))


@dataclass
class CriticalityReport:
    first_order: bool
    grad_norm: float
    max_rayleigh: float
    tol: float
    second_order: bool

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def certify_criticality(X: SymTensor, P, tol: float = 1e-8,
                        iters: int = POWER_ITERS, seed: int = 0) -> CriticalityReport:
    """Check first- and second-order criticality of ``P`` for ``f``.

    First order: ``||grad f(P)|| <= tol * (1 + ||X||^2)``.  Second order: the
    largest Rayleigh quotient of the Hessian over the tangent space, found by
    power iteration on ``Hess + s I`` with ``s = 4 d^2 ||X||^2`` (an upper
    bound on the operator norm), must not exceed the same threshold.
    """
    P = _check_projector(P)
    _check_dims(X, P)
    scale = 1.0 + norm(X) ** 2
    w = w_matrix(X, P)
    grad_norm = float(np.linalg.norm(_grad_from_w(P, w)))
    shift = 4.0 * X.order**2 * norm(X) ** 2

    rng = np.random.default_rng(seed)
    u = _ad(P, _ad(P, symmetrize_matrix(rng.standard_normal(P.shape))))
    best = -np.inf
    un = np.linalg.norm(u)
    if un > 0:
        u /= un
        prev = None
        for _ in range(iters):
            Hu = _hessian(X, P, u, w)
            rayleigh = float(np.sum(u * Hu))
            best = max(best, rayleigh)
            if prev is not None and abs(rayleigh - prev) <= POWER_TOL * scale:
                break
            prev = rayleigh
            nxt = _ad(P, _ad(P, Hu + shift * u))
            nn = np.linalg.norm(nxt)
            if nn == 0:
                break
            u = nxt / nn
    else:
        best = 0.0  # zero-dimensional tangent space (r = 0 or r = n)
    threshold = tol * scale
    return CriticalityReport(grad_norm <= threshold, grad_norm, best, tol, best <= threshold)
