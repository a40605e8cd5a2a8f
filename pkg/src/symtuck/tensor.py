"""Dense symmetric tensors and the multilinear primitives used by the solvers.

A :class:`SymTensor` of order ``d`` and dimension ``n`` wraps a read-only
``float64`` array of shape ``(n,) * d``.  The flat layout exposed through
:attr:`SymTensor.entries` is first-index-fastest (Fortran order), so the
mode-1 unfolding returned by :func:`matricize` maps ``(i1, ..., id)`` to row
``i1`` and column ``sum_{l>=2} i_l * n**(l-2)`` (0-based).
"""

from __future__ import annotations

from itertools import permutations
from typing import Sequence, Union

import numpy as np

from .errors import AsymmetricTensorError, InvalidOrderError, ShapeError

ArrayLike = Union[np.ndarray, Sequence]

_EXHAUSTIVE_LIMIT = 10**6
_SAMPLED_CHECKS = 1000
_SYMMETRIZE_MAX_ORDER = 4
_ASYMMETRY_RTOL = 1e-10


class SymTensor:
    """Dense symmetric tensor of order ``d >= 2`` and dimension ``n >= 1``.

    Construction from a raw array symmetrizes it (average over all ``d!``
    index permutations) when ``d <= 4``; for higher orders the input must
    already be symmetric to a relative tolerance of ``1e-10``.

    Instances are immutable; the wrapped array is flagged read-only.
    """

    __slots__ = ("_array",)

    def __init__(self, array: ArrayLike):
        a = np.array(array, dtype=np.float64)
        _check_cubical(a)
        if a.ndim <= _SYMMETRIZE_MAX_ORDER:
            a = _symmetrize(a)
        elif not _is_symmetric_array(a, rtol=_ASYMMETRY_RTOL):
            raise AsymmetricTensorError(
                f"order-{a.ndim} input is not symmetric (only orders <= "
                f"{_SYMMETRIZE_MAX_ORDER} are symmetrized on construction)"
            )
        a.flags.writeable = False
        self._array = a

    @classmethod
    def _wrap(cls, array: np.ndarray) -> "SymTensor":
        # Trusted constructor for arrays symmetric by construction.
        obj = cls.__new__(cls)
        a = np.asarray(array, dtype=np.float64).view()
        a.flags.writeable = False
        obj._array = a
        return obj

    @classmethod
    def zeros(cls, order: int, dim: int) -> "SymTensor":
        if order < 2:
            raise InvalidOrderError(f"order must be >= 2, got {order}")
        return cls._wrap(np.zeros((dim,) * order))

    @classmethod
    def from_entries(cls, entries: ArrayLike, order: int, dim: int) -> "SymTensor":
        """Build from a flat first-index-fastest array of length ``dim**order``."""
        flat = np.asarray(entries, dtype=np.float64).ravel()
        if flat.size != dim**order:
            raise ShapeError(f"expected {dim**order} entries, got {flat.size}")
        return cls(flat.reshape((dim,) * order, order="F"))

    @property
    def order(self) -> int:
        return self._array.ndim

    @property
    def dim(self) -> int:
        return self._array.shape[0]

    @property
    def array(self) -> np.ndarray:
        """Read-only ``(n,) * d`` view of the entries."""
        return self._array

    @property
    def entries(self) -> np.ndarray:
        """Flat entries, first index fastest."""
        return self._array.ravel(order="F")

    def __getitem__(self, index):
        return self._array[index]

    def __repr__(self) -> str:
        return f"SymTensor(order={self.order}, dim={self.dim})"

    def is_symmetric(self, rtol: float = 1e-12) -> bool:
        return _is_symmetric_array(self._array, rtol=rtol)


def _check_cubical(a: np.ndarray) -> None:
    if a.ndim < 2:
        raise InvalidOrderError(f"order must be >= 2, got {a.ndim}")
    if len(set(a.shape)) != 1 or a.shape[0] < 1:
        raise ShapeError(f"symmetric tensors need equal positive dimensions, got {a.shape}")


def _symmetrize(a: np.ndarray) -> np.ndarray:
    perms = list(permutations(range(a.ndim)))
    out = np.zeros_like(a)
    for p in perms:
        out += np.transpose(a, p)
    out /= len(perms)
    return out


def _is_symmetric_array(a: np.ndarray, rtol: float) -> bool:
    scale = max(np.max(np.abs(a)), np.finfo(float).tiny) if a.size else 1.0
    atol = rtol * scale
    d = a.ndim
    if a.size <= _EXHAUSTIVE_LIMIT:
        # The swap (0 1) and the d-cycle generate the whole permutation group.
        swap = (1, 0) + tuple(range(2, d))
        cycle = tuple(range(1, d)) + (0,)
        return bool(
            np.allclose(a, np.transpose(a, swap), rtol=0, atol=atol)
            and np.allclose(a, np.transpose(a, cycle), rtol=0, atol=atol)
        )
    rng = np.random.default_rng(0)
    n = a.shape[0]
    for _ in range(_SAMPLED_CHECKS):
        idx = rng.integers(0, n, size=d)
        perm = rng.permutation(d)
        if abs(a[tuple(idx)] - a[tuple(idx[perm])]) > atol:
            return False
    return True


def _as_array(X) -> np.ndarray:
    return X.array if isinstance(X, SymTensor) else np.asarray(X, dtype=np.float64)


def sym_outer(x: ArrayLike, d: int) -> SymTensor:
    """Return the symmetric outer power ``x ⊗ ... ⊗ x`` (``d`` factors)."""
    if d < 2:
        raise InvalidOrderError(f"order must be >= 2, got {d}")
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size < 1:
        raise ShapeError("vector must have at least one entry")
    out = x
    for _ in range(d - 1):
        out = np.multiply.outer(out, x)
    return SymTensor._wrap(out)


def multi_mode_product(X, mats: Sequence[np.ndarray]) -> np.ndarray:
    """Contract mode ``k`` of ``X`` with ``mats[k]`` for every ``k``.

    Entry ``(i1, ..., id)`` of the result is
    ``sum_j x[j1, ..., jd] * mats[0][j1, i1] * ... * mats[d-1][jd, id]``.
    The result is a plain array because mixed multipliers break symmetry.
    ``None`` in ``mats`` means the identity.
    """
    a = _as_array(X)
    if len(mats) != a.ndim:
        raise ShapeError(f"need {a.ndim} matrices, got {len(mats)}")
    for k, M in enumerate(mats):
        if M is None:
            # Rotate the axis to the back without contracting.
            a = np.moveaxis(a, 0, -1)
            continue
        M = np.asarray(M, dtype=np.float64)
        if M.ndim != 2 or M.shape[0] != a.shape[0]:
            raise ShapeError(
                f"mode {k}: multiplier with {M.shape[0] if M.ndim == 2 else '?'} rows "
                f"cannot contract a mode of size {a.shape[0]}"
            )
        # Contracting the leading axis and appending the new one cycles the
        # axes, so after d steps the original order is restored.
        a = np.tensordot(a, M, axes=([0], [0]))
    return np.ascontiguousarray(a)


def tucker_product(X: SymTensor, Y: ArrayLike) -> SymTensor:
    """Symmetric Tucker product ``X · (Y, ..., Y)``; ``Y`` is ``n x m``."""
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim != 2 or Y.shape[0] != X.dim:
        raise ShapeError(f"multiplier must have {X.dim} rows, got shape {Y.shape}")
    return SymTensor._wrap(multi_mode_product(X, [Y] * X.order))


def matricize(X) -> np.ndarray:
    """Mode-1 unfolding, ``n x n**(d-1)``, trailing indices first-fastest."""
    a = _as_array(X)
    return a.reshape(a.shape[0], -1, order="F")


def inner(X, Y) -> float:
    """Coordinatewise inner product of two tensors of identical shape."""
    a, b = _as_array(X), _as_array(Y)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.dot(a.ravel(), b.ravel()))


def norm(X) -> float:
    return float(np.linalg.norm(_as_array(X).ravel()))


def inner_all_but_first(X, Y) -> np.ndarray:
    """Contract every mode except the first: ``z[i, i'] = <X[i, ...], Y[i', ...]>``."""
    a, b = _as_array(X), _as_array(Y)
    if a.ndim != b.ndim or a.shape[1:] != b.shape[1:]:
        raise ShapeError(f"trailing shapes differ: {a.shape} vs {b.shape}")
    return a.reshape(a.shape[0], -1) @ b.reshape(b.shape[0], -1).T


def elementwise_pow(M: ArrayLike, k: int) -> np.ndarray:
    if k < 0:
        raise ValueError(f"exponent must be non-negative, got {k}")
    M = np.asarray(M, dtype=np.float64)
    if k == 0:
        return np.ones_like(M)
    out = M.copy()
    for _ in range(k - 1):
        out *= M
    return out


def symmetrize_matrix(M: ArrayLike) -> np.ndarray:
    """Return ``(M + M.T) / 2``."""
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ShapeError(f"square matrix required, got shape {M.shape}")
    return 0.5 * (M + M.T)


def random_symmetric(order: int, dim: int, rng: np.random.Generator) -> SymTensor:
    """Symmetrized standard-normal tensor (test and benchmark helper)."""
    raw = rng.standard_normal((dim,) * order)
    if order <= _SYMMETRIZE_MAX_ORDER:
        return SymTensor(raw)
    return SymTensor._wrap(_symmetrize(raw))
