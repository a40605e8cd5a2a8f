"""Synthetic anomaly-scoring demo: skewness subspace versus covariance subspace."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import DegenerateLabelsError, ShapeError
from .moments import OUTLIERS, FactorModel, as_samples, derived_rng, stream_from_pool, whiten
from .streaming import TwoPhaseConfig, s_hoevd, scalable_pgd

OUTLIER_FRACTION = 0.02
OUTLIER_SCALE = 5.0


def roc_auc(scores, labels) -> float:
    """Area under the ROC curve via the rank-sum statistic (ties get average ranks)."""
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel().astype(bool)
    if s.shape != y.shape:
        raise ShapeError(f"{s.size} scores for {y.size} labels")
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateLabelsError("ROC-AUC needs both classes present")
    ranks = rankdata(s)
    return float((ranks[y].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def planted_outliers(model: FactorModel, count: int,
                     fraction: float = OUTLIER_FRACTION,
                     scale: float = OUTLIER_SCALE) -> tuple[np.ndarray, np.ndarray]:
    """Samples with a random ``fraction`` drawn at ``scale`` times the factor amplitude.

    Returns ``(X, labels)`` with ``labels[i]`` true for planted outliers.
    """
    if not 0 < fraction < 1:
        raise ValueError("fraction must lie in (0, 1)")
    rng = derived_rng(model.seed, OUTLIERS)
    n_out = max(1, int(round(fraction * count)))
    labels = np.zeros(count, dtype=bool)
    labels[rng.choice(count, n_out, replace=False)] = True
    X = np.empty((model.dim, count))
    X[:, ~labels] = model.draw(rng, count - n_out)
    X[:, labels] = model.draw(rng, n_out, factor_scale=scale)
    return X, labels


def subspace_scores(Xw: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Whiten ``Q^T Xw`` and return the column norms."""
    return np.linalg.norm(whiten(Q.T @ Xw), axis=0)


def covariance_subspace(Xw: np.ndarray, r: int) -> np.ndarray:
    cov = Xw @ Xw.T / Xw.shape[1]
    _, evecs = np.linalg.eigh(0.5 * (cov + cov.T))
    return evecs[:, ::-1][:, :r]


@dataclass
class AnomalyResult:
    auc_skewness: float
    auc_covariance: float
    scores_skewness: np.ndarray
    scores_covariance: np.ndarray
    labels: np.ndarray


def anomaly_demo(X, labels, r: int, cfg: TwoPhaseConfig = None,
                 method: str = "pgd", ridge: float = 0.0) -> AnomalyResult:
    """Score samples along a skewness subspace and along a covariance subspace.

    Both subspaces come from the whitened data: the skewness one by the
    streaming solver at order 3 (``method`` is ``"pgd"`` for both phases or
    ``"hoevd"`` for Phase I only), the covariance one by eigendecomposition.
    Whitening is exact by default; a positive ``ridge`` leaks the raw
    variance ordering into the whitened covariance.
    """
    X = as_samples(X)
    Xw = whiten(X, ridge)
    p = Xw.shape[1]
    if cfg is None:
        b = 50
        cfg = TwoPhaseConfig(r=r, T1=p // (2 * b), T2=p // b, b1=b, b2=b, c1=0.35, c2=0.5)
    stream = stream_from_pool(Xw, cfg.b1)
    if method == "pgd":
        Q, _ = scalable_pgd(stream, cfg, 3)
    elif method == "hoevd":
        Q = s_hoevd(stream, cfg, 3)
    else:
        raise ValueError(f"unknown method {method!r}")
    s_skew = subspace_scores(Xw, Q)
    s_cov = subspace_scores(Xw, covariance_subspace(Xw, r))
    return AnomalyResult(roc_auc(s_skew, labels), roc_auc(s_cov, labels), s_skew, s_cov,
                         np.asarray(labels, dtype=bool))
