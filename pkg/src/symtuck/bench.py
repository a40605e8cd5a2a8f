"""Implicit versus explicit gradient timing at matched iterates."""

from __future__ import annotations

import csv
import io
import time
from dataclasses import asdict, dataclass

import numpy as np

from .audit import AllocationAudit, dense_tensor_bytes
from .explicit import _objective_and_gradient, default_step, qr_retract
from .moments import build_moment, check_explicit_budget
from .streaming import implicit_objective_and_gradient, initial_basis


@dataclass
class BenchRow:
    iter: int
    implicit_s: float
    explicit_s: float
    explicit_overhead_s: float
    implicit_peak_bytes: int
    explicit_peak_bytes: int
    implicit_dense_alloc: bool


def run_bench(X: np.ndarray, d: int, r: int, iters: int = 10, seed: int = 0) -> list[BenchRow]:
    """Time one full-sample gradient per iteration on both paths.

    The iterates follow explicit PGD steps so both arms see the same ``Q``.
    ``explicit_overhead_s`` is the one-off cost of forming the moment and is
    repeated on every row.  Peak bytes come from a separate audited call so
    that tracing does not distort the timings.
    """
    n = X.shape[0]
    check_explicit_budget(n, d)
    dense = dense_tensor_bytes(n, d)
    t0 = time.perf_counter()
    M = build_moment(X, d)
    overhead = time.perf_counter() - t0
    step = default_step(M)
    Q = initial_basis(n, r, seed)
    rows = []
    for t in range(1, iters + 1):
        t0 = time.perf_counter()
        implicit_objective_and_gradient(X, Q, d)
        t_imp = time.perf_counter() - t0
        t0 = time.perf_counter()
        _, G = _objective_and_gradient(M, Q)
        t_exp = time.perf_counter() - t0
        with AllocationAudit() as a_imp:
            implicit_objective_and_gradient(X, Q, d)
        with AllocationAudit() as a_exp:
            _objective_and_gradient(M, Q)
        rows.append(BenchRow(t, t_imp, t_exp, overhead, a_imp.peak_bytes, a_exp.peak_bytes,
                             a_imp.allocated_at_least(dense)))
        Q = qr_retract(Q + step * G)
    return rows


def rows_to_csv(rows: list[BenchRow]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(BenchRow.__dataclass_fields__))
    writer.writeheader()
    for row in rows:
        writer.writerow(asdict(row))
    return buf.getvalue()
