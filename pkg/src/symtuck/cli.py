"""``symtuck`` command-line interface.

Exit codes: 0 on success, 1 on numerical failure or stream underrun, 2 on
usage errors (bad flags, missing files, explicit path over budget).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import io as sio
from .anomaly import anomaly_demo, planted_outliers
from .bench import rows_to_csv, run_bench
from .errors import ExplicitTooLargeError, ShapeError, SymTuckError
from .explicit import hoevd_explicit, pgd_explicit
from .manifold import certify_criticality, projector, relative_gradient, subspace_error
from .moments import FactorModel, build_moment, sample_factor_model, stream_from_pool
from .streaming import TwoPhaseConfig, estimate_core, s_hoevd, scalable_pgd


class UsageError(Exception):
    pass


def _emit(payload: dict) -> None:
    print(json.dumps(payload))


def _require_input(args) -> Path:
    path = Path(args.input)
    if not path.is_file():
        raise UsageError(f"input file not found: {path}")
    return path


def _truth_for(path: Path, r: int):
    side = sio.truth_path(path)
    if not side.is_file():
        return None
    Q = np.asarray(sio.read_json(side)["q_star"], dtype=np.float64)
    return Q if Q.shape[1] == r else None


def _config(args) -> TwoPhaseConfig:
    try:
        return TwoPhaseConfig(r=args.rank, T1=args.iters1, T2=args.iters1 + args.iters2,
                              b1=args.batch1, b2=args.batch2, c1=args.c1, c2=args.c2,
                              seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def cmd_synth(args) -> None:
    model = FactorModel.random(args.dim, args.rtrue, args.snrinv, seed=args.seed)
    batch = sample_factor_model(model, args.samples)
    sio.write_samples(args.output, batch.data, fmt=args.format)
    sio.write_json(sio.truth_path(args.output), {
        "dim": model.dim,
        "rtrue": model.rank,
        "snr_inverse": args.snrinv,
        "sigma": model.sigma,
        "seed": args.seed,
        "q_star": model.true_basis().tolist(),
    })


def cmd_decompose(args) -> None:
    path = _require_input(args)
    X = sio.read_samples(path)
    n, p = X.shape
    if not 1 <= args.rank <= n:
        raise UsageError(f"rank {args.rank} must lie in [1, {n}]")
    truth = _truth_for(path, args.rank)
    summary = {"n": n, "p": p, "rank": args.rank, "order": args.order}

    if args.explicit:
        M = build_moment(X, args.order)
        Q, trace = pgd_explicit(M, hoevd_explicit(M, args.rank), iters=args.iters2, tol=args.tol)
        summary["relgrad"] = relative_gradient(M, Q)
        if args.report:
            sio.write_text(args.report, certify_criticality(M, projector(Q)).to_json() + "\n")
    else:
        cfg = _config(args)
        holdout = X[:, p - args.holdout:] if args.holdout else None
        pool = X[:, :p - args.holdout] if args.holdout else X
        stream = stream_from_pool(pool, min(cfg.b1, pool.shape[1]))
        Q, trace = scalable_pgd(stream, cfg, args.order, eval_samples=holdout, truth=truth,
                                eval_every=args.eval_every)
        if holdout is not None:
            summary["relgrad"] = relative_gradient(holdout, Q, args.order)
    if truth is not None:
        summary["subspace_error"] = subspace_error(Q, truth)

    sio.write_basis(args.output, Q)
    if args.trace:
        trace.write(args.trace)
    if args.core_output:
        sio.write_core(args.core_output, estimate_core(Q, X, args.order))
    _emit(summary)


def cmd_hoevd(args) -> None:
    path = _require_input(args)
    X = sio.read_samples(path)
    if not 1 <= args.rank <= X.shape[0]:
        raise UsageError(f"rank {args.rank} must lie in [1, {X.shape[0]}]")
    if args.explicit:
        Q = hoevd_explicit(build_moment(X, args.order), args.rank)
    else:
        cfg = _config(args)
        Q = s_hoevd(stream_from_pool(X, min(cfg.b1, X.shape[1])), cfg, args.order)
    sio.write_basis(args.output, Q)
    truth = _truth_for(path, args.rank)
    _emit({} if truth is None else {"subspace_error": subspace_error(Q, truth)})


def cmd_core(args) -> None:
    path = _require_input(args)
    if not Path(args.basis).is_file():
        raise UsageError(f"basis file not found: {args.basis}")
    X = sio.read_samples(path)
    Q = sio.read_basis(args.basis)
    if Q.shape[0] != X.shape[0]:
        raise UsageError(f"basis has {Q.shape[0]} rows, samples have dimension {X.shape[0]}")
    sio.write_core(args.output, estimate_core(Q, X, args.order))


def cmd_bench(args) -> None:
    if args.input:
        X = sio.read_samples(_require_input(args))
    else:
        X = np.random.default_rng(args.seed).standard_normal((args.dim, args.samples))
    rows = run_bench(X, args.order, args.rank, args.iters, args.seed)
    text = rows_to_csv(rows)
    if args.output:
        sio.write_text(args.output, text)
    else:
        sys.stdout.write(text)


def cmd_anomaly(args) -> None:
    model = FactorModel.random(args.dim, args.rtrue, args.snrinv, seed=args.seed)
    X, labels = planted_outliers(model, args.samples, args.fraction, args.scale)
    b = args.batch1
    cfg = TwoPhaseConfig(r=args.rank, T1=args.iters1, T2=args.iters1 + args.iters2,
                         b1=b, b2=args.batch2, c1=args.c1, c2=args.c2, seed=args.seed)
    res = anomaly_demo(X, labels, args.rank, cfg, method=args.method)
    if args.output:
        np.savetxt(args.output, np.column_stack([labels, res.scores_skewness,
                                                 res.scores_covariance]),
                   delimiter=",", fmt=["%d", "%.17g", "%.17g"],
                   header="label,score_skewness,score_covariance", comments="")
    _emit({"auc_skewness": res.auc_skewness, "auc_covariance": res.auc_covariance})


def _solver_flags(p: argparse.ArgumentParser, iters1=250, iters2=250, batch=50,
                  c1=0.05, c2=1.0, rank=None) -> None:
    p.add_argument("--rank", type=int, required=rank is None, default=rank)
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--batch1", type=int, default=batch)
    p.add_argument("--batch2", type=int, default=batch)
    p.add_argument("--c1", type=float, default=c1)
    p.add_argument("--c2", type=float, default=c2)
    p.add_argument("--iters1", type=int, default=iters1, help="Phase I batches")
    p.add_argument("--iters2", type=int, default=iters2,
                   help="Phase II batches (explicit path: PGD iterations)")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="symtuck",
                                     description="Symmetric Tucker decomposition of moment tensors.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="draw samples from a random NIG factor model")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--rtrue", type=int, required=True)
    p.add_argument("--snrinv", type=float, default=0.0)
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=["csv", "bin"], default=None)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("decompose", help="streaming (or explicit) moment decomposition")
    _solver_flags(p)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True, help="basis CSV")
    p.add_argument("--trace", help="JSON-lines trace")
    p.add_argument("--core-output", help="core tensor CSV (mode-1 unfolding)")
    p.add_argument("--holdout", type=int, default=0,
                   help="trailing samples kept out of the stream for evaluation")
    p.add_argument("--eval-every", type=int, default=1)
    p.add_argument("--explicit", action="store_true", help="form the moment and run dense PGD")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--report", help="criticality report JSON (explicit path)")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("hoevd", help="streaming (or explicit) HOEVD only")
    _solver_flags(p)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--explicit", action="store_true")
    p.set_defaults(func=cmd_hoevd)

    p = sub.add_parser("core", help="estimate the core tensor for a basis")
    p.add_argument("--input", required=True)
    p.add_argument("--basis", required=True)
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_core)

    p = sub.add_parser("bench", help="implicit versus explicit gradient timings (CSV)")
    p.add_argument("--dim", type=int, default=30)
    p.add_argument("--order", type=int, default=4)
    p.add_argument("--samples", type=int, default=500)
    p.add_argument("--rank", type=int, default=3)
    p.add_argument("--iters", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--input")
    p.add_argument("--output")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("anomaly", help="planted-outlier scoring demo")
    _solver_flags(p, iters1=100, iters2=100, batch=50, c1=0.35, c2=0.5, rank=3)
    p.set_defaults(order=3)
    p.add_argument("--dim", type=int, default=20)
    p.add_argument("--rtrue", type=int, default=3)
    p.add_argument("--snrinv", type=float, default=1.0)
    p.add_argument("--samples", type=int, default=10000)
    p.add_argument("--fraction", type=float, default=0.02)
    p.add_argument("--scale", type=float, default=5.0)
    p.add_argument("--method", choices=["pgd", "hoevd"], default="pgd")
    p.add_argument("--output", help="per-sample labels and scores CSV")
    p.set_defaults(func=cmd_anomaly)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (UsageError, ExplicitTooLargeError, ShapeError, FileNotFoundError) as exc:
        print(f"symtuck {args.command}: {exc}", file=sys.stderr)
        return 2
    except (SymTuckError, ArithmeticError, ValueError) as exc:
        print(f"symtuck {args.command}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
