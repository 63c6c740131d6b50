"""Command-line front end: generate, estimate, bench, predict.

Exit codes: 0 success, 1 runtime or numerical failure (with an error JSON
on stderr), 2 usage error. Every run echoes its fully-resolved
configuration in the output header, and every output except wall-clock
fields is a deterministic function of (flags, seed). The seed comes from
--seed, then the MIXTILE_SEED environment variable, then 0.

Observation rows are reordered along a locality-preserving curve before
tiling, which concentrates large covariance entries near the diagonal
band; outputs that refer to rows are mapped back to input order.
"""

import argparse
import json
import math
import os
import sys
import time

from .covmath import DistanceMetric, MaternParams
from .factor import (
    FactorizationError,
    cholesky,
    logdet as factor_logdet,
    planned_flops,
    reconstruction_error,
    solve as factor_solve,
)
from .geodata import (
    DatasetFormatError,
    derive_seed,
    generate_field,
    generate_locations,
    kfold_split,
    morton_sort,
    read_dataset,
    write_dataset,
)
from .mle import EstimationError, OptimizerConfig, fit_matern
from .predict import pmse_kfold
from .tilestore import PrecisionOverflowError, PrecisionPolicy, TileAssembler

SCHEMA_VERSION = 1


# ---------------------------------------------------------------------------
# argument types
# ---------------------------------------------------------------------------

def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def _parse_theta(text):
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(
            f"expected variance,range,smoothness, got {text!r}")
    try:
        v, r, s = (float(p) for p in parts)
        return MaternParams(v, r, s)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _parse_policy(text):
    t = text.strip().lower()
    if t == "dp":
        return PrecisionPolicy.dp()
    head, sep, tail = t.partition(":")
    if sep and head in ("mp", "dst"):
        try:
            pct = float(tail)
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad percentage in {text!r}")
        if not 0.0 < pct <= 100.0:
            raise argparse.ArgumentTypeError(
                f"percentage must be in (0, 100], got {pct}")
        if head == "mp":
            return PrecisionPolicy.mp(dp_percent=pct)
        return PrecisionPolicy.dst(dp_percent=pct)
    raise argparse.ArgumentTypeError(
        f"policy must be dp, mp:<percent> or dst:<percent>, got {text!r}")


def _parse_metric(text):
    if text == "euclidean":
        return DistanceMetric.euclidean()
    if text == "great-circle":
        return DistanceMetric.great_circle()
    raise argparse.ArgumentTypeError(f"unknown metric {text!r}")


def _resolve_seed(args):
    if args.seed is not None:
        return args.seed
    env = os.environ.get("MIXTILE_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise SystemExit(2)
    return 0


def _resolve_threads(args):
    if args.threads is not None:
        return args.threads
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def _policy_dict(policy, p=None):
    resolved = policy.resolve(p) if p is not None else policy
    return {
        "mode": resolved.mode.value,
        "diag_thick": resolved.diag_thick,
        "dp_percent": resolved.dp_percent,
        "label": policy.label(),
    }


def _open_out(path):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", newline=""), True


def _emit_json(payload, path):
    fh, owned = _open_out(path)
    try:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    finally:
        if owned:
            fh.close()


def _emit_csv(header, rows, config, path):
    fh, owned = _open_out(path)
    try:
        fh.write(f"# schema_version={SCHEMA_VERSION}\n")
        fh.write(f"# config: {json.dumps(config, sort_keys=True)}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")
    finally:
        if owned:
            fh.close()


def _fmt(value):
    return repr(float(value))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_generate(args):
    seed = _resolve_seed(args)
    locations = generate_locations(args.n, seed=derive_seed(seed, 0))
    dataset = generate_field(
        locations, args.theta0, metric=args.metric,
        seed=derive_seed(seed, 1), nb=args.nb)
    fh, owned = _open_out(args.out)
    try:
        write_dataset(dataset, fh)
    finally:
        if owned:
            fh.close()
    v, r, s = args.theta0.as_tuple()
    print(f"generated n={args.n} theta0={v!r},{r!r},{s!r} seed={seed}",
          file=sys.stderr)
    return 0


def cmd_estimate(args):
    seed = _resolve_seed(args)
    threads = _resolve_threads(args)
    dataset = read_dataset(args.data)
    dataset, _ = morton_sort(dataset)
    p = -(-dataset.n // args.nb)
    cfg = OptimizerConfig(tol=args.tol, max_iters=args.max_iters)
    result = fit_matern(dataset, args.nb, args.policy, config=cfg,
                        threads=threads)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "config": {
            "command": "estimate",
            "data": args.data,
            "n": dataset.n,
            "nb": args.nb,
            "policy": _policy_dict(args.policy, p),
            "seed": seed,
            "metric": dataset.metric.kind,
            "threads": threads,
            "tol": args.tol,
            "max_iters": args.max_iters,
        },
        "result": {
            "variance": result.params.variance,
            "spatial_range": result.params.spatial_range,
            "smoothness": result.params.smoothness,
            "loglik": result.value,
            "iterations": result.iterations,
            "evaluations": result.evaluations,
            "converged": result.converged,
        },
    }
    _emit_json(payload, args.out)
    return 0


def cmd_bench(args):
    seed = _resolve_seed(args)
    threads = _resolve_threads(args)
    policies = args.policy or [PrecisionPolicy.dp()]
    config = {
        "command": "bench",
        "n": args.n,
        "nb": args.nb,
        "policies": [p.label() for p in policies],
        "theta": list(args.theta.as_tuple()),
        "reps": args.reps,
        "seed": seed,
        "threads": threads,
    }
    rows = []
    for idx, n in enumerate(args.n):
        locations = generate_locations(n, seed=derive_seed(seed, 2 * idx))
        dataset = generate_field(locations, args.theta,
                                 seed=derive_seed(seed, 2 * idx + 1),
                                 nb=args.nb)
        dataset, _ = morton_sort(dataset)
        nb = min(args.nb, n)
        asm = TileAssembler(dataset, nb)
        for policy in policies:
            fac = None
            ld = math.nan
            elapsed = 0.0
            for _ in range(args.reps):
                start = time.perf_counter()
                matrix = asm.assemble(args.theta, policy)
                fac = cholesky(matrix, threads=threads)
                ld = factor_logdet(fac)
                float(dataset.z @ factor_solve(fac, dataset.z))
                elapsed += time.perf_counter() - start
            reference = asm.assemble(args.theta, PrecisionPolicy.dp())
            residual = reconstruction_error(fac, reference)
            flops = planned_flops(n, nb, policy)
            rows.append([
                str(n), str(nb), policy.label(),
                f"{elapsed / args.reps:.6f}",
                _fmt(flops.dp), _fmt(flops.sp), _fmt(residual), _fmt(ld),
            ])
    _emit_csv(
        ["n", "nb", "policy", "wall_time", "dp_flops", "sp_flops",
         "residual", "logdet"],
        rows, config, args.out)
    return 0


def cmd_predict(args):
    seed = _resolve_seed(args)
    threads = _resolve_threads(args)
    dataset = read_dataset(args.data)
    dataset, _ = morton_sort(dataset)
    policies = args.policy or [PrecisionPolicy.dp()]
    folds = kfold_split(dataset.n, args.k, seed=seed)
    config = {
        "command": "predict",
        "data": args.data,
        "n": dataset.n,
        "nb": args.nb,
        "policies": [p.label() for p in policies],
        "theta": None if args.theta is None else list(args.theta.as_tuple()),
        "k": args.k,
        "refit": args.refit,
        "seed": seed,
        "threads": threads,
    }
    if args.theta is None and not args.refit:
        raise EstimationError("predict needs --theta unless --refit is given")
    cfg = OptimizerConfig(max_iters=args.max_iters)
    rows = []
    for policy in policies:
        report = pmse_kfold(
            dataset, args.theta, args.nb, policy, folds=folds,
            refit=args.refit, optimizer_config=cfg, threads=threads)
        label = policy.label()
        for fold_idx, mse in enumerate(report.fold_mse):
            rows.append([label, str(fold_idx), "fold_mse", _fmt(mse)])
        rows.append([label, "", "pmse", _fmt(report.pmse)])
    _emit_csv(["variant", "replicate", "statistic", "value"],
              rows, config, args.out)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="mixtile",
        description="Matern field simulation, estimation, prediction and "
                    "benchmarking on band-precision tiled covariances.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None,
                       help="RNG seed (default: MIXTILE_SEED or 0)")
        p.add_argument("--nb", type=_positive_int, default=256,
                       help="tile size (default 256)")
        p.add_argument("--threads", type=_positive_int, default=None,
                       help="worker threads (default: cpu count)")
        p.add_argument("--out", default=None,
                       help="output path (default stdout)")

    g = sub.add_parser("generate", help="simulate a Matern dataset CSV")
    common(g)
    g.add_argument("--n", type=_positive_int, required=True)
    g.add_argument("--theta0", type=_parse_theta,
                   default=MaternParams(1.0, 0.1, 0.5),
                   help="true variance,range,smoothness (default 1,0.1,0.5)")
    g.add_argument("--metric", type=_parse_metric,
                   default=DistanceMetric.euclidean(),
                   help="euclidean or great-circle")
    g.set_defaults(func=cmd_generate)

    e = sub.add_parser("estimate", help="fit Matern parameters to a dataset")
    common(e)
    e.add_argument("--data", required=True, help="dataset CSV path")
    e.add_argument("--policy", type=_parse_policy, default=PrecisionPolicy.dp(),
                   help="dp, mp:<percent>, or dst:<percent>")
    e.add_argument("--tol", type=float, default=1e-3)
    e.add_argument("--max-iters", type=_positive_int, default=200)
    e.set_defaults(func=cmd_estimate)

    b = sub.add_parser("bench", help="time likelihood evaluations")
    common(b)
    b.add_argument("--n", type=_positive_int, action="append", required=True,
                   help="problem size; repeatable")
    b.add_argument("--policy", type=_parse_policy, action="append",
                   help="repeatable; default dp")
    b.add_argument("--theta", type=_parse_theta,
                   default=MaternParams(1.0, 0.1, 0.5))
    b.add_argument("--reps", type=_positive_int, default=3,
                   help="repetitions per timing (default 3)")
    b.set_defaults(func=cmd_bench)

    pr = sub.add_parser("predict", help="k-fold held-out prediction error")
    common(pr)
    pr.add_argument("--data", required=True)
    pr.add_argument("--policy", type=_parse_policy, action="append",
                    help="repeatable; default dp")
    pr.add_argument("--theta", type=_parse_theta, default=None,
                    help="parameters for kriging (omit with --refit)")
    pr.add_argument("--k", type=_positive_int, default=10)
    pr.add_argument("--refit", action="store_true",
                    help="re-estimate parameters on every training fold")
    pr.add_argument("--max-iters", type=_positive_int, default=200)
    pr.set_defaults(func=cmd_predict)
    return parser


_RUNTIME_ERRORS = (
    EstimationError,
    FactorizationError,
    PrecisionOverflowError,
    DatasetFormatError,
    RuntimeError,
    OSError,
    ValueError,
)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _RUNTIME_ERRORS as exc:
        payload = {
            "schema_version": SCHEMA_VERSION,
            "error": {"type": type(exc).__name__, "message": str(exc)},
        }
        json.dump(payload, sys.stderr, sort_keys=True)
        sys.stderr.write("\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
