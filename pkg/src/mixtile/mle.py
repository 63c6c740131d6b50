"""Gaussian likelihood evaluation and Matern maximum-likelihood fitting.

The variance enters the likelihood analytically: assembling the covariance
at unit variance and profiling gives the optimal variance in closed form,
so the numerical search runs over (spatial_range, smoothness) only, in log
space. The search is a fixed-coefficient Nelder-Mead with box clamping;
evaluations are memoized and recorded, and every float operation happens in
a fixed order, so a fit is a deterministic function of its inputs for any
worker count.

A non-positive-definite covariance during the search (possible under the
sparsified policy, or at degenerate parameter values) scores as -inf and
the search continues; only a search that never finds a feasible point
raises.
"""

import math
from dataclasses import dataclass

import numpy as np

from .covmath import MaternParams
from .factor import FactorizationError, cholesky
from .factor import logdet as factor_logdet
from .factor import solve as factor_solve
from .tilestore import TileAssembler

_LOG_2PI = math.log(2.0 * math.pi)


class EstimationError(RuntimeError):
    """The likelihood search found no feasible parameter point."""


@dataclass(frozen=True)
class LikelihoodEval:
    """One likelihood evaluation; variance_opt is set on the profile path."""

    value: float
    logdet: float
    quad: float
    variance_opt: float = None


@dataclass(frozen=True)
class OptimizerConfig:
    range_bounds: tuple = (1e-3, 5.0)
    smoothness_bounds: tuple = (0.05, 5.0)
    tol: float = 1e-3
    max_iters: int = 200

    def __post_init__(self):
        for lo, hi in (self.range_bounds, self.smoothness_bounds):
            if not (0 < lo < hi):
                raise ValueError(f"bad bounds ({lo}, {hi})")
        if self.tol <= 0 or self.max_iters < 1:
            raise ValueError("tol must be positive, max_iters at least 1")


@dataclass(frozen=True)
class TracePoint:
    """One objective evaluation: profiled variance is None when infeasible."""

    spatial_range: float
    smoothness: float
    value: float
    variance: float = None


@dataclass(frozen=True)
class FitResult:
    params: MaternParams
    value: float
    iterations: int
    evaluations: int
    converged: bool
    trace: tuple


def _evaluate(assembler, params, policy, threads):
    matrix = assembler.assemble(params, policy)
    fac = cholesky(matrix, threads=threads)
    ld = factor_logdet(fac)
    z = assembler.dataset.z
    quad = float(z @ factor_solve(fac, z))
    return ld, quad


def loglik(dataset, params, nb, policy, threads=1):
    """Exact Gaussian log-likelihood of the data under Matern parameters.

    Raises FactorizationError when the covariance is not positive definite
    under the given policy.
    """
    asm = TileAssembler(dataset, nb)
    ld, quad = _evaluate(asm, params, policy, threads)
    n = dataset.n
    value = -0.5 * (n * _LOG_2PI + ld + quad)
    return LikelihoodEval(value, ld, quad)


def _profile(assembler, spatial_range, smoothness, policy, threads):
    params = MaternParams(1.0, spatial_range, smoothness)
    ld, quad = _evaluate(assembler, params, policy, threads)
    n = assembler.n
    if not quad > 0.0:
        return LikelihoodEval(float("-inf"), ld, quad)
    value = (
        -0.5 * n * (_LOG_2PI + 1.0)
        + 0.5 * n * math.log(n)
        - 0.5 * ld
        - 0.5 * n * math.log(quad)
    )
    return LikelihoodEval(value, ld, quad, variance_opt=quad / n)


def profile_loglik(dataset, spatial_range, smoothness, nb, policy, threads=1):
    """Log-likelihood with the variance profiled out analytically.

    The returned value equals loglik() at variance_opt; assembly runs at
    unit variance so the factorization cost is paid once per (range,
    smoothness) pair instead of once per variance candidate.
    """
    asm = TileAssembler(dataset, nb)
    return _profile(asm, spatial_range, smoothness, policy, threads)


_START_SIMPLEX = ((0.05, 0.5), (0.2, 0.5), (0.05, 1.5))


def fit_matern(dataset, nb, policy, config=None, threads=1):
    """Maximize the Matern likelihood over (variance, range, smoothness).

    Nelder-Mead on the profiled objective in log-(range, smoothness) space,
    candidates clamped to the config box. Infeasible evaluations score -inf
    and never stop the search. Returns the fit with its full evaluation
    trace; raises EstimationError when no evaluation was feasible.
    """
    cfg = config if config is not None else OptimizerConfig()
    asm = TileAssembler(dataset, nb)
    lo = (math.log(cfg.range_bounds[0]), math.log(cfg.smoothness_bounds[0]))
    hi = (math.log(cfg.range_bounds[1]), math.log(cfg.smoothness_bounds[1]))
    memo = {}
    trace = []

    def evaluate(x):
        x0 = min(max(float(x[0]), lo[0]), hi[0])
        x1 = min(max(float(x[1]), lo[1]), hi[1])
        key = (x0, x1)
        ev = memo.get(key)
        if ev is None:
            sr, sm = math.exp(x0), math.exp(x1)
            try:
                ev = _profile(asm, sr, sm, policy, threads)
            except FactorizationError:
                ev = LikelihoodEval(float("-inf"), math.nan, math.nan)
            memo[key] = ev
            trace.append(TracePoint(sr, sm, ev.value, ev.variance_opt))
        return np.array([x0, x1]), -ev.value

    xs = []
    fs = []
    for sr, sm in _START_SIMPLEX:
        x, f = evaluate(np.log([sr, sm]))
        xs.append(x)
        fs.append(f)

    def sort_vertices():
        idx = sorted(range(3), key=lambda i: fs[i])
        xs[:] = [xs[i] for i in idx]
        fs[:] = [fs[i] for i in idx]

    def shrink():
        for i in (1, 2):
            xs[i], fs[i] = evaluate(xs[0] + 0.5 * (xs[i] - xs[0]))

    iterations = 0
    converged = False
    while True:
        sort_vertices()
        spread = fs[2] - fs[0]
        if math.isfinite(spread) and spread <= cfg.tol:
            converged = True
            break
        if iterations >= cfg.max_iters:
            break
        iterations += 1
        centroid = 0.5 * (xs[0] + xs[1])
        xr, fr = evaluate(centroid + (centroid - xs[2]))
        if fr < fs[0]:
            xe, fe = evaluate(centroid + 2.0 * (centroid - xs[2]))
            if fe < fr:
                xs[2], fs[2] = xe, fe
            else:
                xs[2], fs[2] = xr, fr
        elif fr < fs[1]:
            xs[2], fs[2] = xr, fr
        elif fr < fs[2]:
            xo, fo = evaluate(centroid + 0.5 * (xr - centroid))
            if fo <= fr:
                xs[2], fs[2] = xo, fo
            else:
                shrink()
        else:
            xi, fi = evaluate(centroid - 0.5 * (centroid - xs[2]))
            if fi < fs[2]:
                xs[2], fs[2] = xi, fi
            else:
                shrink()

    if not math.isfinite(fs[0]):
        raise EstimationError(
            "no feasible (range, smoothness) point; every evaluation failed")
    best = memo[(float(xs[0][0]), float(xs[0][1]))]
    params = MaternParams(
        best.variance_opt, math.exp(float(xs[0][0])), math.exp(float(xs[0][1])))
    return FitResult(
        params=params,
        value=best.value,
        iterations=iterations,
        evaluations=len(memo),
        converged=converged,
        trace=tuple(trace),
    )
