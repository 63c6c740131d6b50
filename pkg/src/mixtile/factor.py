"""Tiled Cholesky with a dual-precision band, plus solves on the result.

The factorization walks the right-looking tile algorithm as a task graph.
Tiles within diag_thick of the diagonal carry FP64 payloads and every task
writing them runs in FP64; tiles outside the band carry FP32 payloads and
their inner updates run in FP32. Where the two zones touch, conversions are
fused into the producing task: a factored diagonal is narrowed once for the
FP32 panel solves, FP32 panels are widened back so diagonal updates can stay
FP64, and band panels that feed FP32 updates get a narrowed mirror. A
conversion with no consumer is skipped, so a band covering the whole grid
reproduces the pure-FP64 factorization bit for bit.

Every tile's update sequence is totally ordered by the graph edges, so
results are bitwise identical regardless of worker count or scheduling
order. Structurally absent tiles (the sparsified mode) simply drop the tasks
that would touch them; no fill-in appears outside the kept band.
"""

import heapq
import threading

import numpy as np
from scipy.linalg import solve_triangular

from . import kernels
from .tilestore import Mode, tile_to_dp, tile_to_sp

_POTRF, _TRSM, _SYRK, _GEMM = 0, 1, 2, 3


class FactorizationError(ArithmeticError):
    """A pivot was not positive; index locates it in the full matrix (0-based)."""

    def __init__(self, index, message=None):
        self.index = int(index)
        super().__init__(
            message or f"matrix not positive definite at global pivot {index}")


# ---------------------------------------------------------------------------
# task plan
# ---------------------------------------------------------------------------

def _plan(p, present):
    """Task keys and dependency edges for the tiles in `present`.

    Keys sort as (k, kind, i, j) which gives the canonical single-worker
    execution order. Edges serialize all writers of a tile in step order and
    make consumers wait for the panel/diagonal they read.
    """
    deps = {}
    chains = {}

    def _add(task, reads=()):
        deps[task] = set(reads)
        return task

    for k in range(p):
        tp = _add((k, _POTRF, k, k))
        chains.setdefault((k, k), []).append(tp)
        for i in range(k + 1, p):
            if (i, k) not in present:
                continue
            tt = _add((k, _TRSM, i, k), [tp])
            chains.setdefault((i, k), []).append(tt)
            ts = _add((k, _SYRK, i, k), [tt])
            chains.setdefault((i, i), []).append(ts)
        for j in range(k + 1, p):
            if (j, k) not in present:
                continue
            for i in range(j + 1, p):
                if (i, k) not in present or (i, j) not in present:
                    continue
                tg = _add((k, _GEMM, i, j), [(k, _TRSM, i, k), (k, _TRSM, j, k)])
                chains.setdefault((i, j), []).append(tg)

    for chain in chains.values():
        for a, b in zip(chain, chain[1:]):
            deps[b].add(a)
    return deps


def _flops_of(task, rows, thick):
    """(dp, sp) flop cost of one task under band thickness `thick`."""
    k, kind, i, j = task
    if kind == _POTRF:
        m = rows[k]
        return m ** 3 / 3.0, 0.0
    if kind == _TRSM:
        f = rows[i] * rows[k] ** 2
        return (f, 0.0) if i - k < thick else (0.0, f)
    if kind == _SYRK:
        return rows[i] ** 2 * rows[k], 0.0
    f = 2.0 * rows[i] * rows[j] * rows[k]
    return (f, 0.0) if i - j < thick else (0.0, f)


class FlopCount:
    """Flops split by the precision that executes them."""

    __slots__ = ("dp", "sp")

    def __init__(self, dp=0.0, sp=0.0):
        self.dp = float(dp)
        self.sp = float(sp)

    @property
    def total(self):
        return self.dp + self.sp

    @property
    def sp_fraction(self):
        return self.sp / self.total if self.total > 0 else 0.0

    def __repr__(self):
        return f"FlopCount(dp={self.dp:.6g}, sp={self.sp:.6g})"


def _tile_rows(n, nb, p):
    return [nb if i < p - 1 else n - nb * (p - 1) for i in range(p)]


def _present_keys(p, policy):
    thick = policy.diag_thick
    keep_all = policy.mode is not Mode.DST
    return {
        (i, j)
        for i in range(p)
        for j in range(i + 1)
        if keep_all or i - j < thick
    }


def planned_flops(n, nb, policy):
    """Flop split of the factorization plan, without touching any data."""
    p = -(-int(n) // int(nb))
    policy = policy.resolve(p)
    rows = _tile_rows(n, nb, p)
    present = _present_keys(p, policy)
    out = FlopCount()
    for task in _plan(p, present):
        d, s = _flops_of(task, rows, policy.diag_thick)
        out.dp += d
        out.sp += s
    return out


# ---------------------------------------------------------------------------
# execution
# ---------------------------------------------------------------------------

class _Runtime:
    """Dependency-counting scheduler over a ready heap.

    Workers pop the smallest ready key, run it, then release dependents.
    On an error the failing task is recorded and the queue drains; tasks
    already running finish, nothing new starts.
    """

    def __init__(self, deps, execute):
        self.execute = execute
        self.ndeps = {t: len(d) for t, d in deps.items()}
        self.dependents = {}
        for t, ds in deps.items():
            for d in ds:
                self.dependents.setdefault(d, []).append(t)
        self.ready = [t for t, c in self.ndeps.items() if c == 0]
        heapq.heapify(self.ready)
        self.remaining = len(self.ndeps)
        self.errors = []
        self.cond = threading.Condition()

    def _worker(self):
        while True:
            with self.cond:
                while not self.ready and self.remaining > 0 and not self.errors:
                    self.cond.wait()
                if self.errors or self.remaining <= 0:
                    return
                task = heapq.heappop(self.ready)
            try:
                self.execute(task)
            except BaseException as exc:
                with self.cond:
                    self.errors.append((task, exc))
                    self.cond.notify_all()
                return
            with self.cond:
                self.remaining -= 1
                for succ in self.dependents.get(task, ()):
                    self.ndeps[succ] -= 1
                    if self.ndeps[succ] == 0:
                        heapq.heappush(self.ready, succ)
                self.cond.notify_all()

    def run(self, threads):
        threads = max(1, min(int(threads), max(1, self.remaining)))
        pool = [threading.Thread(target=self._worker) for _ in range(threads - 1)]
        for th in pool:
            th.start()
        self._worker()
        for th in pool:
            th.join()
        if self.errors:
            self.errors.sort(key=lambda pair: pair[0])
            raise self.errors[0][1]


class CholeskyFactor:
    """Lower-triangular tile factor; tiles hold FP64 (off-band also FP32)."""

    def __init__(self, n, nb, p, policy, tiles, flops):
        self.n = n
        self.nb = nb
        self.p = p
        self.policy = policy
        self.tiles = tiles
        self.flops = flops

    def rows_of(self, i):
        return self.nb if i < self.p - 1 else self.n - self.nb * (self.p - 1)

    def slice_of(self, i):
        return slice(i * self.nb, min((i + 1) * self.nb, self.n))

    def band(self, i, j):
        return abs(i - j) < self.policy.diag_thick


def cholesky(matrix, threads=1):
    """Factor an assembled tile matrix in place; returns the tile factor.

    The input payloads are overwritten with factor content. Raises
    FactorizationError with the failing global pivot index when the matrix
    is not positive definite.
    """
    p, nb = matrix.p, matrix.nb
    tiles = matrix.tiles
    policy = matrix.policy
    for k in range(p):
        if (k, k) not in tiles:
            raise ValueError(f"diagonal tile {k} missing from the matrix")
    thick = policy.diag_thick
    mixed = policy.mode is Mode.MP
    sp_diag = {}

    def execute(task):
        k, kind, i, j = task
        if kind == _POTRF:
            t = tiles[(k, k)]
            try:
                t.dp = kernels.potrf(t.dp)
            except kernels.NotPositiveDefiniteError as exc:
                raise FactorizationError(k * nb + exc.index) from None
            if mixed and k + thick <= p - 1:
                sp_diag[k] = tile_to_sp(t.dp)
        elif kind == _TRSM:
            t = tiles[(i, k)]
            if i - k < thick:
                t.dp = kernels.trsm(tiles[(k, k)].dp, t.dp)
                if mixed and i + thick <= p - 1:
                    t.sp = tile_to_sp(t.dp)
            else:
                t.sp = kernels.trsm(sp_diag[k], t.sp)
                t.dp = tile_to_dp(t.sp)
        elif kind == _SYRK:
            d = tiles[(i, i)]
            d.dp = kernels.syrk(tiles[(i, k)].dp, d.dp)
        else:
            t = tiles[(i, j)]
            if i - j < thick:
                t.dp = kernels.gemm(tiles[(i, k)].dp, tiles[(j, k)].dp, t.dp)
            else:
                t.sp = kernels.gemm(tiles[(i, k)].sp, tiles[(j, k)].sp, t.sp)

    deps = _plan(p, frozenset(tiles.keys()))
    rows = _tile_rows(matrix.n, nb, p)
    flops = FlopCount()
    for task in deps:
        d, s = _flops_of(task, rows, thick)
        flops.dp += d
        flops.sp += s

    _Runtime(deps, execute).run(threads)
    return CholeskyFactor(matrix.n, nb, p, policy, tiles, flops)


# ---------------------------------------------------------------------------
# operations on the factor (all FP64)
# ---------------------------------------------------------------------------

def solve(factor, rhs):
    """Solve (L L^T) x = rhs using the tile factor; rhs is (n,) or (n, m)."""
    x = np.array(rhs, dtype=np.float64, copy=True)
    vec = x.ndim == 1
    if vec:
        x = x[:, None]
    if x.shape[0] != factor.n:
        raise ValueError(f"rhs has {x.shape[0]} rows, factor has {factor.n}")
    p, s, tiles = factor.p, factor.slice_of, factor.tiles
    for i in range(p):
        xi = x[s(i)]
        for j in range(i):
            t = tiles.get((i, j))
            if t is not None:
                xi -= t.dp @ x[s(j)]
        x[s(i)] = solve_triangular(tiles[(i, i)].dp, xi, lower=True)
    for i in range(p - 1, -1, -1):
        xi = x[s(i)]
        for j in range(i + 1, p):
            t = tiles.get((j, i))
            if t is not None:
                xi -= t.dp.T @ x[s(j)]
        x[s(i)] = solve_triangular(tiles[(i, i)].dp, xi, lower=True, trans="T")
    return x[:, 0] if vec else x


def logdet(factor):
    """log det of the factored matrix: twice the sum of log pivot entries."""
    total = 0.0
    for k in range(factor.p):
        total += float(np.sum(np.log(np.diagonal(factor.tiles[(k, k)].dp))))
    return 2.0 * total


def matvec_lower(factor, v):
    """Apply the lower factor: returns L @ v."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (factor.n,):
        raise ValueError(f"vector has shape {v.shape}, expected ({factor.n},)")
    out = np.zeros(factor.n)
    p, s, tiles = factor.p, factor.slice_of, factor.tiles
    for i in range(p):
        acc = np.tril(tiles[(i, i)].dp) @ v[s(i)]
        for j in range(i):
            t = tiles.get((i, j))
            if t is not None:
                acc += t.dp @ v[s(j)]
        out[s(i)] = acc
    return out


def reconstruction_error(factor, reference):
    """Frobenius norm of (reference - L L^T) over the symmetric extent.

    `reference` must be a full-band FP64 tile matrix holding the target
    values; tiles absent from the factor count as zero blocks of L.
    """
    total = 0.0
    p, tiles = factor.p, factor.tiles
    for i in range(p):
        for j in range(i + 1):
            acc = -np.asarray(reference.tile(i, j).dp, dtype=np.float64)
            for k in range(j + 1):
                a = tiles.get((i, k))
                b = tiles.get((j, k))
                if a is None or b is None:
                    continue
                left = np.tril(a.dp) if i == k else a.dp
                right = np.tril(b.dp) if j == k else b.dp
                acc += left @ right.T
            if i == j:
                strict = np.tril(acc, -1)
                diag = np.diagonal(acc)
                total += 2.0 * float(np.sum(strict * strict))
                total += float(np.sum(diag * diag))
            else:
                total += 2.0 * float(np.sum(acc * acc))
    return float(np.sqrt(total))
