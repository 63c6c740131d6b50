"""Synthetic geospatial datasets: locations, Gaussian fields, folds, CSV io.

All randomness flows through numpy Generator objects constructed from an
integer seed at the call site; nothing touches global RNG state.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .covmath import EARTH_RADIUS_KM, DistanceMetric


class DatasetFormatError(ValueError):
    """Raised when a dataset file cannot be parsed."""


@dataclass(frozen=True)
class GeoDataset:
    """Immutable container: n locations, one observation per location."""

    locations: np.ndarray          # (n, 2) float64
    z: np.ndarray                  # (n,) float64
    metric: DistanceMetric = field(default_factory=DistanceMetric.euclidean)

    def __post_init__(self):
        locs = np.array(self.locations, dtype=np.float64)
        z = np.array(self.z, dtype=np.float64)
        if locs.ndim != 2 or locs.shape[1] != 2:
            raise ValueError(f"locations must be (n, 2), got {locs.shape}")
        if z.shape != (locs.shape[0],):
            raise ValueError("z length must match locations")
        if locs.shape[0] == 0:
            raise ValueError("dataset must contain at least one location")
        if not np.all(np.isfinite(locs)) or not np.all(np.isfinite(z)):
            raise ValueError("dataset values must be finite")
        if self.metric.kind == "great_circle" and np.any(np.abs(locs[:, 1]) > 90.0):
            raise ValueError("latitude outside [-90, 90]")
        locs.setflags(write=False)
        z.setflags(write=False)
        object.__setattr__(self, "locations", locs)
        object.__setattr__(self, "z", z)

    @property
    def n(self):
        return self.z.shape[0]

    def take(self, idx):
        """Dataset restricted to the given row indices (in the given order)."""
        idx = np.asarray(idx)
        return GeoDataset(self.locations[idx], self.z[idx], self.metric)


def derive_seed(seed, index):
    """Deterministic child seed; keeps location and value streams disjoint."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(index),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def generate_locations(n, seed=0):
    """n distinct points uniform on the open unit square, deterministic in seed."""
    if n < 1:
        raise ValueError(f"need n >= 1 locations, got {n}")
    rng = np.random.default_rng(seed)
    locs = rng.uniform(size=(n, 2))
    for _ in range(64):
        on_edge = (locs <= 0.0) | (locs >= 1.0)
        dup = _duplicate_rows(locs)
        bad = on_edge.any(axis=1) | dup
        if not bad.any():
            return locs
        locs[bad] = rng.uniform(size=(int(bad.sum()), 2))
    raise RuntimeError("could not draw distinct interior locations")


def _duplicate_rows(locs):
    order = np.lexsort((locs[:, 1], locs[:, 0]))
    srt = locs[order]
    same = np.zeros(len(locs), dtype=bool)
    eq = np.all(srt[1:] == srt[:-1], axis=1)
    same_sorted = np.zeros(len(locs), dtype=bool)
    same_sorted[1:][eq] = True          # mark repeats, keep first of each run
    same[order] = same_sorted
    return same


def generate_field(locations, params, metric=None, seed=0, nb=256):
    """Sample Z = L v at the given locations, with L the full-DP Cholesky
    factor of the Matern covariance and v a seeded standard-normal vector."""
    from . import factor as _factor
    from . import tilestore as _tilestore

    metric = metric or DistanceMetric.euclidean()
    locations = np.asarray(locations, dtype=np.float64)
    n = locations.shape[0]
    placeholder = GeoDataset(locations, np.zeros(n), metric)
    matrix = _tilestore.assemble_covariance(
        placeholder, params, nb=min(nb, n), policy=_tilestore.PrecisionPolicy.dp())
    try:
        fac = _factor.cholesky(matrix)
    except _factor.FactorizationError as exc:
        raise RuntimeError(f"covariance not positive definite: {exc}") from exc
    v = np.random.default_rng(seed).standard_normal(n)
    z = _factor.matvec_lower(fac, v)
    return GeoDataset(locations, z, metric)


# ---------------------------------------------------------------------------
# k-fold assignment
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FoldAssignment:
    k: int
    fold_of: np.ndarray            # (n,) fold index per row
    folds: tuple                   # k index arrays

    @property
    def n(self):
        return self.fold_of.shape[0]


def kfold_split(n, k, seed=0):
    """Random partition into k folds with sizes differing by at most one."""
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    if k < 2 or k > n:
        raise ValueError(f"need 2 <= k <= n, got k={k}, n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    base = n // k
    extra = n % k
    folds = []
    fold_of = np.empty(n, dtype=np.int64)
    start = 0
    for f in range(k):
        size = base + (1 if f < extra else 0)
        idx = np.sort(perm[start:start + size])
        folds.append(idx)
        fold_of[idx] = f
        start += size
    return FoldAssignment(k=k, fold_of=fold_of, folds=tuple(folds))


# ---------------------------------------------------------------------------
# CSV io
# ---------------------------------------------------------------------------

def write_dataset(dataset, path):
    """Write as CSV with header x,y,z (or lon,lat,z for great-circle data).

    Floats are written with repr() so read_dataset round-trips exactly.
    `path` may also be an open text stream.
    """
    header = "lon,lat,z" if dataset.metric.kind == "great_circle" else "x,y,z"

    def _emit(fh):
        fh.write(header + "\n")
        for (a, b), v in zip(dataset.locations, dataset.z):
            fh.write(f"{float(a)!r},{float(b)!r},{float(v)!r}\n")

    if hasattr(path, "write"):
        _emit(path)
    else:
        with open(path, "w", newline="") as fh:
            _emit(fh)


def read_dataset(path, metric=None):
    """Parse a dataset CSV; the header selects the metric unless one is given."""
    with open(path, "r") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise DatasetFormatError(f"{path}: empty file")
    header = [c.strip().lower() for c in lines[0].split(",")]
    if header == ["x", "y", "z"]:
        inferred = DistanceMetric.euclidean()
    elif header == ["lon", "lat", "z"]:
        inferred = DistanceMetric.great_circle(EARTH_RADIUS_KM)
    else:
        raise DatasetFormatError(
            f"{path}: line 1: expected header 'x,y,z' or 'lon,lat,z', got {lines[0]!r}")
    metric = metric or inferred
    rows = []
    for ln, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        parts = raw.split(",")
        if len(parts) != 3:
            raise DatasetFormatError(f"{path}: line {ln}: expected 3 columns, got {len(parts)}")
        try:
            vals = [float(p) for p in parts]
        except ValueError:
            raise DatasetFormatError(f"{path}: line {ln}: unparseable number in {raw!r}")
        if not all(math.isfinite(v) for v in vals):
            raise DatasetFormatError(f"{path}: line {ln}: non-finite value")
        rows.append(vals)
    if not rows:
        raise DatasetFormatError(f"{path}: no data rows")
    arr = np.asarray(rows)
    try:
        return GeoDataset(arr[:, :2], arr[:, 2], metric)
    except ValueError as exc:
        raise DatasetFormatError(f"{path}: {exc}")


# ---------------------------------------------------------------------------
# Morton (Z-order) sort
# ---------------------------------------------------------------------------

def _spread_bits(v):
    # interleave-ready spreading of 32-bit values into even bit positions
    v = v.astype(np.uint64)
    v = (v | (v << np.uint64(16))) & np.uint64(0x0000FFFF0000FFFF)
    v = (v | (v << np.uint64(8))) & np.uint64(0x00FF00FF00FF00FF)
    v = (v | (v << np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    v = (v | (v << np.uint64(2))) & np.uint64(0x3333333333333333)
    v = (v | (v << np.uint64(1))) & np.uint64(0x5555555555555555)
    return v


def morton_keys(locations):
    """Z-order keys after normalizing each coordinate to its bounding box."""
    locs = np.asarray(locations, dtype=np.float64)
    keys = []
    quant = []
    for dim in range(2):
        col = locs[:, dim]
        lo, hi = float(col.min()), float(col.max())
        span = hi - lo
        if span == 0.0:
            q = np.zeros(len(col), dtype=np.uint64)
        else:
            scaled = (col - lo) / span * float(2 ** 21 - 1)
            q = np.minimum(scaled.astype(np.uint64), np.uint64(2 ** 21 - 1))
        quant.append(q)
    return _spread_bits(quant[0]) | (_spread_bits(quant[1]) << np.uint64(1))


def morton_sort(dataset):
    """Dataset reordered along the Z-order curve; returns (sorted, permutation).

    Ordering concentrates spatial correlation near the diagonal of the
    assembled covariance, which is what makes narrow diagonal bands useful.
    The permutation satisfies sorted.z == dataset.z[perm].
    """
    keys = morton_keys(dataset.locations)
    perm = np.argsort(keys, kind="stable")
    return dataset.take(perm), perm
