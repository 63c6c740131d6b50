"""Tile-grid storage for symmetric covariance matrices.

Only the lower triangle of the tile grid is stored. Each tile is tagged by
precision: tiles within diag_thick of the diagonal ("band") hold FP64
payloads; off-band tiles hold FP32 payloads under the MP policy and are
structurally absent (zero) under the DST policy. Edge tiles are ragged,
never padded, so diagonals stay meaningful for log-determinants.
"""

import math
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .covmath import matern_array, pairwise_distance


class PrecisionOverflowError(ValueError):
    """FP64 payload magnitude exceeds FP32 range during narrowing."""


class Mode(Enum):
    DP = "dp"
    MP = "mp"
    DST = "dst"


_F32_MAX = float(np.finfo(np.float32).max)


def percent_to_thickness(dp_percent, p):
    """Map a percentage of FP64 tile columns to a band thickness.

    t = max(1, round(p * dp_percent / 100)) with round-half-up ties, so the
    mapping is monotone in dp_percent. dp_percent must lie in (0, 100].
    """
    if not (0.0 < dp_percent <= 100.0):
        raise ValueError(f"dp_percent must be in (0, 100], got {dp_percent}")
    if p < 1:
        raise ValueError(f"need p >= 1, got {p}")
    return max(1, int(math.floor(p * dp_percent / 100.0 + 0.5)))


@dataclass(frozen=True)
class PrecisionPolicy:
    """Factorization precision layout: mode plus resolved band thickness.

    diag_thick is None until resolved against a tile-grid order p; DP mode
    always resolves to the full band. dp_percent is carried only so outputs
    can echo the originating request.
    """

    mode: Mode
    diag_thick: int = None
    dp_percent: float = None

    @classmethod
    def dp(cls):
        return cls(Mode.DP)

    @classmethod
    def mp(cls, diag_thick=None, dp_percent=None):
        return cls(Mode.MP, diag_thick, dp_percent)

    @classmethod
    def dst(cls, diag_thick=None, dp_percent=None):
        return cls(Mode.DST, diag_thick, dp_percent)

    def resolve(self, p):
        """Concrete policy for a p x p tile grid (diag_thick filled in)."""
        if self.mode is Mode.DP:
            return PrecisionPolicy(Mode.DP, p, self.dp_percent)
        if self.diag_thick is not None:
            t = int(self.diag_thick)
            if not (1 <= t <= p):
                raise ValueError(f"diag_thick must be in [1, {p}], got {t}")
            return PrecisionPolicy(self.mode, t, self.dp_percent)
        if self.dp_percent is not None:
            return PrecisionPolicy(self.mode, percent_to_thickness(self.dp_percent, p),
                                   self.dp_percent)
        raise ValueError("policy needs diag_thick or dp_percent to resolve")

    def label(self):
        if self.mode is Mode.DP:
            return "dp"
        pct = f"{self.dp_percent:g}" if self.dp_percent is not None else f"t{self.diag_thick}"
        return f"{self.mode.value}:{pct}"


def band_member(i, j, policy):
    """True when tile (i, j) lies inside the FP64 band."""
    if policy.mode is Mode.DP:
        return True
    return abs(i - j) < policy.diag_thick


# ---------------------------------------------------------------------------
# precision conversion
# ---------------------------------------------------------------------------

def tile_to_sp(block, transpose=False):
    """Narrow FP64 to FP32, optionally transposing (mirror-layout style).

    Raises PrecisionOverflowError when a finite FP64 value does not fit in
    FP32 range; narrowing must never silently produce infinities.
    """
    src = block.T if transpose else block
    with np.errstate(over="ignore"):
        out = np.asfortranarray(src, dtype=np.float32)
    bad = np.isfinite(src) & ~np.isfinite(out)
    if bad.any():
        raise PrecisionOverflowError(
            f"{int(bad.sum())} value(s) exceed FP32 range during narrowing")
    return out


def tile_to_dp(block, transpose=False):
    """Widen FP32 to FP64 (exact), optionally transposing."""
    src = block.T if transpose else block
    return np.asfortranarray(src, dtype=np.float64)


# ---------------------------------------------------------------------------
# tile matrix
# ---------------------------------------------------------------------------

class Tile:
    """One tile payload: FP64 slot, FP32 slot, or both."""

    __slots__ = ("dp", "sp")

    def __init__(self, dp=None, sp=None):
        self.dp = dp
        self.sp = sp


class TileMatrix:
    """Lower-triangle tile grid of a symmetric n x n matrix."""

    def __init__(self, n, nb, policy, tiles=None):
        if n < 1:
            raise ValueError(f"need n >= 1, got {n}")
        if nb < 1:
            raise ValueError(f"need nb >= 1, got {nb}")
        self.n = int(n)
        self.nb = int(nb)
        self.p = -(-self.n // self.nb)
        self.policy = policy.resolve(self.p)
        self.tiles = tiles if tiles is not None else {}
        self.duplicate_locations = False

    def rows_of(self, i):
        """Height of tile row i (ragged at the edge)."""
        return min(self.nb, self.n - i * self.nb)

    def slice_of(self, i):
        return slice(i * self.nb, i * self.nb + self.rows_of(i))

    def band(self, i, j):
        return band_member(i, j, self.policy)

    def tile(self, i, j):
        return self.tiles.get((i, j))

    def to_dense(self):
        """Full symmetric FP64 reconstruction (absent tiles read as zero)."""
        out = np.zeros((self.n, self.n))
        for (i, j), t in self.tiles.items():
            block = t.dp if t.dp is not None else tile_to_dp(t.sp)
            si, sj = self.slice_of(i), self.slice_of(j)
            if i == j:
                low = np.tril(block)
                out[si, sj] = low + np.tril(block, -1).T
            else:
                out[si, sj] = block
                out[sj, si] = block.T
        return out

    def dump_csv(self, path):
        """Dense CSV dump for oracle comparison."""
        dense = self.to_dense()
        with open(path, "w", newline="") as fh:
            for row in dense:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")

    @classmethod
    def from_dense(cls, a, nb, policy):
        """Tile a dense symmetric matrix under the policy (lower triangle read)."""
        a = np.asarray(a, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"need a square matrix, got {a.shape}")
        m = cls(a.shape[0], nb, policy)
        for i in range(m.p):
            si = m.slice_of(i)
            for j in range(i + 1):
                sj = m.slice_of(j)
                block = a[si, sj]
                if m.band(i, j):
                    m.tiles[(i, j)] = Tile(dp=np.asfortranarray(block))
                elif m.policy.mode is Mode.MP:
                    m.tiles[(i, j)] = Tile(sp=tile_to_sp(block))
                # DST off-band tiles are implicit zeros
        return m


# ---------------------------------------------------------------------------
# covariance assembly
# ---------------------------------------------------------------------------

class TileAssembler:
    """Assembles Matern covariance tiles for one dataset and tile size.

    Distance blocks are computed once and reused across parameter values,
    which is what the likelihood optimizer iterates over.
    """

    def __init__(self, dataset, nb):
        self.dataset = dataset
        self.nb = int(nb)
        self.n = dataset.n
        self.p = -(-self.n // self.nb)
        locs = dataset.locations
        self._dist = {}
        dup = False
        for i in range(self.p):
            si = slice(i * self.nb, min(self.n, (i + 1) * self.nb))
            for j in range(i + 1):
                sj = slice(j * self.nb, min(self.n, (j + 1) * self.nb))
                d = pairwise_distance(locs[si], locs[sj], dataset.metric)
                if i == j:
                    zero_off_diag = (d == 0.0).sum() > d.shape[0]
                    dup = dup or bool(zero_off_diag)
                else:
                    dup = dup or bool((d == 0.0).any())
                self._dist[(i, j)] = d
        self.duplicate_locations = dup
        if dup:
            warnings.warn("dataset contains duplicate locations; the covariance "
                          "is singular", RuntimeWarning, stacklevel=2)

    def assemble(self, params, policy):
        m = TileMatrix(self.n, self.nb, policy)
        m.duplicate_locations = self.duplicate_locations
        mode = m.policy.mode
        for (i, j), d in self._dist.items():
            block = matern_array(d, params)
            if m.band(i, j):
                m.tiles[(i, j)] = Tile(dp=np.asfortranarray(block))
            elif mode is Mode.MP:
                m.tiles[(i, j)] = Tile(sp=tile_to_sp(block))
        return m


def assemble_covariance(dataset, params, nb, policy):
    """One-shot Matern covariance assembly under a precision policy.

    Element (a, b) of the represented matrix equals
    matern(distance(s_a, s_b)); diagonal entries are exactly the variance.
    """
    return TileAssembler(dataset, nb).assemble(params, policy)
