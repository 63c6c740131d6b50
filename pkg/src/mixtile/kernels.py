"""Tile kernels: potrf, trsm, syrk, gemm.

Thin wrappers over LAPACK/BLAS with the tile contracts enforced: operations
run in place on Fortran-ordered payloads, touch only the documented
triangle, and are bitwise deterministic for fixed inputs. Precision follows
the payload dtype; mixing dtypes in one call is an error.
"""

import numpy as np
from scipy.linalg import blas as _blas
from scipy.linalg import lapack as _lapack


class NotPositiveDefiniteError(ArithmeticError):
    """Cholesky hit a non-positive pivot; index is 0-based within the tile."""

    def __init__(self, index, message=None):
        self.index = int(index)
        super().__init__(message or f"matrix not positive definite at pivot {index}")


class SingularTileError(ArithmeticError):
    """Triangular solve against a factor with a zero diagonal entry."""


_POTRF = {np.dtype(np.float64): _lapack.dpotrf, np.dtype(np.float32): _lapack.spotrf}
_TRSM = {np.dtype(np.float64): _blas.dtrsm, np.dtype(np.float32): _blas.strsm}
_GEMM = {np.dtype(np.float64): _blas.dgemm, np.dtype(np.float32): _blas.sgemm}


def _routine(table, dtype, op):
    try:
        return table[dtype]
    except KeyError:
        raise ValueError(f"{op} supports float32/float64 payloads, got {dtype}")


def potrf(a):
    """In-place lower Cholesky of a square tile; strict upper left untouched."""
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"potrf needs a square tile, got {a.shape}")
    routine = _routine(_POTRF, a.dtype, "potrf")
    c, info = routine(a, lower=1, clean=0, overwrite_a=1)
    if info > 0:
        raise NotPositiveDefiniteError(info - 1)
    if info < 0:
        raise ValueError(f"potrf: bad argument {-info}")
    return c


def trsm(l, b):
    """Solve in place: b <- b @ inv(l)^T with l lower triangular."""
    if l.shape[0] != l.shape[1] or b.shape[1] != l.shape[0]:
        raise ValueError(f"trsm shapes incompatible: {b.shape} vs {l.shape}")
    if l.dtype != b.dtype:
        raise ValueError(f"trsm dtype mismatch: {l.dtype} vs {b.dtype}")
    if np.any(np.diagonal(l) == 0.0):
        raise SingularTileError("zero diagonal entry in triangular factor")
    routine = _routine(_TRSM, b.dtype, "trsm")
    return routine(1.0, l, b, side=1, lower=1, trans_a=1, diag=0, overwrite_b=1)


def syrk(a, c):
    """Lower-triangle update c <- c - a @ a^T; FP64 only by design."""
    if c.shape[0] != c.shape[1] or a.shape[0] != c.shape[0]:
        raise ValueError(f"syrk shapes incompatible: {a.shape} vs {c.shape}")
    if a.dtype != np.float64 or c.dtype != np.float64:
        raise ValueError("syrk runs in FP64 only")
    return _blas.dsyrk(-1.0, a, beta=1.0, c=c, trans=0, lower=1, overwrite_c=1)


def gemm(a, b, c):
    """Update c <- c - a @ b^T; all three operands share one dtype."""
    if a.shape[1] != b.shape[1] or c.shape != (a.shape[0], b.shape[0]):
        raise ValueError(f"gemm shapes incompatible: {a.shape}, {b.shape}, {c.shape}")
    if not (a.dtype == b.dtype == c.dtype):
        raise ValueError(f"gemm dtype mismatch: {a.dtype}, {b.dtype}, {c.dtype}")
    routine = _routine(_GEMM, c.dtype, "gemm")
    return routine(-1.0, a, b, beta=1.0, c=c, trans_a=0, trans_b=1, overwrite_c=1)
