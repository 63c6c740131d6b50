import math

import numpy as np
import pytest

from mixtile import kernels
from mixtile.kernels import NotPositiveDefiniteError, SingularTileError

from oracles import dense_cholesky, loop_gemm_update, loop_syrk_update


def f_order(a, dtype=np.float64):
    return np.asfortranarray(np.asarray(a, dtype=dtype))


# ---------------------------------------------------------------- potrf

def test_potrf_identity():
    a = f_order(np.eye(4))
    out = kernels.potrf(a)
    assert np.array_equal(out, np.eye(4))


def test_potrf_2x2_hand_value():
    # [[4,2],[2,3]] -> L = [[2,0],[1,sqrt(2)]]
    a = f_order([[4.0, 2.0], [2.0, 3.0]])
    out = kernels.potrf(a)
    assert out[0, 0] == 2.0
    assert out[1, 0] == 1.0
    assert abs(out[1, 1] - math.sqrt(2.0)) < 1e-15


def test_potrf_in_place_for_f_order():
    a = f_order([[4.0, 2.0], [2.0, 3.0]])
    out = kernels.potrf(a)
    assert out is a


def test_potrf_not_positive_definite_index():
    # second pivot goes negative: 1 - 2*2/1 = -3
    a = f_order([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(NotPositiveDefiniteError) as exc:
        kernels.potrf(a)
    assert exc.value.index == 1


def test_potrf_strict_upper_untouched():
    a = f_order([[4.0, 99.0], [2.0, 3.0]])
    out = kernels.potrf(a)
    assert out[0, 1] == 99.0


def test_potrf_matches_dense_oracle():
    rng = np.random.default_rng(7)
    b = rng.standard_normal((6, 6))
    a = b @ b.T + 6.0 * np.eye(6)
    expected = dense_cholesky(a.copy())
    out = kernels.potrf(f_order(a))
    assert np.allclose(np.tril(out), expected, rtol=0, atol=1e-12)


def test_potrf_float32_path():
    a = f_order([[4.0, 2.0], [2.0, 3.0]], dtype=np.float32)
    out = kernels.potrf(a)
    assert out.dtype == np.float32
    assert out[0, 0] == np.float32(2.0)


def test_potrf_rejects_nonsquare():
    with pytest.raises(ValueError):
        kernels.potrf(f_order(np.ones((2, 3))))


# ---------------------------------------------------------------- trsm

def test_trsm_identity_factor():
    b = f_order([[1.0, 2.0], [3.0, 4.0]])
    out = kernels.trsm(f_order(np.eye(2)), b)
    assert np.array_equal(out, [[1.0, 2.0], [3.0, 4.0]])


def test_trsm_against_numpy_solve():
    rng = np.random.default_rng(11)
    l = np.tril(rng.standard_normal((4, 4))) + 4.0 * np.eye(4)
    b = rng.standard_normal((3, 4))
    expected = np.linalg.solve(l, b.T).T  # b @ inv(l)^T == solve(l, b^T)^T
    out = kernels.trsm(f_order(l), f_order(b))
    assert np.allclose(out, expected, rtol=0, atol=1e-13)


def test_trsm_reproduces_cholesky_panel():
    # factor a 4x4 SPD matrix in 2x2 tiles by hand: L21 = A21 * inv(L11)^T
    rng = np.random.default_rng(13)
    b = rng.standard_normal((4, 4))
    a = b @ b.T + 4.0 * np.eye(4)
    full = dense_cholesky(a.copy())
    l11 = kernels.potrf(f_order(a[:2, :2]))
    panel = kernels.trsm(l11, f_order(a[2:, :2]))
    assert np.allclose(panel, full[2:, :2], rtol=0, atol=1e-13)


def test_trsm_zero_diagonal_raises():
    l = f_order([[1.0, 0.0], [2.0, 0.0]])
    with pytest.raises(SingularTileError):
        kernels.trsm(l, f_order(np.ones((2, 2))))


def test_trsm_dtype_mismatch():
    with pytest.raises(ValueError):
        kernels.trsm(f_order(np.eye(2)), f_order(np.ones((2, 2)), dtype=np.float32))


def test_trsm_shape_mismatch():
    with pytest.raises(ValueError):
        kernels.trsm(f_order(np.eye(2)), f_order(np.ones((2, 3))))


def test_trsm_float32_power_of_two_exact():
    # entries and pivots all powers of two: FP32 arithmetic is exact
    l = [[2.0, 0.0], [1.0, 4.0]]
    b = [[8.0, 16.0], [4.0, 32.0]]
    out64 = kernels.trsm(f_order(l), f_order(b))
    out32 = kernels.trsm(f_order(l, np.float32), f_order(b, np.float32))
    assert np.array_equal(out32.astype(np.float64), out64)


# ---------------------------------------------------------------- syrk

def test_syrk_zero_update():
    c = f_order([[3.0, 0.0], [1.0, 2.0]])
    out = kernels.syrk(f_order(np.zeros((2, 2))), c)
    assert np.array_equal(out, [[3.0, 0.0], [1.0, 2.0]])


def test_syrk_matches_loop_oracle():
    rng = np.random.default_rng(17)
    a = rng.standard_normal((3, 2))
    c = rng.standard_normal((3, 3))
    expected = loop_syrk_update(a, c.copy())
    out = kernels.syrk(f_order(a), f_order(c))
    assert np.allclose(np.tril(out), np.tril(expected), rtol=0, atol=1e-14)


def test_syrk_strict_upper_untouched():
    c = f_order([[1.0, 55.0], [1.0, 1.0]])
    out = kernels.syrk(f_order(np.ones((2, 1))), c)
    assert out[0, 1] == 55.0
    assert out[0, 0] == 0.0


def test_syrk_rejects_float32():
    with pytest.raises(ValueError):
        kernels.syrk(
            f_order(np.ones((2, 2)), np.float32), f_order(np.eye(2), np.float32)
        )


def test_syrk_shape_mismatch():
    with pytest.raises(ValueError):
        kernels.syrk(f_order(np.ones((3, 2))), f_order(np.eye(2)))


# ---------------------------------------------------------------- gemm

def test_gemm_zero_update_bitwise():
    c0 = np.arange(6.0).reshape(2, 3)
    c = f_order(c0)
    out = kernels.gemm(f_order(np.zeros((2, 2))), f_order(np.zeros((3, 2))), c)
    assert np.array_equal(out, c0)


def test_gemm_matches_loop_oracle_fp64():
    rng = np.random.default_rng(19)
    a = rng.standard_normal((3, 2))
    b = rng.standard_normal((4, 2))
    c = rng.standard_normal((3, 4))
    expected = loop_gemm_update(a, b, c.copy())
    out = kernels.gemm(f_order(a), f_order(b), f_order(c))
    assert np.allclose(out, expected, rtol=0, atol=1e-14)


def test_gemm_fp32_vs_loop_oracle():
    rng = np.random.default_rng(23)
    a = rng.standard_normal((3, 2)).astype(np.float32)
    b = rng.standard_normal((4, 2)).astype(np.float32)
    c = rng.standard_normal((3, 4)).astype(np.float32)
    expected = loop_gemm_update(a, b, c.copy())
    out = kernels.gemm(f_order(a, np.float32), f_order(b, np.float32), f_order(c, np.float32))
    assert np.allclose(out, expected, rtol=1e-5, atol=1e-6)


def test_gemm_fp32_power_of_two_exact():
    a = [[2.0, 4.0], [1.0, 8.0]]
    b = [[0.5, 2.0], [4.0, 1.0], [2.0, 2.0]]
    c = [[16.0, 8.0, 4.0], [32.0, 64.0, 2.0]]
    out64 = kernels.gemm(f_order(a), f_order(b), f_order(c))
    out32 = kernels.gemm(
        f_order(a, np.float32), f_order(b, np.float32), f_order(c, np.float32)
    )
    assert np.array_equal(out32.astype(np.float64), out64)


def test_gemm_dtype_mismatch():
    with pytest.raises(ValueError):
        kernels.gemm(
            f_order(np.ones((2, 2))),
            f_order(np.ones((2, 2)), np.float32),
            f_order(np.ones((2, 2))),
        )


def test_gemm_shape_mismatch():
    with pytest.raises(ValueError):
        kernels.gemm(f_order(np.ones((2, 2))), f_order(np.ones((3, 3))), f_order(np.ones((2, 3))))


def test_gemm_deterministic():
    rng = np.random.default_rng(29)
    a = rng.standard_normal((8, 8))
    b = rng.standard_normal((8, 8))
    c = rng.standard_normal((8, 8))
    out1 = kernels.gemm(f_order(a), f_order(b), f_order(c))
    out2 = kernels.gemm(f_order(a), f_order(b), f_order(c))
    assert np.array_equal(out1, out2)
