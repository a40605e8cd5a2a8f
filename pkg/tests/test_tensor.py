import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import rel_err
from symtuck.errors import AsymmetricTensorError, InvalidOrderError, ShapeError
from symtuck.explicit import random_stiefel
from symtuck.tensor import (
    SymTensor,
    elementwise_pow,
    inner,
    inner_all_but_first,
    matricize,
    multi_mode_product,
    norm,
    random_symmetric,
    sym_outer,
    symmetrize_matrix,
    tucker_product,
)


def brute_tucker(a, Y):
    d, n, m = a.ndim, Y.shape[0], Y.shape[1]
    out = np.zeros((m,) * d)
    for i in itertools.product(range(m), repeat=d):
        for j in itertools.product(range(n), repeat=d):
            out[i] += a[j] * np.prod([Y[j[k], i[k]] for k in range(d)])
    return out


class TestSymTensor:
    def test_symmetrizes_small_orders(self, rng):
        X = SymTensor(rng.standard_normal((3, 3, 3)))
        assert X.is_symmetric()
        assert np.allclose(X.array, np.transpose(X.array, (2, 0, 1)))

    def test_rejects_asymmetric_high_order(self, rng):
        with pytest.raises(AsymmetricTensorError):
            SymTensor(rng.standard_normal((2,) * 5))

    def test_accepts_symmetric_high_order(self):
        X = SymTensor(sym_outer([1.0, -2.0], 5).array)
        assert X.order == 5 and X.dim == 2

    def test_order_and_shape_errors(self):
        with pytest.raises(InvalidOrderError):
            SymTensor(np.ones(3))
        with pytest.raises(ShapeError):
            SymTensor(np.ones((2, 3)))

    def test_immutable(self, rng):
        X = random_symmetric(3, 2, rng)
        with pytest.raises(ValueError):
            X.array[0, 0, 0] = 1.0

    def test_entries_first_index_fastest(self):
        a = np.zeros((2, 2))
        a[1, 0] = a[0, 1] = 5.0
        X = SymTensor(a)
        assert X.entries[1] == 5.0
        assert SymTensor.from_entries(X.entries, 2, 2).array[1, 0] == 5.0

    def test_sampled_symmetry_check_on_large_tensor(self):
        # 32**4 > 1e6 entries: the sampled branch is used.
        X = sym_outer(np.linspace(-1, 1, 32), 4)
        assert X.is_symmetric()
        noisy = SymTensor._wrap(X.array + np.random.default_rng(0).standard_normal(X.array.shape))
        assert not noisy.is_symmetric()


class TestSymOuter:
    def test_basis_vector(self):
        X = sym_outer([1.0, 0.0, 0.0], 3)
        expected = np.zeros((3, 3, 3))
        expected[0, 0, 0] = 1.0
        assert np.array_equal(X.array, expected)

    def test_entries(self):
        X = sym_outer([1.0, 2.0], 3)
        assert X[1, 1, 1] == 8.0
        assert X[0, 1, 1] == 4.0

    def test_norm(self):
        assert norm(sym_outer([1.0, 2.0], 3)) == pytest.approx(5**1.5, rel=1e-14)
        assert norm(sym_outer([1.0, 2.0], 3)) == pytest.approx(11.18034, abs=1e-5)

    def test_invalid_order(self):
        with pytest.raises(InvalidOrderError):
            sym_outer([1.0], 1)


class TestTuckerProduct:
    def test_identity(self, rng):
        X = random_symmetric(3, 4, rng)
        assert np.allclose(tucker_product(X, np.eye(4)).array, X.array, atol=1e-15)

    def test_outer_power(self, rng):
        x, Y = rng.standard_normal(4), rng.standard_normal((4, 2))
        assert rel_err(tucker_product(sym_outer(x, 3), Y).array, sym_outer(Y.T @ x, 3).array) < 1e-13

    def test_brute_force(self, rng):
        X, Y = random_symmetric(3, 3, rng), rng.standard_normal((3, 2))
        out = tucker_product(X, Y)
        assert out.dim == 2 and out.order == 3
        assert rel_err(out.array, brute_tucker(X.array, Y)) < 1e-13
        assert out.is_symmetric()

    def test_row_mismatch(self, rng):
        with pytest.raises(ShapeError):
            tucker_product(random_symmetric(3, 3, rng), np.ones((2, 2)))

    def test_mixed_multipliers_with_identity(self, rng):
        X, Q = random_symmetric(3, 3, rng), rng.standard_normal((3, 2))
        got = multi_mode_product(X, [None, Q, Q])
        assert got.shape == (3, 2, 2)
        assert rel_err(got, np.einsum("abc,bj,ck->ajk", X.array, Q, Q)) < 1e-13


class TestMatricize:
    def test_order_two(self, rng):
        x = rng.standard_normal(4)
        assert np.allclose(matricize(sym_outer(x, 2)), np.outer(x, x))

    def test_column_convention(self):
        a = np.arange(8.0).reshape((2, 2, 2))
        # 1-based entry (2,1,2) -> row 2, column 3.
        assert matricize(a)[1, 2] == a[1, 0, 1]

    def test_gram_psd(self, rng):
        U = matricize(random_symmetric(3, 4, rng))
        G = U @ U.T
        assert np.allclose(G, G.T)
        assert np.linalg.eigvalsh(G).min() > -1e-10


class TestInner:
    def test_outer_powers(self, rng):
        x, y = rng.standard_normal(3), rng.standard_normal(3)
        for d in (2, 3, 4):
            assert inner(sym_outer(x, d), sym_outer(y, d)) == pytest.approx(np.dot(x, y) ** d, rel=1e-12)

    def test_zero(self, rng):
        assert inner(random_symmetric(3, 3, rng), SymTensor.zeros(3, 3)) == 0.0

    def test_loop_oracle(self, rng):
        X, Y = random_symmetric(3, 3, rng), random_symmetric(3, 3, rng)
        total = sum(X[i] * Y[i] for i in itertools.product(range(3), repeat=3))
        assert inner(X, Y) == pytest.approx(total, rel=1e-13)

    def test_shape_mismatch(self, rng):
        with pytest.raises(ShapeError):
            inner(random_symmetric(3, 3, rng), random_symmetric(3, 2, rng))


class TestInnerAllButFirst:
    def test_outer_identity(self, rng):
        z, x, y = rng.standard_normal(3), rng.standard_normal(4), rng.standard_normal(4)
        for d in (2, 3, 4):
            xt = sym_outer(x, d - 1).array if d > 2 else x
            left = np.multiply.outer(z, xt)
            got = inner_all_but_first(left, sym_outer(y, d))
            assert rel_err(got, np.dot(x, y) ** (d - 1) * np.outer(z, y)) < 1e-12

    def test_matrices(self, rng):
        A, B = rng.standard_normal((3, 4)), rng.standard_normal((2, 4))
        assert np.allclose(inner_all_but_first(A, B), A @ B.T)

    def test_loop_oracle(self, rng):
        A, B = rng.standard_normal((2, 3, 3)), rng.standard_normal((4, 3, 3))
        oracle = np.array([[np.sum(A[i] * B[j]) for j in range(4)] for i in range(2)])
        assert rel_err(inner_all_but_first(A, B), oracle) < 1e-13

    def test_symmetric_inputs_match_unfoldings(self, rng):
        X, Y = random_symmetric(3, 3, rng), random_symmetric(3, 3, rng)
        assert rel_err(inner_all_but_first(X, Y), matricize(X) @ matricize(Y).T) < 1e-13

    def test_trailing_mismatch(self, rng):
        with pytest.raises(ShapeError):
            inner_all_but_first(np.ones((2, 3)), np.ones((2, 4)))


class TestMatrixHelpers:
    def test_pow(self, rng):
        M = rng.standard_normal((3, 3))
        assert np.array_equal(elementwise_pow(M, 1), M)
        assert np.array_equal(elementwise_pow([[2, -1], [0, 3]], 2), [[4, 1], [0, 9]])
        loop = np.array([[M[i, j] ** 3 for j in range(3)] for i in range(3)])
        assert np.allclose(elementwise_pow(M, 3), loop, rtol=1e-15)
        assert np.array_equal(elementwise_pow(M, 0), np.ones((3, 3)))
        with pytest.raises(ValueError):
            elementwise_pow(M, -1)

    def test_symmetrize(self, rng):
        S = symmetrize_matrix(rng.standard_normal((3, 3)))
        assert np.array_equal(symmetrize_matrix(S), S)
        assert np.array_equal(symmetrize_matrix([[0, 2], [0, 0]]), [[0, 1], [1, 0]])
        assert np.linalg.norm(S - S.T) == 0
        with pytest.raises(ShapeError):
            symmetrize_matrix(np.ones((2, 3)))


orders = st.integers(2, 4)
dims = st.integers(1, 4)
seeds = st.integers(0, 2**32 - 1)


@given(orders, dims, seeds)
def test_projection_contracts_norm(d, n, seed):
    rng = np.random.default_rng(seed)
    X = random_symmetric(d, n, rng)
    Q = random_stiefel(n, rng.integers(1, n + 1), rng)
    assert norm(tucker_product(X, Q)) <= norm(X) * (1 + 1e-12)


@given(orders, dims, seeds)
def test_tucker_associativity(d, n, seed):
    rng = np.random.default_rng(seed)
    X = random_symmetric(d, n, rng)
    Y, Z = rng.standard_normal((n, 3)), rng.standard_normal((3, 2))
    lhs = tucker_product(tucker_product(X, Y), Z).array
    assert rel_err(lhs, tucker_product(X, Y @ Z).array) < 1e-11


@given(orders, dims, seeds)
def test_inner_matches_unfolding(d, n, seed):
    rng = np.random.default_rng(seed)
    X, Y = random_symmetric(d, n, rng), random_symmetric(d, n, rng)
    via = float(np.sum(matricize(X) * matricize(Y)))
    assert abs(inner(X, Y) - via) <= 1e-12 * max(1.0, norm(X) * norm(Y))


@given(orders, dims, seeds)
def test_inner_all_but_first_self_psd(d, n, seed):
    X = random_symmetric(d, n, np.random.default_rng(seed))
    G = inner_all_but_first(X, X)
    assert np.allclose(G, G.T)
    assert np.linalg.eigvalsh(G).min() >= -1e-10 * max(1.0, norm(X) ** 2)
