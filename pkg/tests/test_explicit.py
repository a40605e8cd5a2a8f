import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import rel_err
from symtuck.errors import NotOrthonormalError, RetractionError, ShapeError
from symtuck.explicit import (
    as_stiefel,
    default_step,
    euclidean_gradient_explicit,
    hoevd_explicit,
    objective_explicit,
    pgd_explicit,
    qr_retract,
    random_stiefel,
    reconstruction_error,
)
from symtuck.manifold import subspace_error
from symtuck.tensor import SymTensor, norm, random_symmetric, sym_outer, tucker_product


def e(i, n):
    v = np.zeros(n)
    v[i] = 1.0
    return v


class TestObjective:
    def test_full_basis(self, rng):
        X = random_symmetric(3, 4, rng)
        assert objective_explicit(X, np.eye(4)) == pytest.approx(norm(X) ** 2, rel=1e-13)

    def test_outer_power(self, rng):
        assert objective_explicit(sym_outer(e(0, 3), 3), e(0, 3)[:, None]) == 1.0
        x, Q = rng.standard_normal(4), random_stiefel(4, 2, rng)
        assert objective_explicit(sym_outer(x, 3), Q) == pytest.approx(np.linalg.norm(Q.T @ x) ** 6)

    def test_brute_force(self, rng):
        X, Q = random_symmetric(3, 4, rng), random_stiefel(4, 2, rng)
        assert objective_explicit(X, Q) == pytest.approx(norm(tucker_product(X, Q)) ** 2, rel=1e-13)

    def test_shape_mismatch(self, rng):
        with pytest.raises(ShapeError):
            objective_explicit(random_symmetric(3, 4, rng), np.eye(3))


class TestGradient:
    def test_hand_value(self):
        X = SymTensor(np.diag([2.0, 1.0]))
        G = euclidean_gradient_explicit(X, e(0, 2)[:, None])
        assert np.allclose(G, [[16.0], [0.0]])

    def test_order_two_closed_form(self, rng):
        A = rng.standard_normal((5, 5))
        A = A + A.T
        Q = random_stiefel(5, 2, rng)
        assert rel_err(euclidean_gradient_explicit(SymTensor(A), Q), 4 * A @ Q @ (Q.T @ A @ Q)) < 1e-13

    @pytest.mark.parametrize("d", [2, 3, 4])
    def test_central_differences(self, rng, d):
        X, Q = random_symmetric(d, 4, rng), random_stiefel(4, 2, rng)
        D = rng.standard_normal((4, 2))
        h = 1e-5
        fd = (objective_explicit(X, Q + h * D) - objective_explicit(X, Q - h * D)) / (2 * h)
        assert abs(np.sum(euclidean_gradient_explicit(X, Q) * D) - fd) <= 1e-5

    def test_zero_tensor(self, rng):
        assert not np.any(euclidean_gradient_explicit(SymTensor.zeros(3, 4), random_stiefel(4, 2, rng)))


class TestRetraction:
    def test_fixed_point(self, rng):
        Q = qr_retract(rng.standard_normal((5, 3)))
        assert np.allclose(qr_retract(Q), Q, atol=1e-15)

    def test_normalization(self):
        assert np.allclose(qr_retract([[2.0], [0.0]]), [[1.0], [0.0]])

    def test_reconstruct(self, rng):
        M = rng.standard_normal((6, 3))
        Q = qr_retract(M)
        R = Q.T @ M
        assert np.linalg.norm(Q.T @ Q - np.eye(3)) <= 1e-12
        assert np.linalg.norm(Q @ R - M) <= 1e-12 * np.linalg.norm(M)
        assert np.all(np.diag(R) > 0)

    def test_rank_deficient(self):
        with pytest.raises(RetractionError):
            qr_retract(np.ones((3, 2)))
        with pytest.raises(RetractionError):
            qr_retract([[np.nan], [1.0]])

    def test_as_stiefel(self, rng):
        Q = random_stiefel(5, 2, rng)
        assert as_stiefel(Q) is not None
        repaired = as_stiefel(Q * (1 + 1e-8))
        assert np.linalg.norm(repaired.T @ repaired - np.eye(2)) <= 1e-12
        with pytest.raises(NotOrthonormalError):
            as_stiefel(2 * Q)


class TestPgd:
    def test_saddle_fixed_point(self):
        X = sym_outer(e(0, 3), 3)
        Q0 = e(1, 3)[:, None]
        Q, trace = pgd_explicit(X, Q0, step=0.1, iters=5, tol=0)
        assert np.array_equal(Q, Q0)
        assert len(trace) == 5

    def test_eckart_young_indefinite(self, rng):
        A = rng.standard_normal((6, 6))
        A = A + A.T
        lam = np.linalg.eigvalsh(A)
        best = np.sort(lam**2)[::-1][:2].sum()
        # Start near the global maximizer: indefinite matrices also have
        # spurious local maxima mixing positive and negative eigenvalues.
        X = SymTensor(A)
        Q0 = qr_retract(hoevd_explicit(X, 2) + 0.05 * rng.standard_normal((6, 2)))
        Q, _ = pgd_explicit(X, Q0, iters=20000, tol=1e-12)
        assert objective_explicit(X, Q) == pytest.approx(best, rel=1e-8)

    def test_monotone_small_step(self, rng):
        X = random_symmetric(3, 5, rng)
        Q0 = random_stiefel(5, 2, rng)
        F0 = objective_explicit(X, Q0)
        _, trace = pgd_explicit(X, Q0, step=1e-3 / norm(X) ** 2, iters=200, tol=0)
        F = np.concatenate([[F0], trace.column("objective")])
        assert F[-1] >= F0 - 1e-12
        assert np.all(np.diff(F) >= -1e-12)

    def test_trace_records_every_iteration(self, rng):
        X = random_symmetric(3, 4, rng)
        _, trace = pgd_explicit(X, random_stiefel(4, 2, rng), iters=7, tol=0)
        assert len(trace) == 7
        assert [r.iter for r in trace.records] == list(range(1, 8))
        assert "relgrad" in trace.to_jsonl().splitlines()[0]

    def test_early_stop(self, rng):
        A = rng.standard_normal((4, 4))
        X = SymTensor(A @ A.T)
        _, trace = pgd_explicit(X, random_stiefel(4, 1, rng), iters=5000, tol=1e-6)
        assert len(trace) < 5000
        assert trace.records[-1].relgrad < 1e-6

    def test_rejects_bad_step(self, rng):
        X = random_symmetric(3, 3, rng)
        with pytest.raises(ValueError):
            pgd_explicit(X, random_stiefel(3, 1, rng), step=-1.0)

    def test_default_step(self, rng):
        X = random_symmetric(3, 3, rng)
        assert default_step(X) == pytest.approx(0.5 / (6 * norm(X) ** 2))


class TestHoevd:
    def test_rank_one(self, rng):
        x = rng.standard_normal(5)
        Q = hoevd_explicit(sym_outer(x, 3), 1)
        assert subspace_error(Q, (x / np.linalg.norm(x))[:, None]) <= 1e-10

    def test_order_two_magnitude_order(self, rng):
        A = rng.standard_normal((5, 5))
        A = A + A.T
        lam, V = np.linalg.eigh(A)
        idx = np.argsort(-np.abs(lam))[:2]
        assert subspace_error(hoevd_explicit(SymTensor(A), 2), V[:, idx]) <= 1e-10

    def test_orthonormal(self, rng):
        Q = hoevd_explicit(random_symmetric(3, 5, rng), 3)
        assert np.linalg.norm(Q.T @ Q - np.eye(3)) <= 1e-12

    def test_rank_out_of_range(self, rng):
        with pytest.raises(ShapeError):
            hoevd_explicit(random_symmetric(3, 3, rng), 4)


seeds = st.integers(0, 2**32 - 1)


@given(st.integers(2, 4), seeds)
def test_rotation_invariance(d, seed):
    rng = np.random.default_rng(seed)
    X, Q = random_symmetric(d, 4, rng), random_stiefel(4, 2, rng)
    O = np.linalg.qr(rng.standard_normal((2, 2)))[0]
    assert objective_explicit(X, Q @ O) == pytest.approx(objective_explicit(X, Q), rel=1e-12)


@given(st.integers(2, 4), seeds)
def test_reconstruction_identity(d, seed):
    rng = np.random.default_rng(seed)
    X, Q = random_symmetric(d, 4, rng), random_stiefel(4, 2, rng)
    lhs = reconstruction_error(X, Q) ** 2
    assert abs(lhs - (norm(X) ** 2 - objective_explicit(X, Q))) <= 1e-10 * max(1.0, norm(X) ** 2)
