import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lpsvm.dual import enumerate_cells
from lpsvm.kernel_tensor import (
    DegreeMismatchError,
    RankOneDecomposition,
    SignConditionError,
    SymmetricTensor,
    ZeroRowError,
    als_decompose,
    cauchy_tensor,
    kernel_tensor,
    kernel_value,
    read_tensor,
    sample_cell,
    tensor_from_kernel,
    transform_from_decomposition,
    write_tensor,
)

from .conftest import TOY_X, TOY_Y


def lifted(r):
    """Toy points under (x1^2, 2^(1/r) x1 x2, x2^2)."""
    x1, x2 = TOY_X[:, 0], TOY_X[:, 1]
    return np.c_[x1**2, 2 ** (1 / r) * x1 * x2, x2**2]


def lift_point(z, r):
    return np.array([z[0] ** 2, 2 ** (1 / r) * z[0] * z[1], z[1] ** 2])


def random_gamma(rng, n, total):
    return np.bincount(rng.integers(0, n, total), minlength=n)


def symmetric_sum(psi, V, r):
    T = 0
    for p, v in zip(psi, V):
        out = v
        for _ in range(r - 1):
            out = np.multiply.outer(out, v)
        T = T + p * out
    return T


class TestKernelValue:
    @pytest.mark.parametrize("r", [3, 5, 7])
    def test_toy_closed_forms_odd(self, r):
        rng = np.random.default_rng(r)
        Phi = lifted(r)
        signs = {1: np.array([-1.0, 1.0, -1.0]), 2: np.array([-1.0, -1.0, -1.0])}
        for _ in range(100):
            lam = int(rng.integers(0, 2))
            gamma = random_gamma(rng, 6, r - lam)
            z = rng.normal(size=2)
            a = np.prod(TOY_X[:, 0] ** gamma) * z[0] ** lam
            b = np.prod(TOY_X[:, 1] ** gamma) * z[1] ** lam
            for k, expected in ((1, -((a - b) ** 2)), (2, -((a + b) ** 2))):
                got = kernel_value(Phi, lift_point(z, r), signs[k], gamma, lam, r)
                assert got == pytest.approx(expected, rel=1e-10, abs=1e-12)

    @pytest.mark.parametrize("r", [2, 4])
    def test_toy_closed_form_even(self, r):
        rng = np.random.default_rng(r)
        Phi = lifted(r)
        for _ in range(50):
            lam = int(rng.integers(0, 2))
            gamma = random_gamma(rng, 6, r - lam)
            z = rng.normal(size=2)
            a = np.prod(TOY_X[:, 0] ** gamma) * z[0] ** lam
            b = np.prod(TOY_X[:, 1] ** gamma) * z[1] ** lam
            got = kernel_value(Phi, lift_point(z, r), rng.choice([-1.0, 1.0], 3), gamma, lam, r)
            assert got == pytest.approx((a + b) ** 2, rel=1e-10, abs=1e-12)

    def test_gram_specialization(self, rng):
        X = rng.normal(size=(4, 3))
        for i, k in itertools.combinations_with_replacement(range(4), 2):
            gamma = np.bincount([i, k], minlength=4)
            assert kernel_value(X, np.zeros(3), None, gamma, 0, 2) == pytest.approx(X[i] @ X[k])

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10**6))
    def test_even_order_ignores_signs(self, seed):
        rng = np.random.default_rng(seed)
        X, z = rng.normal(size=(3, 4)), rng.normal(size=4)
        gamma = random_gamma(rng, 3, 3)
        a = kernel_value(X, z, rng.choice([-1.0, 1.0], 4), gamma, 1, 4)
        b = kernel_value(X, z, np.ones(4), gamma, 1, 4)
        assert a == b

    def test_degree_mismatch(self):
        with pytest.raises(DegreeMismatchError):
            kernel_value(np.ones((2, 2)), np.ones(2), None, [1, 1], 1, 2)
        with pytest.raises(DegreeMismatchError):
            kernel_value(np.ones((2, 2)), np.ones(2), None, [3, -1], 0, 2)


class TestTensorFromKernel:
    def test_permutation_symmetry(self, rng):
        X, z, signs = rng.normal(size=(3, 4)), rng.normal(size=4), rng.choice([-1.0, 1.0], 4)
        T = kernel_tensor(X, z, signs, 3)
        dense = T.to_dense()
        for idx in itertools.product(range(4), repeat=3):
            for perm in itertools.permutations(idx):
                assert T[perm] == T[idx]
                assert dense[perm] == dense[idx]

    def test_round_trip_exact(self, rng):
        X, z, signs = rng.normal(size=(3, 2)), rng.normal(size=2), np.array([1.0, -1.0])
        T = kernel_tensor(X, z, signs, 3)
        for key in T.keys():
            counts = np.bincount(key, minlength=4)
            assert T[key] == kernel_value(X, z, signs, counts[:3], int(counts[3]), 3)

    def test_gram_block(self, rng):
        X = rng.normal(size=(5, 3))
        T = kernel_tensor(X, rng.normal(size=3), None, 2).to_dense()
        np.testing.assert_allclose(T[:5, :5], X @ X.T, rtol=1e-12)

    def test_toy_entry(self):
        # cell 1 at z = (1, 1): entry (2, 2, 2) is -(0 - 1)^2
        T = kernel_tensor(lifted(3), lift_point((1.0, 1.0), 3), np.array([-1.0, 1.0, -1.0]), 3)
        assert T[(1, 1, 1)] == pytest.approx(-1.0)

    def test_custom_slice(self):
        T = tensor_from_kernel(lambda g, lam: float(g.sum() * 10 + lam), 2, 2)
        assert T[(0, 1)] == 20.0
        assert T[(2, 2)] == 2.0
        assert T[(1, 2)] == 11.0


class TestSymmetricTensor:
    def test_from_dense_rejects_asymmetric(self):
        with pytest.raises(ValueError):
            SymmetricTensor.from_dense(np.array([[1.0, 2.0], [3.0, 4.0]]))

    def test_index_range(self):
        with pytest.raises(ValueError):
            SymmetricTensor(2, 2, {(0, 2): 1.0})

    def test_frobenius_matches_dense(self, rng):
        T = kernel_tensor(rng.normal(size=(3, 2)), rng.normal(size=2), None, 3)
        assert T.frobenius() == pytest.approx(np.linalg.norm(T.to_dense()))

    def test_text_round_trip(self, rng):
        T = kernel_tensor(rng.normal(size=(2, 2)), rng.normal(size=2), None, 3)
        again = read_tensor(write_tensor(T))
        assert again.values == T.values

    def test_text_one_based(self):
        T = read_tensor("2 2\n1 1 4.0\n1 2 0.5\n2 2 1.0\n")
        assert T[(0, 1)] == 0.5
        assert write_tensor(T).splitlines()[1] == "1 1 4.0"

    @pytest.mark.parametrize("text", ["", "2\n", "2 2\n1 1\n", "2 2\n1 x 3\n", "2 2\n1 3 1.0\n"])
    def test_text_errors(self, text):
        with pytest.raises(ValueError):
            read_tensor(text)


class TestCauchy:
    def test_two_rows(self):
        T = cauchy_tensor(np.array([[1.0, 0.0], [0.0, 3.0]]), 2)
        np.testing.assert_allclose(T.to_dense(), [[1 / 2, 1 / 4], [1 / 4, 1 / 6]])

    def test_constant_norms(self, rng):
        U = rng.normal(size=(4, 3))
        U = 2.5 * U / np.linalg.norm(U, axis=1, keepdims=True)
        T = cauchy_tensor(U, 4)
        np.testing.assert_allclose(list(T.values.values()), 1 / (4 * 2.5))

    @pytest.mark.parametrize("seed", range(5))
    def test_matrix_is_psd(self, seed):
        rows = np.random.default_rng(seed).normal(size=(8, 3))
        T = cauchy_tensor(rows, 2)
        assert T.is_psd()
        assert np.linalg.eigvalsh(T.to_dense()).min() > -1e-12

    def test_zero_row(self):
        with pytest.raises(ZeroRowError):
            cauchy_tensor(np.array([[1.0, 1.0], [0.0, 0.0]]), 2)

    def test_odd_order(self):
        with pytest.raises(ValueError):
            cauchy_tensor(np.eye(2), 3)

    def test_other_row_norm(self):
        T = cauchy_tensor(np.array([[1.0, 1.0], [3.0, 0.0]]), 2, norm_ord=1)
        assert T[(0, 1)] == pytest.approx(1 / 5)

    def test_psd_check_rejects(self):
        assert not SymmetricTensor.from_dense(np.diag([1.0, -1.0])).is_psd()
        with pytest.raises(ValueError):
            cauchy_tensor(np.eye(2), 4).is_psd()


class TestALS:
    def test_rank_one_matrix(self):
        T = 2.0 * np.outer([1.0, 0.0], [1.0, 0.0])
        dec = als_decompose(T, 3)
        assert dec.rank == 1
        assert dec.psi[0] == pytest.approx(2.0)
        assert abs(dec.V[0] @ [1.0, 0.0]) == pytest.approx(1.0)
        assert dec.residual <= 1e-10

    @pytest.mark.parametrize("seed", range(5))
    def test_synthetic_rank_two(self, seed):
        rng = np.random.default_rng(seed)
        Q, _ = np.linalg.qr(rng.normal(size=(4, 2)))
        psi = rng.uniform(0.5, 3.0, 2) * rng.choice([-1, 1], 2)
        T = symmetric_sum(psi, Q.T, 3)
        dec = als_decompose(T, 3, restarts=10, seed=seed)
        assert dec.rank <= 2
        assert dec.residual <= 1e-8
        np.testing.assert_allclose(dec.reconstruct(), T, atol=1e-8)

    @pytest.mark.parametrize("seed", range(3))
    def test_synthetic_rank_two_nonorthogonal(self, seed):
        rng = np.random.default_rng(10 + seed)
        V = rng.normal(size=(2, 3))
        V /= np.linalg.norm(V, axis=1, keepdims=True)
        T = symmetric_sum([1.0, 2.0], V, 3)
        dec = als_decompose(T, 2, restarts=20, seed=seed)
        assert dec.residual <= 1e-8

    def test_exact_rank_one_order_three(self):
        v = np.array([0.6, 0.8, 0.0])
        dec = als_decompose(symmetric_sum([3.0], [v], 3), 2)
        assert dec.rank == 1
        assert dec.psi[0] * dec.V[0][0] ** 3 == pytest.approx(3.0 * 0.6**3)

    def test_zero_tensor(self):
        dec = als_decompose(np.zeros((3, 3, 3)), 2)
        assert dec.rank == 0
        assert dec.residual == 0.0

    def test_residual_history_nonincreasing(self, rng):
        T = kernel_tensor(rng.normal(size=(3, 2)), rng.normal(size=2), None, 3)
        dec = als_decompose(T, 1, restarts=1, max_iter=200)
        h = np.array(dec.history)
        assert np.all(np.diff(h) <= 1e-12 * max(1.0, h[0]))

    def test_deterministic(self, rng):
        T = kernel_tensor(rng.normal(size=(3, 2)), rng.normal(size=2), None, 3)
        a = als_decompose(T, 2, restarts=3, seed=7)
        b = als_decompose(T, 2, restarts=3, seed=7)
        np.testing.assert_array_equal(a.psi, b.psi)
        np.testing.assert_array_equal(a.V, b.V)

    def test_order_one_rejected(self):
        with pytest.raises(ValueError):
            als_decompose(np.ones(3), 1)


class TestTransform:
    def test_gram_matrix(self, rng):
        X = rng.normal(size=(5, 3))
        G = X @ X.T
        dec = als_decompose(G, 5, tol=1e-12)
        tr = transform_from_decomposition(dec, 2)
        assert tr.verification == "exact"
        Phi = np.vstack([tr.Phi_x, tr.Phi_z])
        np.testing.assert_allclose(Phi @ Phi.T, G, atol=1e-8)

    def test_negative_eigenvalue_rejected(self):
        dec = als_decompose(np.diag([2.0, -1.0]), 2)
        with pytest.raises(SignConditionError) as info:
            transform_from_decomposition(dec, 2)
        assert info.value.component == 1

    @pytest.mark.parametrize("seed", range(4))
    def test_even_round_trip(self, seed):
        rng = np.random.default_rng(seed)
        m, r = 4, 4
        V = rng.normal(size=(2, m))
        V /= np.linalg.norm(V, axis=1, keepdims=True)
        psi = rng.uniform(0.5, 2.0, 2)
        T = symmetric_sum(psi, V, r)
        dec = RankOneDecomposition(psi, V, 0.0, r)
        tr = transform_from_decomposition(dec, r)
        for key in itertools.combinations_with_replacement(range(m), r):
            counts = np.bincount(key, minlength=m)
            got = tr.kernel(counts[:-1], int(counts[-1]), r)
            assert got == pytest.approx(T[key], abs=1e-8)

    def test_cauchy_order_four(self, rng):
        rows = rng.uniform(0.5, 2.0, size=(3, 2))
        T = cauchy_tensor(rows, 4)
        dec = als_decompose(T, 3, restarts=10, tol=1e-9)
        tr = transform_from_decomposition(dec, 4)
        dense = T.to_dense()
        worst = 0.0
        for key in T.keys():
            counts = np.bincount(key, minlength=3)
            worst = max(worst, abs(tr.kernel(counts[:-1], int(counts[-1]), 4) - dense[key]))
        assert worst <= 10 * max(dec.residual, 1e-12)

    def test_odd_order_sign_check(self, toy_quadratic):
        # the toy kernel tensor on cell 1 carries the cell's own signs
        r = 3
        cell = enumerate_cells(toy_quadratic, r)[0]
        psi = cell.signs.copy()
        V = np.c_[toy_quadratic.X.T, np.zeros(3)]
        norms = np.linalg.norm(V, axis=1)
        dec = RankOneDecomposition(psi * norms**r, V / norms[:, None], 0.0, r)
        samples = sample_cell(cell.rows, TOY_Y, 10.0, count=100)
        samples = samples[[cell.strictly_contains(a) for a in samples]]
        assert len(samples) > 50
        tr = transform_from_decomposition(dec, r, y=TOY_Y, alpha_samples=samples)
        assert tr.verification == "sample-verified"
        # the same decomposition fails on the other cell
        other = enumerate_cells(toy_quadratic, r)[1]
        wrong = sample_cell(other.rows, TOY_Y, 10.0, count=50)
        wrong = wrong[[other.strictly_contains(a) for a in wrong]]
        with pytest.raises(SignConditionError) as info:
            transform_from_decomposition(dec, r, y=TOY_Y, alpha_samples=wrong, cell_index=1)
        assert info.value.cell == 1
        assert info.value.component == 1

    def test_odd_order_needs_samples(self):
        dec = RankOneDecomposition(np.ones(1), np.ones((1, 2)), 0.0, 3)
        with pytest.raises(ValueError):
            transform_from_decomposition(dec, 3)

    def test_order_mismatch(self):
        dec = RankOneDecomposition(np.ones(1), np.ones((1, 2)), 0.0, 3)
        with pytest.raises(DegreeMismatchError):
            transform_from_decomposition(dec, 2)


class TestSampleCell:
    def test_samples_feasible(self, toy_quadratic):
        cell = enumerate_cells(toy_quadratic, 3)[0]
        pts = sample_cell(cell.rows, TOY_Y, 2.0, count=100)
        assert len(pts) >= 100
        assert np.all(pts >= -1e-9) and np.all(pts <= 2 + 1e-9)
        np.testing.assert_allclose(pts @ TOY_Y, 0.0, atol=1e-9)
        assert np.all(pts @ cell.rows.T >= -1e-9)
