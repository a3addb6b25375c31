"""Dense kernels: factorizations, norms, triangular inverses."""

import numpy as np
import pytest

from fperturb import dense
from fperturb.dense import NormKind, lu_factor, qr_factor, triangular_inverse
from fperturb.errors import (
    DimensionMismatch,
    NoConvergence,
    RankDeficient,
    SingularDiagonal,
    SingularLeadingMinor,
)
from fperturb.matgen import kahan

from conftest import random_square, random_unit_lower, random_upper, seeded_rng


class TestLuFactor:
    def test_identity(self):
        f = lu_factor(np.eye(3))
        assert np.array_equal(f.l, np.eye(3))
        assert np.array_equal(f.u, np.eye(3))

    def test_hand_elimination(self):
        f = lu_factor(np.array([[4.0, 3.0], [6.0, 3.0]]))
        assert np.allclose(f.l, [[1, 0], [1.5, 1]])
        assert np.allclose(f.u, [[4, 3], [0, -1.5]])
        assert np.allclose(f.l @ f.u, [[4, 3], [6, 3]])

    def test_zero_leading_pivot(self):
        with pytest.raises(SingularLeadingMinor) as exc:
            lu_factor(np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert exc.value.k == 1

    def test_structure_invariants(self):
        for seed in range(20):
            a = random_square(7, seed, shift=3.0)
            f = lu_factor(a)
            assert np.array_equal(np.diag(f.l), np.ones(7))
            assert not np.triu(f.l, 1).any()
            assert not np.tril(f.u, -1).any()
            err = np.linalg.norm(f.l @ f.u - a) / np.linalg.norm(a)
            assert err <= 1e-12

    def test_non_square_rejected(self):
        with pytest.raises(DimensionMismatch):
            lu_factor(np.ones((2, 3)))


class TestQrFactor:
    def test_identity(self):
        f = qr_factor(np.eye(3))
        assert np.array_equal(f.q, np.eye(3))
        assert np.array_equal(f.r, np.eye(3))

    def test_single_column(self):
        f = qr_factor(np.array([[3.0], [4.0]]))
        assert np.allclose(f.q, [[0.6], [0.8]])
        assert np.allclose(f.r, [[5.0]])

    def test_triangular_input_is_exact(self):
        a = kahan(5, np.pi / 8)
        f = qr_factor(a)
        assert np.array_equal(f.q, np.eye(5))
        assert np.array_equal(f.r, a)

    def test_orthogonality_and_positive_diagonal(self):
        for seed in range(20):
            a = seeded_rng(1, seed).standard_normal((9, 6))
            f = qr_factor(a)
            assert np.linalg.norm(f.q.T @ f.q - np.eye(6)) <= 1e-12
            assert np.min(np.diag(f.r)) > 0.0
            assert np.linalg.norm(f.q @ f.r - a) <= 1e-11 * np.linalg.norm(a)

    def test_rank_deficient(self):
        a = np.ones((4, 2))
        with pytest.raises(RankDeficient):
            qr_factor(a)

    def test_wide_rejected(self):
        with pytest.raises(DimensionMismatch):
            qr_factor(np.ones((2, 3)))


class TestNorms:
    def test_trivial_values(self):
        assert dense.norm(np.eye(3), NormKind.SPECTRAL) == pytest.approx(1.0)
        assert dense.norm(np.array([[1.0, -2.0], [3.0, 4.0]]), NormKind.SUM_ENTRY) == 10.0
        assert dense.norm(np.array([[1.0, -2.0], [3.0, 4.0]]), NormKind.MAX_ENTRY) == 4.0
        assert dense.norm(np.array([[3.0, 4.0]]), NormKind.FROBENIUS) == pytest.approx(5.0)

    def test_spectral_matches_svd_oracle(self):
        for seed in range(100):
            n = int(seeded_rng(2, seed).integers(2, 21))
            a = seeded_rng(3, seed).standard_normal((n, n))
            ref = dense.svd_spectral_norm(a)
            assert dense.norm(a, NormKind.SPECTRAL) == pytest.approx(ref, rel=1e-10)

    def test_monotone_norms(self):
        for seed in range(10):
            rng = seeded_rng(4, seed)
            a = rng.standard_normal((5, 5))
            b = np.abs(a) + rng.random((5, 5))
            for kind in (NormKind.FROBENIUS, NormKind.MAX_ENTRY, NormKind.SUM_ENTRY):
                assert dense.norm(a, kind) <= dense.norm(b, kind) + 1e-14

    def test_product_norm_inequality(self):
        for seed in range(10):
            rng = seeded_rng(5, seed)
            x, y, z = (rng.standard_normal((4, 4)) for _ in range(3))
            lhs = np.linalg.norm(x @ y @ z)
            rhs = (dense.svd_spectral_norm(x) * np.linalg.norm(y)
                   * dense.svd_spectral_norm(z))
            assert lhs <= rhs * (1 + 1e-12)

    def test_abs_matrix(self):
        assert np.array_equal(dense.abs_matrix(np.array([[-1.0, 2.0]])), [[1.0, 2.0]])
        assert np.array_equal(dense.abs_matrix(np.zeros((2, 2))), np.zeros((2, 2)))
        a = random_square(6, 0)
        assert np.linalg.norm(dense.abs_matrix(a)) == pytest.approx(np.linalg.norm(a))

    def test_no_convergence_budget(self):
        a = seeded_rng(6, 0).standard_normal((12, 12))
        with pytest.raises(NoConvergence):
            dense.spectral_norm(a, max_iter=1)


class TestSmallestSingularValue:
    def test_diagonal(self):
        assert dense.smallest_singular_value(np.diag([3.0, 0.5])) == pytest.approx(0.5)
        assert dense.smallest_singular_value(np.eye(4)) == pytest.approx(1.0)

    def test_inverse_norm_oracle(self):
        # 1/sigma_min equals the spectral norm of the explicit inverse,
        # computed through the package's own power iteration.
        for seed in range(10):
            a = random_square(5, seed, shift=4.0)
            smin = dense.smallest_singular_value(a)
            ref = dense.spectral_norm(np.linalg.inv(a))
            assert 1.0 / smin == pytest.approx(ref, rel=1e-10)


class TestTriangularInverse:
    def test_identity(self):
        assert np.array_equal(triangular_inverse(np.eye(4), "upper"), np.eye(4))

    def test_diagonal(self):
        out = triangular_inverse(np.diag([2.0, 4.0]), "upper")
        assert np.allclose(out, np.diag([0.5, 0.25]))

    def test_unit_lower(self):
        out = triangular_inverse(np.array([[1.0, 0.0], [3.0, 1.0]]), "lower")
        assert np.allclose(out, [[1.0, 0.0], [-3.0, 1.0]])

    @pytest.mark.parametrize("shape", ["lower", "upper"])
    def test_reconstruction_and_structure(self, shape):
        for seed in range(10):
            t = random_upper(6, seed) if shape == "upper" else random_unit_lower(6, seed)
            inv = triangular_inverse(t, shape)
            assert np.linalg.norm(t @ inv - np.eye(6)) <= 1e-11
            assert np.allclose(inv, np.triu(inv) if shape == "upper" else np.tril(inv))
            assert np.allclose(inv, np.linalg.inv(t), atol=1e-9)

    def test_singular_diagonal(self):
        t = np.triu(np.ones((3, 3)))
        t[1, 1] = 0.0
        with pytest.raises(SingularDiagonal) as exc:
            triangular_inverse(t, "upper")
        assert exc.value.k == 2
