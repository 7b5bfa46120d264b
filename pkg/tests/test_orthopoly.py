"""Polynomial family values, certification, and addition splits."""

import numpy as np
import pytest

from deconvtest.orthopoly import (
    HARD_DEGREE_CAP, BasisInconsistencyError, DegreeOverflowError,
    DomainError, PolynomialFamilySpec, addition_split_laguerre,
    addition_split_meixner, certify_orthonormality, eval_laguerre,
    eval_laguerre_scaled, eval_meixner, eval_meixner_scaled,
    eval_shifted_legendre, laguerre_table, shifted_legendre_coefficients,
)

from .oracles import (
    exp_weight_nodes, geometric_nodes, gram_schmidt_polynomials,
    uniform01_nodes,
)


class TestEvalLaguerre:
    def test_degree_zero_is_one(self):
        assert eval_laguerre(0, 1.0, 7.3) == 1.0

    def test_degree_one(self):
        # L1(x) = 1 - x at shape 1
        assert eval_laguerre(1, 1.0, 2.0) == pytest.approx(-1.0)

    def test_degree_two_hand_unrolled(self):
        # recurrence gives L2(x) = (x^2 - 4x + 2) / 2 at shape 1
        assert eval_laguerre(2, 1.0, 0.0) == pytest.approx(1.0)
        x = 1.7
        assert eval_laguerre(2, 1.0, x) == pytest.approx((x * x - 4 * x + 2) / 2)

    def test_vectorized(self):
        x = np.array([0.0, 1.0, 2.0])
        np.testing.assert_allclose(eval_laguerre(1, 1.0, x), 1.0 - x)

    def test_degree_above_cap(self):
        with pytest.raises(DegreeOverflowError):
            eval_laguerre(HARD_DEGREE_CAP + 1, 1.0, 0.5)

    def test_negative_degree(self):
        with pytest.raises(DomainError):
            eval_laguerre(-1, 1.0, 0.5)

    def test_bad_shape(self):
        with pytest.raises(DomainError):
            eval_laguerre(2, 0.0, 0.5)


class TestEvalShiftedLegendre:
    def test_root_of_degree_one(self):
        assert eval_shifted_legendre(1, 0.5) == pytest.approx(0.0)

    def test_value_one_at_right_edge(self):
        assert eval_shifted_legendre(2, 1.0) == pytest.approx(1.0)

    def test_value_at_left_edge(self):
        # degree-2 orthogonal polynomial on [0, 1] is 6x^2 - 6x + 1
        assert eval_shifted_legendre(2, 0.0) == pytest.approx(1.0)

    def test_degree_two_matches_gram_schmidt(self):
        nodes, weights = uniform01_nodes()
        oracle = gram_schmidt_polynomials(3, nodes, weights)
        idx = 1234
        mine = eval_shifted_legendre(2, nodes[idx])
        # oracle rows are orthonormal; rescale by the known norm sqrt(5)
        assert mine == pytest.approx(oracle[2, idx] / np.sqrt(5.0), abs=1e-9)

    def test_coefficients_degree_two(self):
        np.testing.assert_allclose(shifted_legendre_coefficients(2)[2],
                                   [1.0, -6.0, 6.0], atol=1e-12)

    def test_domain_error(self):
        with pytest.raises(DomainError):
            eval_shifted_legendre(2, 1.2)
        with pytest.raises(DomainError):
            eval_shifted_legendre(2, -0.1)


class TestEvalMeixner:
    def test_degree_zero(self):
        assert eval_meixner(0, 0.5, 4) == 1.0

    def test_degree_one_seeded_form(self):
        # seeded initial condition 1 - p - x/p at x = 0
        assert eval_meixner(1, 0.5, 0) == pytest.approx(0.5)

    def test_bad_parameter(self):
        with pytest.raises(DomainError):
            eval_meixner(1, 1.5, 0)
        with pytest.raises(DomainError):
            eval_meixner(1, 0.0, 0)

    def test_certified_degree_two_matches_gram_schmidt(self, meixner_table):
        nodes, weights = geometric_nodes(0.5)
        oracle = gram_schmidt_polynomials(3, nodes, weights)
        x = 3
        mine = meixner_table.eval_normalized(np.array([float(x)]), 2)[2, 0]
        ref = oracle[2, x]
        assert abs(mine) == pytest.approx(abs(ref), rel=1e-8)


class TestCertification:
    @pytest.mark.parametrize("fixture", ["laguerre_table", "legendre_table",
                                         "meixner_table"])
    def test_gram_is_identity(self, fixture, request):
        table = request.getfixturevalue(fixture)
        assert table.gram_residual < 1e-8

    def test_laguerre_norms_are_one(self, laguerre_table):
        np.testing.assert_allclose(laguerre_table.norms, 1.0, atol=1e-12)

    def test_legendre_norms(self, legendre_table):
        n = np.arange(11)
        np.testing.assert_allclose(legendre_table.norms ** 2, 1.0 / (2 * n + 1),
                                   rtol=1e-12)

    def test_meixner_falls_back_to_standard(self, meixner_table):
        assert meixner_table.definition == "standard"
        assert any("seeded-recurrence" in note for note in meixner_table.notes)
        # the seeded degree-1 polynomial is not orthogonal to constants
        assert any("(0, 1)" in note for note in meixner_table.notes)

    def test_generalized_laguerre_certifies(self):
        table = certify_orthonormality(
            PolynomialFamilySpec("laguerre", 2.5, max_degree=8))
        assert table.gram_residual < 1e-8
        assert table.definition == "recurrence"

    def test_half_shape_laguerre_certifies(self):
        # shape below 1 exercises the square-root substitution weight
        table = certify_orthonormality(
            PolynomialFamilySpec("laguerre", 0.5, max_degree=8))
        assert table.gram_residual < 1e-8

    def test_laguerre_gram_against_independent_quadrature(self, laguerre_table):
        nodes, weights = exp_weight_nodes()
        vals = laguerre_table.eval_normalized(nodes, 10)
        gram = np.einsum("in,jn,n->ij", vals, vals, weights)
        assert np.max(np.abs(gram - np.eye(11))) < 1e-8

    def test_meixner_gram_against_truncated_sum(self, meixner_table):
        nodes, weights = geometric_nodes(0.5)
        vals = meixner_table.eval_normalized(nodes, 8)
        gram = np.einsum("in,jn,n->ij", vals, vals, weights)
        assert np.max(np.abs(gram - np.eye(9))) < 1e-8

    def test_failure_names_offending_pair(self, monkeypatch):
        # force both Meixner definitions onto the non-orthogonal recurrence
        from deconvtest import orthopoly as op
        monkeypatch.setattr(op, "meixner_scaled_table",
                            lambda k, b, p, x: op._meixner_seeded_table(k, p, x))
        with pytest.raises(BasisInconsistencyError) as err:
            certify_orthonormality(PolynomialFamilySpec("meixner", 0.5, 6))
        assert err.value.pair == (0, 1)

    def test_spec_validation(self):
        with pytest.raises(DomainError):
            PolynomialFamilySpec("meixner", 1.2, 5)
        with pytest.raises(DegreeOverflowError):
            PolynomialFamilySpec("laguerre", 1.0, HARD_DEGREE_CAP + 1)
        with pytest.raises(DomainError):
            PolynomialFamilySpec("hermite", 1.0, 5)


class TestAdditionSplitLaguerre:
    def test_constant(self):
        assert addition_split_laguerre(0, 0.5, 0.5) == [(0, 1.0)]

    def test_degree_one_half_half(self):
        terms = addition_split_laguerre(1, 0.5, 0.5)
        assert [s for s, _ in terms] == [0, 1]
        np.testing.assert_allclose([w for _, w in terms], [0.5, 0.5])

    def test_identity_degree_three(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            y, z = rng.uniform(0.0, 10.0, 2)
            lhs = eval_laguerre_scaled(3, 1.0, y + z)
            rhs = sum(w * eval_laguerre_scaled(s, 0.5, y)
                      * eval_laguerre_scaled(3 - s, 0.5, z)
                      for s, w in addition_split_laguerre(3, 0.5, 0.5))
            assert abs(lhs - rhs) < 1e-10 * (1 + abs(lhs))

    def test_identity_general_shape(self):
        # u + v = 2, so the weights carry the (u + v)**-n normalization
        rng = np.random.default_rng(4)
        for n in range(7):
            y, z = rng.uniform(0.0, 6.0, 2)
            lhs = eval_laguerre_scaled(n, 2.0, y + z)
            rhs = sum(w * eval_laguerre_scaled(s, 0.7, y)
                      * eval_laguerre_scaled(n - s, 1.3, z)
                      for s, w in addition_split_laguerre(n, 0.7, 1.3))
            assert abs(lhs - rhs) < 1e-9 * (1 + abs(lhs))

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            addition_split_laguerre(2, -0.5, 0.5)
        with pytest.raises(DomainError):
            addition_split_laguerre(2, 0.5, 0.0)

    def test_palindromic_for_equal_split(self):
        for n in range(9):
            w = [c for _, c in addition_split_laguerre(n, 0.5, 0.5)]
            np.testing.assert_allclose(w, w[::-1])


class TestAdditionSplitMeixner:
    def test_constant(self):
        assert addition_split_meixner(0, 0.5, 0.5, 0.5) == [(0, 1.0)]

    def test_degree_one(self):
        terms = addition_split_meixner(1, 0.5, 0.5, 0.5)
        np.testing.assert_allclose([w for _, w in terms], [1.0, 1.0])

    def test_identity_on_integer_grid(self):
        p = 0.5
        grid = np.arange(21, dtype=float)
        yy, zz = np.meshgrid(grid, grid)
        for n in range(9):
            lhs = eval_meixner_scaled(n, 1.0, p, yy + zz)
            rhs = sum(w * eval_meixner_scaled(s, 0.5, p, yy)
                      * eval_meixner_scaled(n - s, 0.5, p, zz)
                      for s, w in addition_split_meixner(n, 0.5, 0.5, p))
            assert np.max(np.abs(lhs - rhs) / (1 + np.abs(lhs))) <= 1e-8

    def test_palindromic_for_equal_split(self):
        for n in range(9):
            w = [c for _, c in addition_split_meixner(n, 0.5, 0.5, 0.5)]
            np.testing.assert_allclose(w, w[::-1])

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            addition_split_meixner(2, 0.0, 1.0, 0.5)
        with pytest.raises(DomainError):
            addition_split_meixner(2, 0.5, 0.5, 1.1)


class TestRecurrenceStability:
    def test_laguerre_finite_to_cap(self):
        x = np.linspace(0.0, 60.0, 7)
        vals = laguerre_table(HARD_DEGREE_CAP, 1.0, x)
        assert np.all(np.isfinite(vals))

    def test_meixner_finite_to_cap(self):
        from deconvtest.orthopoly import meixner_scaled_table
        x = np.arange(0, 120, 10, dtype=float)
        vals = meixner_scaled_table(HARD_DEGREE_CAP, 1.0, 0.5, x)
        assert np.all(np.isfinite(vals))

    def test_legendre_finite_to_cap(self):
        from deconvtest.orthopoly import shifted_legendre_table
        x = np.linspace(0.0, 1.0, 11)
        vals = shifted_legendre_table(HARD_DEGREE_CAP, x)
        assert np.all(np.isfinite(vals))
