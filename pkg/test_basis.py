import numpy as np
import pytest

from afm.controllers.basis_controller import (
    design_matrix,
    eval_basis,
    eval_fourier,
    eval_spline,
    l2_norm,
    make_basis,
)
from afm.models.basis_model import BasisSpec, FourierLoading
from afm.utils.errors import DomainError, InvalidDimensionError


def cox_de_boor(knots, k, p, x):
    """Textbook recursive definition, right-closed on the last span."""
    if p == 0:
        last = knots[k + 1] == knots[-1] and knots[k] < knots[k + 1]
        if knots[k] <= x < knots[k + 1] or (last and x == knots[-1]):
            return 1.0
        return 0.0
    value = 0.0
    if knots[k + p] > knots[k]:
        value += (x - knots[k]) / (knots[k + p] - knots[k]) * cox_de_boor(knots, k, p - 1, x)
    if knots[k + p + 1] > knots[k + 1]:
        value += (knots[k + p + 1] - x) / (knots[k + p + 1] - knots[k + 1]) * cox_de_boor(knots, k + 1, p - 1, x)
    return value


class TestMakeBasis:
    def test_cubic_bernstein(self):
        spec = make_basis(4)
        assert spec.knots == (0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0)
        assert spec.degree == 3 and spec.dim == 4

    def test_interior_knots(self):
        np.testing.assert_allclose(make_basis(6).knots[4:6], [1 / 3, 2 / 3], rtol=0, atol=1e-15)
        assert make_basis(5).knots[4] == 0.5

    def test_knot_count(self):
        for d in (4, 5, 6, 10, 17):
            assert len(make_basis(d).knots) == d + 4

    def test_invalid_dimension(self):
        with pytest.raises(InvalidDimensionError):
            make_basis(3)

    def test_spec_rejects_uneven_knots(self):
        with pytest.raises(ValueError):
            BasisSpec(dim=6, knots=(0, 0, 0, 0, 0.2, 0.7, 1, 1, 1, 1))


class TestEvalBasis:
    def test_endpoints(self):
        spec = make_basis(4)
        np.testing.assert_array_equal(eval_basis(spec, 0.0), [1, 0, 0, 0])
        np.testing.assert_array_equal(eval_basis(spec, 1.0), [0, 0, 0, 1])

    def test_matches_recursive_definition(self):
        spec = make_basis(6)
        for x in (0.0, 0.1, 1 / 3, 0.5, 0.77, 1.0):
            expected = [cox_de_boor(spec.knots, k, 3, x) for k in range(6)]
            np.testing.assert_allclose(eval_basis(spec, x), expected, rtol=0, atol=1e-14)
        assert abs(eval_basis(spec, 0.5).sum() - 1.0) < 1e-14

    @pytest.mark.parametrize("x", [-1e-9, 1.0 + 1e-9, np.nan])
    def test_no_extrapolation(self, x):
        with pytest.raises(DomainError):
            eval_basis(make_basis(5), x)


class TestDesignMatrix:
    def test_rows(self):
        np.testing.assert_array_equal(design_matrix(make_basis(4), [0.0, 1.0]), [[1, 0, 0, 0], [0, 0, 0, 1]])

    @pytest.mark.parametrize("d", [4, 5, 6, 10])
    def test_partition_of_unity(self, d):
        psi = design_matrix(make_basis(d), np.linspace(0.0, 1.0, 1000))
        assert np.max(np.abs(psi.sum(axis=1) - 1.0)) < 1e-12

    @pytest.mark.parametrize("d", [4, 7, 10])
    def test_nonnegative_local_support(self, d):
        spec = make_basis(d)
        x = np.linspace(0.0, 1.0, 777)
        psi = design_matrix(spec, x)
        assert np.all(psi >= 0.0)
        assert np.all((psi > 0).sum(axis=1) <= 4)
        knots = spec.knot_array
        for k in range(d):
            outside = (x < knots[k]) | (x > knots[k + 4])
            assert np.all(psi[outside, k] == 0.0)

    def test_linearity(self, rng):
        spec = make_basis(8)
        x = rng.uniform(size=50)
        b1, b2 = rng.standard_normal(8), rng.standard_normal(8)
        combined = eval_spline(spec, 2.5 * b1 - 0.7 * b2, x)
        separate = 2.5 * eval_spline(spec, b1, x) - 0.7 * eval_spline(spec, b2, x)
        np.testing.assert_allclose(combined, separate, rtol=0, atol=1e-12)

    def test_column_sums_match_integrals(self):
        spec = make_basis(6)
        psi = design_matrix(spec, np.linspace(0.0, 1.0, 101))
        knots = spec.knot_array
        integrals = np.array([(knots[k + 4] - knots[k]) / 4.0 for k in range(6)])
        # trapezoid rule on the 101-point grid
        trapezoid = psi.sum(axis=0) - 0.5 * (psi[0] + psi[-1])
        np.testing.assert_allclose(trapezoid, 100 * integrals, rtol=5e-3)


class TestFourier:
    def test_examples(self):
        assert eval_fourier(FourierLoading(a=(1, 0, 0, 0, 0), b=(0,) * 5), 0.0) == pytest.approx(1.0, abs=1e-15)
        assert eval_fourier(FourierLoading(a=(0,) * 5, b=(1, 0, 0, 0, 0)), 0.5) == pytest.approx(1.0, abs=1e-15)
        assert eval_fourier(FourierLoading(a=(1,) * 5, b=(0,) * 5), 0.0) == pytest.approx(137 / 60, abs=1e-14)

    def test_matches_term_by_term(self, rng):
        for _ in range(20):
            a, b = rng.standard_normal(5), rng.standard_normal(5)
            x = float(rng.uniform())
            expected = sum(a[m - 1] / m * np.cos(np.pi * m * x) + b[m - 1] / m * np.sin(np.pi * m * x)
                           for m in range(1, 6))
            assert abs(eval_fourier(FourierLoading(a=a, b=b), x) - expected) < 1e-14

    def test_requires_five_coefficients(self):
        with pytest.raises(ValueError):
            FourierLoading(a=(1, 2, 3), b=(0,) * 5)


class TestL2Norm:
    def test_trivial(self):
        assert l2_norm(make_basis(6), np.zeros(6)) == 0.0
        assert l2_norm(make_basis(4), np.ones(4)) == pytest.approx(1.0, abs=1e-14)

    def test_matches_fine_grid(self, rng):
        n = 200_000
        midpoints = (np.arange(n) + 0.5) / n
        for d in (4, 5, 6, 10):
            spec = make_basis(d)
            psi = design_matrix(spec, midpoints)
            for _ in range(5):
                coeffs = rng.standard_normal(d)
                oracle = np.sqrt(np.mean((psi @ coeffs) ** 2))
                assert abs(l2_norm(spec, coeffs) - oracle) < 1e-8

    def test_first_function(self):
        spec = make_basis(6)
        n = 200_000
        g = design_matrix(spec, (np.arange(n) + 0.5) / n)[:, 0]
        assert abs(l2_norm(spec, np.eye(6)[0]) - np.sqrt(np.mean(g ** 2))) < 1e-8
