import numpy as np
import pytest
from scipy.special import ndtr

from afm.controllers.basis_controller import eval_spline, make_basis
from afm.controllers.metrics_controller import (
    RetargetedModel,
    align,
    apply_alignment,
    ar1_ols,
    ecdf_retargeting,
    ecdf_transform,
    factor_correlation,
    gaussian_retargeting,
    interquartile_range,
    median_and_mad,
    mse_f,
    mse_g,
    retarget_factors,
)
from afm.controllers.simulation_controller import eval_descriptor, gen_random_functions
from afm.models.metrics_model import Alignment
from afm.models.panel_model import CoefficientTensor, EstimatorConfig, FactorMatrix, FittedModel, factor_grid
from afm.models.simulation_model import FunctionDescriptor, GroundTruth
from afm.utils.errors import (
    AlignmentUndefinedError,
    DegenerateSeriesError,
    EmptyInputError,
    ShapeError,
    TransformError,
)
from conftest import random_factor_matrix


def _model(coeffs, T=20):
    coeffs = np.asarray(coeffs, dtype=np.float64)
    N, q, d = coeffs.shape
    rng = np.random.default_rng(T)
    return FittedModel(
        basis=make_basis(d),
        coeffs=CoefficientTensor(values=coeffs),
        factors=random_factor_matrix(rng, T, q),
        series_means=np.zeros(N),
        loss_trace=((0, 0.0),),
        converged=True,
        config=EstimatorConfig(q=q, d=d),
    )


def _greville(d):
    t = make_basis(d).knot_array
    return np.array([(t[k + 1] + t[k + 2] + t[k + 3]) / 3.0 for k in range(d)])


class TestAlign:
    def test_identity(self, rng):
        f = rng.uniform(size=(50, 2))
        assert align(f, f) == Alignment.identity(2)

    def test_reflection(self, rng):
        f = rng.uniform(size=(50, 2))
        alignment = align(1.0 - f, f)
        assert alignment.permutation == (0, 1)
        assert alignment.reflect == (True, True)

    def test_swap(self, rng):
        f = rng.uniform(size=(50, 2))
        alignment = align(f[:, ::-1], f)
        assert alignment.permutation == (1, 0)
        assert alignment.reflect == (False, False)

    def test_constant_column(self, rng):
        f = rng.uniform(size=(30, 2))
        est = f.copy()
        est[:, 1] = 0.5
        with pytest.raises(AlignmentUndefinedError):
            align(est, f)

    def test_shape_mismatch(self, rng):
        with pytest.raises(ShapeError):
            align(rng.uniform(size=(10, 2)), rng.uniform(size=(10, 1)))

    def test_alignment_never_hurts(self, rng):
        for _ in range(20):
            truth = random_factor_matrix(rng, 40, 3).values
            order = rng.permutation(3)
            est = truth[:, order]
            flips = rng.uniform(size=3) < 0.5
            est[:, flips] = 1.0 - est[:, flips]
            est = est + 0.01 * rng.standard_normal(est.shape)
            aligned = mse_f(est, truth, align(est, truth))
            assert aligned <= mse_f(est, truth, Alignment.identity(3)) + 1e-15
            assert aligned < 1e-3

    def test_apply_alignment_places_columns(self):
        est = np.array([[0.1, 0.7], [0.2, 0.8]])
        out = apply_alignment(est, Alignment(permutation=(1, 0), reflect=(True, False)))
        np.testing.assert_allclose(out, [[0.7, 0.9], [0.8, 0.8]])

    def test_alignment_must_be_bijection(self):
        with pytest.raises(ValueError):
            Alignment(permutation=(0, 0), reflect=(False, False))


class TestMseF:
    def test_zero(self, rng):
        f = rng.uniform(size=(10, 2))
        assert mse_f(f, f, Alignment.identity(2)) == 0.0

    def test_swapped_points(self):
        est = FactorMatrix(values=[[1 / 3], [2 / 3]])
        value = mse_f(est, np.array([[2 / 3], [1 / 3]]), Alignment.identity(1))
        assert value == pytest.approx(1 / 9)

    def test_reflected(self, rng):
        f = rng.uniform(size=(10, 1))
        assert mse_f(1.0 - f, f, Alignment(permutation=(0,), reflect=(True,))) == pytest.approx(0.0, abs=1e-30)

    def test_shape_mismatch(self, rng):
        with pytest.raises(ShapeError):
            mse_f(rng.uniform(size=(5, 1)), rng.uniform(size=(6, 1)), Alignment.identity(1))


class TestMseG:
    def _truth(self, factors):
        return GroundTruth(functions=[[FunctionDescriptor(kind="suite", index=1)]], factors=factors)

    def test_exact_representation(self, rng):
        # g_1(x) = 2x is a cubic spline with Greville-point coefficients
        model = _model(2.0 * _greville(7)[None, None, :])
        truth = self._truth(rng.uniform(size=(20, 1)))
        assert mse_g(model, truth, Alignment.identity(1)) == pytest.approx(0.0, abs=1e-24)

    def test_constant_shift(self, rng):
        model = _model((2.0 * _greville(6) + 3.0)[None, None, :])
        truth = self._truth(rng.uniform(size=(20, 1)))
        assert mse_g(model, truth, Alignment.identity(1)) == pytest.approx(0.0, abs=1e-24)

    def test_reflection_evaluates_at_one_minus_f(self, rng):
        # g_hat(x) = 2 - 2x, so g_hat(1 - f) = 2f
        model = _model((2.0 - 2.0 * _greville(6))[None, None, :])
        truth = self._truth(rng.uniform(size=(20, 1)))
        assert mse_g(model, truth, Alignment(permutation=(0,), reflect=(True,))) == pytest.approx(0.0, abs=1e-24)
        assert mse_g(model, truth, Alignment.identity(1)) > 0.1

    def test_matches_naive_loop(self, rng):
        N, q, d, T = 3, 2, 5, 20
        model = _model(rng.standard_normal((N, q, d)), T=T)
        functions = [[FunctionDescriptor(kind="fourier", fourier=h) for h in row] for row in gen_random_functions(N, q, 3)]
        truth = GroundTruth(functions=functions, factors=rng.uniform(size=(T, q)))
        alignment = Alignment(permutation=(1, 0), reflect=(True, False))

        total = 0.0
        for k in range(q):
            l = alignment.permutation[k]
            hat = np.zeros((N, T))
            true = np.zeros((N, T))
            for i in range(N):
                for t in range(T):
                    f = truth.factors[t, l]
                    x = 1.0 - f if alignment.reflect[k] else f
                    hat[i, t] = eval_spline(model.basis, model.coeffs.values[i, k], [x])[0]
                    true[i, t] = eval_descriptor(functions[i][l], np.array([f]))[0]
            for i in range(N):
                for t in range(T):
                    total += ((hat[i, t] - hat[i].mean()) - (true[i, t] - true[i].mean())) ** 2
        assert mse_g(model, truth, alignment) == pytest.approx(total / (N * T), rel=1e-12)

    def test_shape_mismatch(self, rng):
        model = _model(rng.standard_normal((2, 1, 5)))
        with pytest.raises(ShapeError):
            mse_g(model, self._truth(rng.uniform(size=(20, 1))), Alignment.identity(1))


class TestEcdf:
    def test_ranks(self):
        np.testing.assert_allclose(ecdf_transform([3.0, 1.0, 2.0]), [0.75, 0.25, 0.5])

    def test_sorted_input(self):
        np.testing.assert_allclose(ecdf_transform(np.arange(9.0)), factor_grid(9))

    def test_monotone_invariance(self, rng):
        x = rng.standard_normal(100)
        np.testing.assert_array_equal(ecdf_transform(x), ecdf_transform(np.exp(3.0 * x) + 1.0))

    def test_open_interval(self, rng):
        u = ecdf_transform(rng.standard_normal(30))
        assert np.all((u > 0.0) & (u < 1.0))

    def test_errors(self):
        with pytest.raises(EmptyInputError):
            ecdf_transform([])
        with pytest.raises(TransformError):
            ecdf_transform([1.0, np.nan])


class TestRetargeting:
    def test_identity_quantile(self, rng):
        f = random_factor_matrix(rng, 12, 2)
        np.testing.assert_array_equal(retarget_factors(f, lambda p: p), f.values)

    def test_gaussian_median(self):
        assert gaussian_retargeting().quantile(0.5) == 0.0

    def test_gaussian_round_trip(self, rng):
        f = random_factor_matrix(rng, 200, 2)
        z = retarget_factors(f, gaussian_retargeting().quantile)
        np.testing.assert_allclose(ndtr(z), f.values, rtol=0, atol=1e-9)

    def test_non_finite_quantile(self, rng):
        with pytest.raises(TransformError):
            retarget_factors(random_factor_matrix(rng, 5, 1), lambda p: np.log(p - 0.5))

    @pytest.mark.parametrize("target", ["gaussian", "ecdf"])
    def test_model_values_unchanged(self, rng, target):
        model = _model(rng.standard_normal((4, 2, 6)), T=30)
        retargeting = gaussian_retargeting() if target == "gaussian" else ecdf_retargeting(rng.standard_t(4, size=200))
        view = RetargetedModel(model, retargeting)
        for l in range(2):
            before = eval_spline(model.basis, model.coeffs.values[:, l, :], model.factors.values[:, l])
            after = view.evaluate(view.factors[:, l])[:, l, :]
            np.testing.assert_allclose(after, before, rtol=0, atol=1e-9)

    def test_ecdf_reference_is_order_preserving(self, rng):
        retargeting = ecdf_retargeting(rng.exponential(size=50))
        f = random_factor_matrix(rng, 40, 1)
        r = retarget_factors(f, retargeting.quantile)[:, 0]
        np.testing.assert_array_equal(np.argsort(r), np.argsort(f.values[:, 0]))

    def test_short_reference(self):
        with pytest.raises(TransformError):
            ecdf_retargeting([1.0])

    def test_constant_reference(self):
        with pytest.raises(TransformError, match="distinct"):
            ecdf_retargeting([2.0, 2.0, 2.0])

    def test_reference_shorter_than_panel(self, rng):
        model = _model(rng.standard_normal((4, 1, 6)), T=100)
        view = RetargetedModel(model, ecdf_retargeting(rng.standard_normal(20)))
        r = view.factors[:, 0]
        assert np.unique(r).size == 100
        np.testing.assert_array_equal(np.argsort(r), np.argsort(model.factors.values[:, 0]))
        before = eval_spline(model.basis, model.coeffs.values[:, 0, :], model.factors.values[:, 0])
        np.testing.assert_allclose(view.evaluate(r)[:, 0, :], before, rtol=0, atol=1e-9)

    def test_ecdf_extends_past_reference(self):
        retargeting = ecdf_retargeting([0.0, 1.0, 3.0])
        # positions 1/4, 2/4, 3/4; the end segments have slopes 4 and 8
        np.testing.assert_allclose(retargeting.quantile(np.array([0.0, 0.25, 0.5, 0.75, 1.0])), [-1.0, 0.0, 1.0, 3.0, 5.0])
        np.testing.assert_allclose(retargeting.cdf(np.array([-1.0, 2.0, 5.0])), [0.0, 0.625, 1.0])

    def test_tied_reference_values_share_a_position(self):
        retargeting = ecdf_retargeting([0.0, 1.0, 1.0, 2.0])
        # positions 1/5 .. 4/5, the tied pair sits at their mean 1/2
        assert retargeting.cdf(1.0) == pytest.approx(0.5)
        p = np.linspace(0.0, 1.0, 11)
        assert np.all(np.diff(retargeting.quantile(p)) > 0.0)
        np.testing.assert_allclose(retargeting.cdf(retargeting.quantile(p)), p, rtol=0, atol=1e-12)


class TestAr1Ols:
    def test_geometric(self):
        assert ar1_ols([1.0, 0.5, 0.25, 0.125]) == pytest.approx(0.5)

    def test_unit_root(self):
        assert ar1_ols(np.full(10, 2.5)) == pytest.approx(1.0)

    def test_white_noise(self, rng):
        assert abs(ar1_ols(rng.standard_normal(10_000))) < 0.05

    @pytest.mark.parametrize("c", [-2.0, 4.0, 0.5])
    def test_scale_free(self, rng, c):
        z = rng.standard_normal(200)
        assert ar1_ols(c * z) == ar1_ols(z)

    def test_intercept(self):
        z = [0.0]
        for _ in range(12):
            z.append(1.0 + 0.5 * z[-1])
        assert ar1_ols(z, intercept=True) == pytest.approx(0.5)

    def test_degenerate(self):
        with pytest.raises(DegenerateSeriesError):
            ar1_ols(np.zeros(5))
        with pytest.raises(DegenerateSeriesError):
            ar1_ols([1.0, 2.0])


class TestSummaries:
    @pytest.mark.parametrize("values, expected", [
        ([1, 2, 3], (2.0, 1.0)),
        ([1, 1, 1, 1], (1.0, 0.0)),
        ([1, 2, 3, 4], (2.5, 1.0)),
    ])
    def test_median_and_mad(self, values, expected):
        assert median_and_mad(values) == expected

    def test_interquartile_range(self):
        assert interquartile_range([1, 2, 3, 4, 5]) == 2.0

    def test_empty(self):
        with pytest.raises(EmptyInputError):
            median_and_mad([])
        with pytest.raises(EmptyInputError):
            interquartile_range([])

    def test_factor_correlation(self, rng):
        proxy = rng.standard_normal(60)
        corr = factor_correlation(ecdf_transform(proxy), proxy)
        assert corr.spearman == [pytest.approx(1.0)]
        assert 0.9 < corr.pearson[0] < 1.0

    def test_factor_correlation_shape(self, rng):
        with pytest.raises(ShapeError):
            factor_correlation(rng.uniform(size=(10, 1)), rng.standard_normal(9))
