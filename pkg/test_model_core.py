import numpy as np
import pytest
from pydantic import ValidationError

from afm.controllers.basis_controller import eval_basis, make_basis
from afm.controllers.model_controller import default_d, loss
from afm.models.panel_model import CoefficientTensor, EstimatorConfig, FactorMatrix, Panel, factor_grid
from afm.utils.errors import ConfigError, ShapeError
from conftest import random_factor_matrix


def naive_loss(x, basis, b, f):
    N, T = x.shape
    total = 0.0
    for i in range(N):
        for t in range(T):
            fitted = 0.0
            for l in range(f.shape[1]):
                fitted += float(eval_basis(basis, f[t, l]) @ b[i, l])
            total += (x[i, t] - fitted) ** 2
    return total / (N * T)


class TestLoss:
    def test_zero(self):
        basis = make_basis(5)
        panel = Panel(values=np.zeros((3, 4)))
        factors = FactorMatrix(values=factor_grid(4)[:, None])
        assert loss(panel, basis, CoefficientTensor(values=np.zeros((3, 1, 5))), factors) == 0.0

    def test_constant_fit(self):
        # psi sums to one, so all-ones coefficients give g = 1
        basis = make_basis(4)
        panel = Panel(values=[[2.0, 2.0]])
        factors = FactorMatrix(values=[[1 / 3], [2 / 3]])
        assert loss(panel, basis, CoefficientTensor(values=np.ones((1, 1, 4))), factors) == pytest.approx(1.0, abs=1e-14)

    def test_matches_naive_loop(self, rng):
        basis = make_basis(6)
        x = rng.standard_normal((4, 9))
        b = rng.standard_normal((4, 2, 6))
        f = random_factor_matrix(rng, 9, 2)
        value = loss(Panel(values=x), basis, CoefficientTensor(values=b), f)
        assert abs(value - naive_loss(x, basis, b, f.values)) < 1e-12

    def test_time_permutation_invariance(self, rng):
        basis = make_basis(5)
        x = rng.standard_normal((5, 12))
        b = CoefficientTensor(values=rng.standard_normal((5, 2, 5)))
        f = random_factor_matrix(rng, 12, 2)
        perm = rng.permutation(12)
        before = loss(Panel(values=x), basis, b, f)
        after = loss(Panel(values=x[:, perm]), basis, b, FactorMatrix(values=f.values[perm]))
        assert after == pytest.approx(before, rel=1e-12)

    def test_factor_swap_invariance(self, rng):
        basis = make_basis(5)
        x = rng.standard_normal((5, 12))
        b = rng.standard_normal((5, 2, 5))
        f = random_factor_matrix(rng, 12, 2)
        before = loss(Panel(values=x), basis, CoefficientTensor(values=b), f)
        after = loss(Panel(values=x), basis, CoefficientTensor(values=b[:, ::-1]), FactorMatrix(values=f.values[:, ::-1]))
        assert after == pytest.approx(before, rel=1e-12)

    def test_shape_mismatch(self, rng):
        basis = make_basis(5)
        panel = Panel(values=rng.standard_normal((3, 6)))
        with pytest.raises(ShapeError):
            loss(panel, basis, CoefficientTensor(values=np.zeros((3, 1, 4))), factor_grid(6)[:, None])
        with pytest.raises(ShapeError):
            loss(panel, basis, CoefficientTensor(values=np.zeros((3, 1, 5))), factor_grid(5)[:, None])


class TestDefaultD:
    @pytest.mark.parametrize("T, expected", [(100, 5), (500, 6), (8, 4), (2, 4)])
    def test_rule(self, T, expected):
        assert default_d(T, 1.0) == expected

    def test_smoother_functions_need_fewer_knots(self):
        assert default_d(10_000, 2.0) <= default_d(10_000, 1.0)

    @pytest.mark.parametrize("T, eta", [(1, 1.0), (0, 1.0), (100, 0.5), (100, float("nan"))])
    def test_preconditions(self, T, eta):
        with pytest.raises(ConfigError):
            default_d(T, eta)


class TestDomainTypes:
    def test_factor_matrix_accepts_permutation(self):
        FactorMatrix(values=[[0.75], [0.25], [0.5]])

    def test_factor_matrix_rejects_off_grid(self):
        with pytest.raises(ValidationError):
            FactorMatrix(values=[[0.7], [0.25], [0.5]])
        with pytest.raises(ValidationError):
            FactorMatrix(values=[[0.25], [0.25], [0.5]])

    def test_panel_requires_finite_values(self):
        with pytest.raises(ValidationError):
            Panel(values=[[1.0, np.nan]])
        with pytest.raises(ValidationError):
            Panel(values=[[1.0], [2.0]])

    def test_panel_is_immutable(self):
        panel = Panel(values=[[1.0, 2.0]])
        with pytest.raises(ValueError):
            panel.values[0, 0] = 3.0

    def test_centering(self):
        centered, means = Panel(values=[[1.0, 3.0], [5.0, 5.0]]).centered()
        np.testing.assert_array_equal(means, [2.0, 5.0])
        np.testing.assert_array_equal(centered.values, [[-1.0, 1.0], [0.0, 0.0]])

    def test_estimator_config_bounds(self):
        assert EstimatorConfig(q=2).d == "auto"
        with pytest.raises(ValidationError):
            EstimatorConfig(q=1, d=3)
        with pytest.raises(ValidationError):
            EstimatorConfig(q=0)
        with pytest.raises(ValidationError):
            EstimatorConfig(q=1, eta=0.5)
