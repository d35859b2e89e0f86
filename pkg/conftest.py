import numpy as np
import pytest

from afm.controllers.basis_controller import make_basis
from afm.controllers.simulation_controller import gen_panel
from afm.models.panel_model import FactorMatrix, Panel, factor_grid
from afm.models.simulation_model import DGPSpec


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_factor_matrix(rng, T, q):
    grid = factor_grid(T)
    return FactorMatrix(values=np.column_stack([rng.permutation(grid) for _ in range(q)]))


@pytest.fixture
def small_truth():
    return gen_panel(DGPSpec(N=12, T=60, q=1, noise_sd=0.3, seed=7))


@pytest.fixture
def basis6():
    return make_basis(6)


def spline_panel(rng, basis, factors, N, noise_sd=0.0):
    """Panel generated from random spline coefficients at the given factors."""
    from afm.controllers.model_controller import common_component

    coeffs = rng.standard_normal((N, factors.q, basis.dim))
    values = common_component(basis, coeffs, factors.values)
    values = values + noise_sd * rng.standard_normal(values.shape)
    return Panel(values=values), coeffs
