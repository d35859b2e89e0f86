"""Least squares loss of the additive model and the basis-dimension rule."""
import numpy as np

from afm.controllers.basis_controller import design_matrix
from afm.models.basis_model import BasisSpec
from afm.models.panel_model import CoefficientTensor, Panel
from afm.utils.errors import ConfigError, ShapeError


def component_values(basis: BasisSpec, coeffs: np.ndarray, factors: np.ndarray) -> np.ndarray:
    """N x q x T array of g_il(f_tl) = psi(f_tl)' b_il."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    factors = np.asarray(factors, dtype=np.float64)
    N, q, _ = coeffs.shape
    out = np.empty((N, q, factors.shape[0]))
    for l in range(q):
        out[:, l, :] = coeffs[:, l, :] @ design_matrix(basis, factors[:, l]).T
    return out


def common_component(basis: BasisSpec, coeffs: np.ndarray, factors: np.ndarray) -> np.ndarray:
    return component_values(basis, coeffs, factors).sum(axis=1)


def loss(panel: Panel, basis: BasisSpec, coeffs: CoefficientTensor, factors) -> float:
    """(1/NT) sum_it (x_it - sum_l psi(f_tl)' b_il)^2 on a series-centered panel."""
    x = panel.values
    b = coeffs.values if isinstance(coeffs, CoefficientTensor) else np.asarray(coeffs, dtype=np.float64)
    f = getattr(factors, "values", factors)
    f = np.asarray(f, dtype=np.float64)
    N, T = x.shape
    if b.ndim != 3 or b.shape[0] != N or b.shape[2] != basis.dim:
        raise ShapeError(f"coefficients of shape {b.shape} do not match N={N}, d={basis.dim}")
    if f.ndim != 2 or f.shape != (T, b.shape[1]):
        raise ShapeError(f"factors of shape {f.shape} do not match T={T}, q={b.shape[1]}")
    residual = x - common_component(basis, b, f)
    return float(np.mean(residual * residual))


def default_d(T: int, eta: float = 1.0) -> int:
    """round(4 + 0.25 T^(1/(1+2 eta))), half to even, never below 4."""
    if T < 2:
        raise ConfigError(f"automatic basis dimension needs T >= 2, got T={T}")
    if not eta >= 1.0:
        raise ConfigError(f"smoothness index eta must be at least 1, got {eta}")
    return max(4, int(round(4.0 + 0.25 * T ** (1.0 / (1.0 + 2.0 * eta)))))
