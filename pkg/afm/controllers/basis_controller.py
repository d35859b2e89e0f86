"""
Cubic B-spline basis on [0, 1] and the Fourier sums used as true loadings.
"""
from functools import lru_cache
from typing import Union

import numpy as np

from afm.models.basis_model import BasisSpec, FourierLoading
from afm.utils.errors import DomainError, InvalidDimensionError

DEGREE = 3
_GAUSS_NODES = 8


def make_basis(d: int) -> BasisSpec:
    """Clamped cubic basis of dimension d with d - 4 evenly spaced interior knots."""
    if int(d) != d or d < DEGREE + 1:
        raise InvalidDimensionError(f"basis dimension must be an integer >= {DEGREE + 1}, got {d}")
    d = int(d)
    interior = np.linspace(0.0, 1.0, d - DEGREE + 1)[1:-1]
    knots = np.concatenate([np.zeros(DEGREE + 1), interior, np.ones(DEGREE + 1)])
    return BasisSpec(degree=DEGREE, dim=d, knots=tuple(float(k) for k in knots))


def _check_domain(x: np.ndarray) -> None:
    if not np.all(np.isfinite(x)) or np.any(x < 0.0) or np.any(x > 1.0):
        bad = x[~((x >= 0.0) & (x <= 1.0))]
        raise DomainError(f"basis evaluation requires points in [0, 1], got {bad[:5]}")


def _find_span(knots: np.ndarray, dim: int, x: np.ndarray) -> np.ndarray:
    # x == 1 belongs to the last span
    span = np.searchsorted(knots, x, side="right") - 1
    return np.clip(span, DEGREE, dim - 1)


def design_matrix(spec: BasisSpec, points) -> np.ndarray:
    """T x d matrix whose row t is (psi_1(points[t]), ..., psi_d(points[t]))."""
    x = np.atleast_1d(np.asarray(points, dtype=np.float64))
    if x.ndim != 1:
        raise DomainError("points must be one-dimensional")
    _check_domain(x)
    knots = spec.knot_array
    p = spec.degree
    span = _find_span(knots, spec.dim, x)

    n_pts = x.size
    N = np.zeros((n_pts, p + 1))
    left = np.zeros((n_pts, p + 1))
    right = np.zeros((n_pts, p + 1))
    N[:, 0] = 1.0
    for j in range(1, p + 1):
        left[:, j] = x - knots[span + 1 - j]
        right[:, j] = knots[span + j] - x
        saved = np.zeros(n_pts)
        for r in range(j):
            temp = N[:, r] / (right[:, r + 1] + left[:, j - r])
            N[:, r] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        N[:, j] = saved

    out = np.zeros((n_pts, spec.dim))
    rows = np.arange(n_pts)[:, None]
    cols = span[:, None] - p + np.arange(p + 1)[None, :]
    out[rows, cols] = N
    return out


def eval_basis(spec: BasisSpec, x: float) -> np.ndarray:
    """(psi_1(x), ..., psi_d(x)) for a single x in [0, 1]."""
    return design_matrix(spec, [x])[0]


def eval_spline(spec: BasisSpec, coeffs, points) -> np.ndarray:
    """Evaluate psi(x)' b at each point; `coeffs` may be (d,) or (..., d)."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    return coeffs @ design_matrix(spec, points).T


def eval_fourier(h: FourierLoading, x: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    m = np.arange(1, 6, dtype=np.float64)
    xs = np.asarray(x, dtype=np.float64)
    angle = np.pi * np.multiply.outer(xs, m)
    value = np.cos(angle) @ (np.asarray(h.a) / m) + np.sin(angle) @ (np.asarray(h.b) / m)
    return float(value) if np.ndim(value) == 0 else value


@lru_cache(maxsize=64)
def _quadrature(spec: BasisSpec):
    nodes, weights = np.polynomial.legendre.leggauss(_GAUSS_NODES)
    u = spec.breakpoints
    half = np.diff(u) / 2.0
    mid = (u[:-1] + u[1:]) / 2.0
    points = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    w = (half[:, None] * weights[None, :]).ravel()
    psi = design_matrix(spec, points)
    psi.setflags(write=False)
    w.setflags(write=False)
    return psi, w


def l2_norm(spec: BasisSpec, coeffs) -> float:
    """sqrt(int_0^1 g^2) for g = psi' coeffs, exact up to rounding (8-point Gauss per knot interval)."""
    psi, w = _quadrature(spec)
    g = psi @ np.asarray(coeffs, dtype=np.float64)
    return float(np.sqrt(np.dot(w, g * g)))

