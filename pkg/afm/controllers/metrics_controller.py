"""
Evaluation of fitted models against simulated truth, distribution retargeting of the
uniform factors, and the second-step AR(1) regression on transformed factors.
"""
import logging
from typing import Callable, Tuple

import numpy as np
from scipy.special import ndtr, ndtri
from scipy.stats import pearsonr, rankdata, spearmanr

from afm.controllers.basis_controller import eval_spline
from afm.controllers.simulation_controller import eval_descriptor
from afm.models.metrics_model import Alignment, FactorCorrelation, Retargeting
from afm.models.panel_model import FittedModel
from afm.models.simulation_model import GroundTruth
from afm.utils.errors import (
    AlignmentUndefinedError,
    DegenerateSeriesError,
    EmptyInputError,
    ShapeError,
    TransformError,
)

logger = logging.getLogger(__name__)


def _matrix(values) -> np.ndarray:
    arr = np.asarray(getattr(values, "values", values), dtype=np.float64)
    return arr[:, None] if arr.ndim == 1 else arr


def spearman_matrix(est, truth) -> np.ndarray:
    """q x q rank correlations between estimated (rows) and true (columns) factors."""
    est, truth = _matrix(est), _matrix(truth)
    if est.shape != truth.shape:
        raise ShapeError(f"estimated factors {est.shape} and true factors {truth.shape} differ")
    ranks = np.hstack([rankdata(est, axis=0), rankdata(truth, axis=0)])
    if np.any(np.ptp(ranks, axis=0) == 0.0):
        raise AlignmentUndefinedError("a factor column is constant; its correlation is undefined")
    q = est.shape[1]
    return np.corrcoef(ranks, rowvar=False)[:q, q:]


def align(est_factors, true_factors) -> Alignment:
    """Greedy matching on |Spearman correlation|; negative matches are reflected."""
    rho = spearman_matrix(est_factors, true_factors)
    q = rho.shape[0]
    strength = np.abs(rho)
    permutation = [-1] * q
    reflect = [False] * q
    for _ in range(q):
        k, l = np.unravel_index(np.argmax(strength), strength.shape)
        permutation[k] = int(l)
        reflect[k] = bool(rho[k, l] < 0.0)
        strength[k, :] = -np.inf
        strength[:, l] = -np.inf
    return Alignment(permutation=tuple(permutation), reflect=tuple(reflect))


def apply_alignment(est_factors, alignment: Alignment) -> np.ndarray:
    """Estimated factors reordered to the true factor order, reflected where flagged."""
    est = _matrix(est_factors)
    out = np.empty_like(est)
    for k, l in enumerate(alignment.permutation):
        out[:, l] = 1.0 - est[:, k] if alignment.reflect[k] else est[:, k]
    return out


def mse_f(est, truth, alignment: Alignment) -> float:
    """(1/T) sum_t sum_l (f_hat_tl - f_tl)^2 after alignment."""
    est, truth = _matrix(est), _matrix(truth)
    if est.shape != truth.shape or len(alignment.permutation) != est.shape[1]:
        raise ShapeError(f"estimated factors {est.shape}, true factors {truth.shape} and alignment disagree")
    diff = apply_alignment(est, alignment) - truth
    return float(np.sum(diff * diff) / truth.shape[0])


def mse_g(model: FittedModel, truth: GroundTruth, alignment: Alignment) -> float:
    """(1/NT) sum_t sum_i sum_l (g_hat_il(f_tl) - g_il(f_tl))^2 at the true factors.

    Both curves are centered by their sample means over the true factors first.
    """
    if (model.N, model.q) != (truth.N, truth.q) or len(alignment.permutation) != model.q:
        raise ShapeError(
            f"model (N={model.N}, q={model.q}) and truth (N={truth.N}, q={truth.q}) disagree"
        )
    total = 0.0
    for k, l in enumerate(alignment.permutation):
        f = truth.factors[:, l]
        points = 1.0 - f if alignment.reflect[k] else f
        g_hat = eval_spline(model.basis, model.coeffs.values[:, k, :], points)
        g_true = np.vstack([eval_descriptor(truth.functions[i][l], f) for i in range(truth.N)])
        g_hat = g_hat - g_hat.mean(axis=1, keepdims=True)
        g_true = g_true - g_true.mean(axis=1, keepdims=True)
        total += float(np.sum((g_hat - g_true) ** 2))
    return total / (truth.N * truth.T)


def ecdf_transform(values) -> np.ndarray:
    """rank_t / (T + 1) with ties broken by index."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise EmptyInputError("cannot transform an empty series")
    if not np.all(np.isfinite(values)):
        raise TransformError("ECDF transform requires finite values")
    return rankdata(values, method="ordinal") / (values.size + 1.0)


def gaussian_retargeting() -> Retargeting:
    return Retargeting(name="gaussian", quantile=ndtri, cdf=ndtr)


def _linear_extension(x, xp, fp) -> np.ndarray:
    """np.interp inside [xp[0], xp[-1]], continued along the first and last segments outside."""
    x = np.asarray(x, dtype=np.float64)
    y = np.interp(x, xp, fp)
    left = (fp[1] - fp[0]) / (xp[1] - xp[0])
    right = (fp[-1] - fp[-2]) / (xp[-1] - xp[-2])
    y = np.where(x < xp[0], fp[0] + (x - xp[0]) * left, y)
    return np.where(x > xp[-1], fp[-1] + (x - xp[-1]) * right, y)


def ecdf_retargeting(reference) -> Retargeting:
    """Empirical distribution of `reference`, linear between plotting positions k/(M+1).

    Tied reference values share the mean of their positions, and both maps continue linearly
    past the outermost positions, so quantile and cdf are strictly increasing inverses on all
    of [0, 1] whatever the length of the reference.
    """
    ref = np.sort(np.asarray(reference, dtype=np.float64).ravel())
    if not np.all(np.isfinite(ref)):
        raise TransformError("reference series must be finite")
    positions = np.arange(1, ref.size + 1) / (ref.size + 1.0)
    values, inverse = np.unique(ref, return_inverse=True)
    if values.size < 2:
        raise TransformError(f"reference series needs at least 2 distinct values, got {values.size}")
    levels = np.bincount(inverse, weights=positions) / np.bincount(inverse)

    def quantile(p):
        return _linear_extension(p, levels, values)

    def cdf(x):
        return _linear_extension(x, values, levels)

    return Retargeting(name="ecdf", quantile=quantile, cdf=cdf)


def retarget_factors(factors, quantile_fn: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Elementwise quantile_fn applied to grid factors."""
    values = _matrix(factors)
    out = np.asarray(quantile_fn(values), dtype=np.float64)
    if out.shape != values.shape or not np.all(np.isfinite(out)):
        raise TransformError("quantile function returned non-finite or misshaped values")
    return out


class RetargetedModel:
    """Fitted model re-expressed on a target factor distribution: g~ = g_hat o cdf."""

    def __init__(self, model: FittedModel, retargeting: Retargeting):
        self.model = model
        self.retargeting = retargeting
        self.factors = retarget_factors(model.factors, retargeting.quantile)

    def evaluate(self, points) -> np.ndarray:
        """N x q x P values of g~_il at retargeted points."""
        u = np.clip(np.asarray(self.retargeting.cdf(np.asarray(points, dtype=np.float64)), dtype=np.float64), 0.0, 1.0)
        return eval_spline(self.model.basis, self.model.coeffs.values, u)


def ar1_ols(z, intercept: bool = False) -> float:
    """Least squares theta of z_t = theta z_{t-1} (+ c) + v_t."""
    z = np.asarray(z, dtype=np.float64).ravel()
    if z.size < 3:
        raise DegenerateSeriesError(f"AR(1) regression needs at least 3 observations, got {z.size}")
    if not np.all(np.isfinite(z)):
        raise DegenerateSeriesError("AR(1) regression requires finite values")
    lagged, current = z[:-1], z[1:]
    if intercept:
        design = np.column_stack([np.ones_like(lagged), lagged])
        coef, _, rank, _ = np.linalg.lstsq(design, current, rcond=None)
        if rank < 2:
            raise DegenerateSeriesError("lagged series is constant")
        return float(coef[1])
    denominator = np.dot(lagged, lagged)
    if denominator == 0.0:
        raise DegenerateSeriesError("lagged series is identically zero")
    return float(np.dot(current, lagged) / denominator)


def median_and_mad(values) -> Tuple[float, float]:
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        raise EmptyInputError("median of an empty sample")
    median = float(np.median(values))
    return median, float(np.median(np.abs(values - median)))


def interquartile_range(values) -> float:
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        raise EmptyInputError("interquartile range of an empty sample")
    q75, q25 = np.percentile(values, [75.0, 25.0])
    return float(q75 - q25)


def factor_correlation(est_factors, proxy) -> FactorCorrelation:
    """Pearson and Spearman correlation of each estimated factor with an observed proxy."""
    est = _matrix(est_factors)
    proxy = np.asarray(proxy, dtype=np.float64).ravel()
    if proxy.size != est.shape[0]:
        raise ShapeError(f"proxy has {proxy.size} observations, factors have {est.shape[0]}")
    return FactorCorrelation(
        pearson=[float(pearsonr(est[:, l], proxy)[0]) for l in range(est.shape[1])],
        spearman=[float(spearmanr(est[:, l], proxy)[0]) for l in range(est.shape[1])],
    )
