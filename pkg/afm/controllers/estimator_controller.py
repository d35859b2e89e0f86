"""
Alternating least squares over the spline sieve.

Each outer iteration fits every series' spline coefficients with the factors held fixed,
then searches the factor grid with the coefficients held fixed, and finally replaces the
factors by their ranks divided by T + 1 so they stay inside the sieve of permutations.
"""
import logging
from typing import List, Optional, Tuple

import numpy as np
import scipy.linalg
from scipy.sparse.csgraph import connected_components, csgraph_from_dense, shortest_path
from scipy.spatial.distance import pdist, squareform
from scipy.stats import rankdata

from afm.controllers.basis_controller import design_matrix, eval_spline, l2_norm, make_basis
from afm.controllers.model_controller import common_component, default_d, loss
from afm.models.basis_model import BasisSpec
from afm.models.panel_model import (
    CoefficientTensor,
    EstimatorConfig,
    FactorMatrix,
    FitReport,
    FittedModel,
    InitMethod,
    LinearFactorFit,
    Panel,
    RawFactors,
    factor_grid,
)
from afm.utils.errors import DivergenceError, InvalidRankError, ShapeError, SingularityError
from afm.utils.rng import derive_seed, stream

logger = logging.getLogger(__name__)

# cells of the (series x time x candidate) cost block evaluated at once
_SEARCH_BLOCK = 4_000_000
_MIN_NEIGHBOURS = 5


def _rank_columns(values: np.ndarray) -> np.ndarray:
    """Columnwise ranks / (T + 1); ties go to the earlier time index."""
    values = np.asarray(values, dtype=np.float64)
    ranks = rankdata(values, method="ordinal", axis=0)
    return ranks / (values.shape[0] + 1.0)


def project_to_grid(raw: RawFactors) -> FactorMatrix:
    return FactorMatrix(values=_rank_columns(raw.values))


def _geodesic_coordinates(points: np.ndarray, q: int) -> np.ndarray:
    """Top-q principal coordinates of shortest-path distances on a symmetric k-nearest-neighbour graph.

    k starts near sqrt(T) and doubles until the graph is connected; the complete graph
    reduces to ordinary principal coordinates.
    """
    T = points.shape[0]
    distances = squareform(pdist(points))
    others = distances.copy()
    np.fill_diagonal(others, np.inf)
    k = min(T - 1, max(_MIN_NEIGHBOURS, int(round(np.sqrt(T)))))
    while True:
        nearest = np.argpartition(others, k - 1, axis=1)[:, :k]
        edges = np.zeros((T, T), dtype=bool)
        edges[np.arange(T)[:, None], nearest] = True
        edges |= edges.T
        graph = csgraph_from_dense(np.where(edges, distances, np.inf), null_value=np.inf)
        n_components, _ = connected_components(graph, directed=False)
        if n_components == 1 or k == T - 1:
            break
        logger.debug(f"neighbour graph with k={k} has {n_components} components")
        k = min(T - 1, 2 * k)
    geodesic = shortest_path(graph, method="D", directed=False)
    squared = geodesic ** 2
    gram = -0.5 * (squared - squared.mean(axis=0)[None, :] - squared.mean(axis=1)[:, None] + squared.mean())
    eigenvalues, eigenvectors = scipy.linalg.eigh(gram, subset_by_index=[T - q, T - 1])
    order = np.argsort(-eigenvalues, kind="stable")
    return eigenvectors[:, order] * np.sqrt(np.maximum(eigenvalues[order], 0.0))


def init_factors(panel: Panel, q: int, method: InitMethod = InitMethod.PCA_RANK, seed: int = 0) -> FactorMatrix:
    """Starting factors from ranked scores.

    pca_rank ranks the principal component scores, manifold ranks the leading coordinates of
    the geodesic distances between time points, random ranks uniform draws.
    """
    if q >= panel.N:
        raise InvalidRankError(f"number of factors q={q} must be smaller than the number of series N={panel.N}")
    method = InitMethod(method)
    if method == InitMethod.PCA_RANK:
        # time points are the observations
        _, s, vt = np.linalg.svd(panel.values, full_matrices=False)
        scores = vt[:q].T * s[:q]
    elif method == InitMethod.MANIFOLD:
        scores = _geodesic_coordinates(panel.values.T, q)
    else:
        scores = stream(seed, "init").uniform(size=(panel.T, q))
    return FactorMatrix(values=_rank_columns(scores))


def start_methods(config: EstimatorConfig) -> List[InitMethod]:
    """Initialization of each start: config.init, then the other deterministic start, then random draws."""
    methods = [InitMethod(config.init)]
    if methods[0] != InitMethod.RANDOM:
        methods += [m for m in (InitMethod.PCA_RANK, InitMethod.MANIFOLD) if m != methods[0]]
    methods += [InitMethod.RANDOM] * max(0, config.n_starts - len(methods))
    return methods[:config.n_starts]


def _stacked_design(basis: BasisSpec, factors: np.ndarray) -> np.ndarray:
    return np.hstack([design_matrix(basis, factors[:, l]) for l in range(factors.shape[1])])


def fit_functions_step(panel: Panel, factors: FactorMatrix, basis: BasisSpec, ridge: float = 1e-8) -> CoefficientTensor:
    """Ridge least squares of every series on [Psi(F_1) ... Psi(F_q)], then center each component."""
    f = factors.values
    T, q = f.shape
    if panel.T != T:
        raise ShapeError(f"panel has T={panel.T}, factors have T={T}")
    d = basis.dim
    design = _stacked_design(basis, f)
    target = panel.values.T
    if ridge > 0.0:
        design_aug = np.vstack([design, np.sqrt(ridge) * np.eye(q * d)])
        target_aug = np.vstack([target, np.zeros((q * d, panel.N))])
        solution, _, _, _ = scipy.linalg.lstsq(design_aug, target_aug)
    else:
        solution, _, rank, _ = scipy.linalg.lstsq(design, target)
        if rank < q * d:
            raise SingularityError(
                f"design of rank {rank} < q*d = {q * d}; the normal equations are singular, "
                f"use a positive ridge"
            )
    coeffs = solution.T.reshape(panel.N, q, d)

    # psi sums to one, so subtracting a constant from every coefficient shifts g by that constant
    for l in range(q):
        column_means = design[:, l * d:(l + 1) * d].mean(axis=0)
        coeffs[:, l, :] -= (coeffs[:, l, :] @ column_means)[:, None]
    return CoefficientTensor(values=coeffs)


def _grid_search(target: np.ndarray, candidates: np.ndarray) -> np.ndarray:
    """For each column t of target (N x T), the index c minimizing sum_i (target_it - candidates_ic)^2."""
    N, T = target.shape
    C = candidates.shape[1]
    block = max(1, _SEARCH_BLOCK // max(1, N * C))
    best = np.empty(T, dtype=np.int64)
    for start in range(0, T, block):
        stop = min(T, start + block)
        diff = target[:, start:stop, None] - candidates[:, None, :]
        cost = np.einsum("itc,itc->tc", diff, diff)
        best[start:stop] = np.argmin(cost, axis=1)
    return best


def fit_factors_step(
    panel: Panel,
    coeffs: CoefficientTensor,
    basis: BasisSpec,
    sweeps: int = 1,
    factors: Optional[FactorMatrix] = None,
) -> RawFactors:
    """Per time point, minimize the cross-sectional squared error over the factor grid.

    With q = 1 the search is exhaustive. With q > 1 each coordinate is searched in turn with
    the others held at their current values, `sweeps` times, starting from `factors`.
    """
    x = panel.values
    b = coeffs.values
    N, q, d = b.shape
    T = panel.T
    if N != panel.N or d != basis.dim:
        raise ShapeError(f"coefficients of shape {b.shape} do not match the panel and basis")
    grid = factor_grid(T)
    psi_grid = design_matrix(basis, grid)
    candidates = [b[:, l, :] @ psi_grid.T for l in range(q)]

    if q == 1:
        return RawFactors(values=grid[_grid_search(x, candidates[0])][:, None])

    if factors is None or factors.values.shape != (T, q):
        raise ShapeError(f"coordinate search over q={q} factors needs current T x q factors")
    index = np.rint(factors.values * (T + 1)).astype(np.int64) - 1
    components = [candidates[l][:, index[:, l]] for l in range(q)]
    for _ in range(sweeps):
        for l in range(q):
            others = np.sum([components[m] for m in range(q) if m != l], axis=0)
            index[:, l] = _grid_search(x - others, candidates[l])
            components[l] = candidates[l][:, index[:, l]]
    return RawFactors(values=grid[index])


def order_factors(model: FittedModel) -> FittedModel:
    """Sort factors so that sum_i ||g_il||_2 is non-increasing in l (stable for ties)."""
    b = model.coeffs.values
    strength = np.array([
        sum(l2_norm(model.basis, b[i, l]) for i in range(model.N)) for l in range(model.q)
    ])
    order = np.argsort(-strength, kind="stable")
    if np.array_equal(order, np.arange(model.q)):
        return model
    logger.debug(f"Reordering factors {order.tolist()} by strength {strength.tolist()}")
    return FittedModel(
        basis=model.basis,
        coeffs=CoefficientTensor(values=b[:, order, :]),
        factors=FactorMatrix(values=model.factors.values[:, order]),
        series_means=model.series_means,
        loss_trace=model.loss_trace,
        converged=model.converged,
        config=model.config,
    )


def _alternate(panel: Panel, start: FactorMatrix, basis: BasisSpec, config: EstimatorConfig):
    factors = start
    coeffs = fit_functions_step(panel, factors, basis, config.ridge)
    current = loss(panel, basis, coeffs, factors)
    if not np.isfinite(current):
        raise DivergenceError("initial loss is not finite")
    best = (coeffs, factors, current)
    trace, raw = [current], [current]
    converged = False
    iterations = 0
    for iteration in range(1, config.max_iter + 1):
        raw_factors = fit_factors_step(panel, coeffs, basis, config.factor_grid_sweeps, factors)
        factors = project_to_grid(raw_factors)
        coeffs = fit_functions_step(panel, factors, basis, config.ridge)
        current = loss(panel, basis, coeffs, factors)
        if not np.isfinite(current):
            raise DivergenceError(f"loss became {current} at iteration {iteration}")
        raw.append(current)
        best_loss = best[2]
        improvement = (best_loss - current) / best_loss if best_loss > 0.0 else 0.0
        if current < best_loss:
            best = (coeffs, factors, current)
        trace.append(best[2])
        iterations = iteration
        logger.debug(f"iteration {iteration}: loss={current:.6g} best={best[2]:.6g}")
        if improvement < config.rel_tol:
            converged = True
            break
    return best, trace, raw, iterations, converged


def fit(panel: Panel, config: EstimatorConfig) -> Tuple[FittedModel, FitReport]:
    """Estimate factors and loading functions; the best of `n_starts` starts is kept."""
    if config.q >= panel.N:
        raise InvalidRankError(f"number of factors q={config.q} must be smaller than N={panel.N}")
    centered, means = panel.centered()
    d = default_d(panel.T, config.eta) if config.d == "auto" else config.d
    basis = make_basis(d)
    logger.info(f"Fitting N={panel.N} T={panel.T} q={config.q} d={d} starts={config.n_starts}")

    winner = None
    start_losses = []
    for s, method in enumerate(start_methods(config)):
        start = init_factors(centered, config.q, method, derive_seed(config.seed, s))
        result = _alternate(centered, start, basis, config)
        start_losses.append(result[0][2])
        logger.debug(f"start {s} ({method.value}): loss={result[0][2]:.6g} after {result[3]} iterations")
        if winner is None or result[0][2] < winner[1][0][2]:
            winner = (s, result)

    start_index, ((coeffs, factors, final), trace, raw, iterations, converged) = winner
    if not converged:
        logger.warning(f"No convergence within max_iter={config.max_iter}; keeping best iterate")
    model = order_factors(FittedModel(
        basis=basis,
        coeffs=coeffs,
        factors=factors,
        series_means=means,
        loss_trace=tuple((i, float(v)) for i, v in enumerate(trace)),
        converged=converged,
        config=config,
    ))
    report = FitReport(
        n_iterations=iterations,
        final_loss=float(final),
        start_index=start_index,
        losses=[float(v) for v in trace],
        raw_losses=[float(v) for v in raw],
        start_losses=[float(v) for v in start_losses],
        converged=converged,
    )
    logger.info(f"Fit finished: loss={final:.6g} iterations={iterations} start={start_index}")
    return model, report


def evaluate_functions(model: FittedModel, points) -> np.ndarray:
    """N x q x P values of the fitted (centered) functions at points in [0, 1]."""
    return eval_spline(model.basis, model.coeffs.values, points)


def fitted_values(model: FittedModel) -> np.ndarray:
    """In-sample fit including the subtracted series means."""
    return model.series_means[:, None] + common_component(model.basis, model.coeffs.values, model.factors.values)


def fit_linear_baseline(panel: Panel, q: int) -> LinearFactorFit:
    """Linear factor model by principal components, x_it = alpha_i + beta_i' R_t + e_it."""
    if q >= panel.N:
        raise InvalidRankError(f"number of factors q={q} must be smaller than N={panel.N}")
    centered, means = panel.centered()
    u, s, vt = np.linalg.svd(centered.values, full_matrices=False)
    scale = np.sqrt(panel.T)
    return LinearFactorFit(
        intercepts=means,
        loadings=u[:, :q] * s[:q] / scale,
        scores=vt[:q].T * scale,
        explained_variance=(s ** 2 / np.sum(s ** 2))[:q],
    )


def fit_on_proxy(panel: Panel, proxy, d: Optional[int] = None, ridge: float = 1e-8) -> FittedModel:
    """Spline regression of every series on an observed proxy, placed on the grid by its ranks."""
    proxy = np.asarray(proxy, dtype=np.float64).ravel()
    if proxy.size != panel.T:
        raise ShapeError(f"proxy has {proxy.size} observations, panel has T={panel.T}")
    centered, means = panel.centered()
    config = EstimatorConfig(q=1, d=d or default_d(panel.T), ridge=ridge)
    basis = make_basis(config.d)
    factors = FactorMatrix(values=_rank_columns(proxy[:, None]))
    coeffs = fit_functions_step(centered, factors, basis, ridge)
    value = loss(centered, basis, coeffs, factors)
    return FittedModel(
        basis=basis, coeffs=coeffs, factors=factors, series_means=means,
        loss_trace=((0, value),), converged=True, config=config,
    )
