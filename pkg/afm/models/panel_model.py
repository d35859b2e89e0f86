"""Domain types shared by estimation, simulation and evaluation."""
from enum import Enum
from typing import List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from afm.models.base import ArrayModel, frozen_array
from afm.models.basis_model import BasisSpec


def factor_grid(T: int) -> np.ndarray:
    """The sieve grid (1/(T+1), ..., T/(T+1))."""
    return np.arange(1, T + 1, dtype=np.float64) / (T + 1)


def is_valid_factor_column(column: np.ndarray, atol: float = 1e-12) -> bool:
    column = np.asarray(column, dtype=np.float64)
    return bool(np.allclose(np.sort(column), factor_grid(column.size), rtol=0.0, atol=atol))


class Panel(ArrayModel):
    """N x T panel of observations, rows are series."""
    values: np.ndarray
    series_ids: Optional[Tuple[str, ...]] = None
    time_ids: Optional[Tuple[str, ...]] = None

    @field_validator("values", mode="before")
    @classmethod
    def _values(cls, value):
        arr = frozen_array(value, 2, "panel")
        if not np.all(np.isfinite(arr)):
            raise ValueError("panel entries must be finite")
        if arr.shape[0] < 1 or arr.shape[1] < 2:
            raise ValueError(f"panel needs N >= 1 and T >= 2, got shape {arr.shape}")
        return arr

    @model_validator(mode="after")
    def _ids(self) -> "Panel":
        N, T = self.values.shape
        if self.series_ids is not None and len(self.series_ids) != N:
            raise ValueError(f"{len(self.series_ids)} series ids for {N} series")
        if self.time_ids is not None and len(self.time_ids) != T:
            raise ValueError(f"{len(self.time_ids)} time ids for {T} time points")
        return self

    @property
    def N(self) -> int:
        return self.values.shape[0]

    @property
    def T(self) -> int:
        return self.values.shape[1]

    def labels(self) -> Tuple[Tuple[str, ...], Tuple[str, ...]]:
        series = self.series_ids or tuple(f"s{i + 1}" for i in range(self.N))
        times = self.time_ids or tuple(f"t{t + 1}" for t in range(self.T))
        return series, times

    def centered(self) -> Tuple["Panel", np.ndarray]:
        """Subtract each series' sample mean; returns the centered panel and the means."""
        means = self.values.mean(axis=1)
        centered = Panel(values=self.values - means[:, None],
                         series_ids=self.series_ids, time_ids=self.time_ids)
        return centered, means


class RawFactors(ArrayModel):
    """Unprojected T x q factor values in [0, 1]."""
    values: np.ndarray

    @field_validator("values", mode="before")
    @classmethod
    def _values(cls, value):
        arr = frozen_array(value, 2, "raw factors")
        if np.any(arr < 0.0) or np.any(arr > 1.0) or not np.all(np.isfinite(arr)):
            raise ValueError("raw factors must lie in [0, 1]")
        return arr


class FactorMatrix(ArrayModel):
    """T x q factors, each column a permutation of the grid 1/(T+1), ..., T/(T+1)."""
    values: np.ndarray

    @field_validator("values", mode="before")
    @classmethod
    def _values(cls, value):
        arr = frozen_array(value, 2, "factors")
        if arr.shape[1] < 1:
            raise ValueError("factors need at least one column")
        for l in range(arr.shape[1]):
            if not is_valid_factor_column(arr[:, l]):
                raise ValueError(f"factor column {l} is not a permutation of the grid")
        return arr

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def q(self) -> int:
        return self.values.shape[1]


class CoefficientTensor(ArrayModel):
    """Spline coefficients b_ild, shape N x q x d."""
    values: np.ndarray

    @field_validator("values", mode="before")
    @classmethod
    def _values(cls, value):
        arr = frozen_array(value, 3, "coefficients")
        if not np.all(np.isfinite(arr)):
            raise ValueError("coefficients must be finite")
        return arr


class InitMethod(str, Enum):
    PCA_RANK = "pca_rank"
    MANIFOLD = "manifold"
    RANDOM = "random"


class EstimatorConfig(BaseModel):
    """Settings of the alternating least squares estimator."""
    model_config = ConfigDict(frozen=True)

    q: int = Field(..., ge=1, description="Number of latent factors.")
    d: Union[int, Literal["auto"]] = Field("auto", description="Basis dimension, or 'auto' for the T-based rule.")
    eta: float = Field(1.0, ge=1.0, description="Smoothness index used by the automatic dimension rule.")
    max_iter: int = Field(100, ge=1)
    rel_tol: float = Field(1e-6, gt=0.0)
    ridge: float = Field(1e-8, ge=0.0)
    n_starts: int = Field(2, ge=1, description="Starts: config.init, the other deterministic start, then random.")
    seed: int = Field(0, ge=0, lt=2**64)
    factor_grid_sweeps: int = Field(1, ge=1)
    init: InitMethod = InitMethod.PCA_RANK

    @field_validator("d")
    @classmethod
    def _d(cls, value):
        if value != "auto" and value < 4:
            raise ValueError("d must be at least 4 or 'auto'")
        return value


class FitReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_iterations: int
    final_loss: float
    start_index: int
    losses: List[float] = Field(..., description="Best-so-far loss after each outer iteration of the winning start.")
    raw_losses: List[float] = Field(..., description="Loss of each iterate of the winning start.")
    start_losses: List[float] = Field(..., description="Final loss of every start.")
    converged: bool


class FittedModel(ArrayModel):
    """Estimated basis, coefficients, factors and series means."""
    basis: BasisSpec
    coeffs: CoefficientTensor
    factors: FactorMatrix
    series_means: np.ndarray
    loss_trace: Tuple[Tuple[int, float], ...]
    converged: bool
    config: EstimatorConfig

    @field_validator("series_means", mode="before")
    @classmethod
    def _means(cls, value):
        return frozen_array(value, 1, "series means")

    @model_validator(mode="after")
    def _consistent(self) -> "FittedModel":
        N, q, d = self.coeffs.values.shape
        if d != self.basis.dim:
            raise ValueError(f"coefficients have d={d}, basis has d={self.basis.dim}")
        if self.factors.q != q:
            raise ValueError(f"coefficients have q={q}, factors have q={self.factors.q}")
        if self.series_means.size != N:
            raise ValueError(f"coefficients have N={N}, series means have {self.series_means.size}")
        if self.loss_trace and self.loss_trace[-1][1] > self.loss_trace[0][1]:
            raise ValueError("loss trace must end at or below its first entry")
        return self

    @property
    def N(self) -> int:
        return self.coeffs.values.shape[0]

    @property
    def T(self) -> int:
        return self.factors.T

    @property
    def q(self) -> int:
        return self.factors.q

    @property
    def d(self) -> int:
        return self.basis.dim

    @property
    def final_loss(self) -> float:
        return self.loss_trace[-1][1] if self.loss_trace else float("nan")


class LinearFactorFit(ArrayModel):
    """Principal-components linear factor model x_it = alpha_i + beta_i' R_t + e_it."""
    intercepts: np.ndarray
    loadings: np.ndarray
    scores: np.ndarray
    explained_variance: np.ndarray

    def fitted_values(self) -> np.ndarray:
        return self.intercepts[:, None] + self.loadings @ self.scores.T
