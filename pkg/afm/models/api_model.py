"""Request and response bodies of the HTTP API."""
from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, Field

from afm.models.panel_model import EstimatorConfig
from afm.models.simulation_model import DGPSpec, FunctionDescriptor


class SimulateResponse(BaseModel):
    panel: List[List[float]] = Field(..., description="N x T simulated observations.")
    factors: List[List[float]] = Field(..., description="T x q true factors.")
    latent_z: Optional[List[List[float]]] = None
    functions: List[List[FunctionDescriptor]]


class FitRequest(BaseModel):
    panel: List[List[float]] = Field(..., description="N x T observations, one row per series.")
    series_ids: Optional[List[str]] = None
    estimator: EstimatorConfig


class FitResponse(BaseModel):
    factors: List[List[float]]
    coeffs: List[List[List[float]]]
    series_means: List[float]
    basis_dim: int
    knots: List[float]
    loss_trace: List[List[float]]
    final_loss: float
    n_iterations: int
    converged: bool


class EvaluateRequest(BaseModel):
    dgp: DGPSpec
    estimator: EstimatorConfig


class EvaluateResponse(BaseModel):
    mse_g: float
    mse_f: float
    permutation: List[int] = Field(..., description="1-based true factor matched to each estimated factor.")
    reflect: List[bool]
    final_loss: float


class TransformTarget(str, Enum):
    GAUSSIAN = "gaussian"
    ECDF = "ecdf"


class TransformRequest(BaseModel):
    factors: List[List[float]] = Field(..., description="T x q factors in (0, 1).")
    target: TransformTarget = TransformTarget.GAUSSIAN
    reference: Optional[List[float]] = Field(None, description="Reference sample for the ecdf target.")
    intercept: bool = False


class TransformResponse(BaseModel):
    values: List[List[float]]
    theta_hat: Optional[List[float]] = None
