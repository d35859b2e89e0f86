from enum import Enum
from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from afm.models.base import ArrayModel, frozen_array
from afm.models.basis_model import FourierLoading
from afm.models.panel_model import Panel


class FunctionSource(str, Enum):
    RANDOM_FOURIER = "random_fourier"
    FIXED_SUITE_PLUS_FOURIER = "fixed_suite_plus_fourier"


class FactorSource(str, Enum):
    IID_UNIFORM = "iid_uniform"
    AR1_COPULA = "ar1_copula"


class DGPSpec(BaseModel):
    """Data-generating process for a simulated panel."""
    model_config = ConfigDict(frozen=True)

    N: int = Field(..., ge=1)
    T: int = Field(..., ge=2)
    q: int = Field(1, ge=1)
    function_source: FunctionSource = FunctionSource.RANDOM_FOURIER
    noise_sd: float = Field(1.0, ge=0.0, description="Standard deviation of the idiosyncratic noise.")
    factor_source: FactorSource = FactorSource.IID_UNIFORM
    theta: float = Field(0.5, description="AR(1) coefficient of the latent Gaussian process.")
    burn_in: int = Field(100, ge=0)
    seed: int = Field(0, ge=0, lt=2**64)

    @model_validator(mode="after")
    def _check(self) -> "DGPSpec":
        if self.function_source == FunctionSource.FIXED_SUITE_PLUS_FOURIER:
            if self.q != 1:
                raise ValueError("fixed_suite_plus_fourier requires q = 1")
            if self.N < 9:
                raise ValueError("fixed_suite_plus_fourier requires N >= 9")
        if self.factor_source == FactorSource.AR1_COPULA and not abs(self.theta) < 1.0:
            raise ValueError("ar1_copula requires |theta| < 1")
        return self


class FunctionDescriptor(BaseModel):
    """One true loading function: a member of the fixed suite or a Fourier sum."""
    model_config = ConfigDict(frozen=True)

    kind: Literal["suite", "fourier"]
    index: Optional[int] = Field(None, ge=1, le=9, description="Suite function number, 1..9.")
    fourier: Optional[FourierLoading] = None

    @model_validator(mode="after")
    def _check(self) -> "FunctionDescriptor":
        if self.kind == "suite" and self.index is None:
            raise ValueError("suite descriptor needs an index")
        if self.kind == "fourier" and self.fourier is None:
            raise ValueError("fourier descriptor needs coefficients")
        return self


class GroundTruth(ArrayModel):
    """True functions and factors; noise and panel are absent when loaded for evaluation only."""
    functions: List[List[FunctionDescriptor]]
    factors: np.ndarray
    latent_z: Optional[np.ndarray] = None
    noise: Optional[np.ndarray] = None
    panel: Optional[Panel] = None

    @field_validator("factors", mode="before")
    @classmethod
    def _factors(cls, value):
        return frozen_array(value, 2, "true factors")

    @field_validator("latent_z", "noise", mode="before")
    @classmethod
    def _optional(cls, value):
        return None if value is None else frozen_array(value, 2, "array")

    @model_validator(mode="after")
    def _shapes(self) -> "GroundTruth":
        T, q = self.factors.shape
        if any(len(row) != q for row in self.functions):
            raise ValueError(f"every series needs {q} functions")
        N = len(self.functions)
        if self.latent_z is not None and self.latent_z.shape != (T, q):
            raise ValueError("latent_z must match the factor shape")
        if self.noise is not None and self.noise.shape != (N, T):
            raise ValueError("noise must be N x T")
        if self.panel is not None and self.panel.values.shape != (N, T):
            raise ValueError("panel must be N x T")
        return self

    @property
    def N(self) -> int:
        return len(self.functions)

    @property
    def T(self) -> int:
        return self.factors.shape[0]

    @property
    def q(self) -> int:
        return self.factors.shape[1]
