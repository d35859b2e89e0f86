from typing import Literal, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class BasisSpec(BaseModel):
    """Clamped cubic B-spline basis on [0, 1] with evenly spaced interior knots."""
    model_config = ConfigDict(frozen=True)

    degree: Literal[3] = 3
    dim: int = Field(..., ge=4, description="Number of basis functions d.")
    knots: Tuple[float, ...] = Field(..., description="Clamped knot sequence of length dim + degree + 1.")

    @model_validator(mode="after")
    def _check_knots(self) -> "BasisSpec":
        knots = np.asarray(self.knots)
        p = self.degree
        if knots.size != self.dim + p + 1:
            raise ValueError(f"expected {self.dim + p + 1} knots, got {knots.size}")
        if np.any(knots[: p + 1] != 0.0) or np.any(knots[-(p + 1):] != 1.0):
            raise ValueError("knots must be clamped at 0 and 1")
        breaks = knots[p: self.dim + 1]
        steps = np.diff(breaks)
        if np.any(steps <= 0.0):
            raise ValueError("interior knots must be strictly increasing")
        if np.max(np.abs(steps - steps[0])) > 1e-12:
            raise ValueError("interior knots must be evenly spaced")
        return self

    @property
    def knot_array(self) -> np.ndarray:
        return np.asarray(self.knots, dtype=np.float64)

    @property
    def breakpoints(self) -> np.ndarray:
        """Distinct knots 0 = u_0 < ... < u_m = 1."""
        return self.knot_array[self.degree: self.dim + 1]


class FourierLoading(BaseModel):
    """Coefficients of h_{a,b}(x) = sum_m (a_m/m) cos(pi m x) + (b_m/m) sin(pi m x), m = 1..5."""
    model_config = ConfigDict(frozen=True)

    a: Tuple[float, float, float, float, float]
    b: Tuple[float, float, float, float, float]

    @field_validator("a", "b", mode="before")
    @classmethod
    def _to_tuple(cls, value):
        return tuple(float(v) for v in np.asarray(value, dtype=np.float64).ravel())
