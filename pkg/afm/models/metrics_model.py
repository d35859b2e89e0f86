from typing import Callable, List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


class Alignment(BaseModel):
    """Matches estimated factor k to true factor permutation[k], optionally reflected (1 - f)."""
    model_config = ConfigDict(frozen=True)

    permutation: Tuple[int, ...] = Field(..., description="0-based true index for each estimated index.")
    reflect: Tuple[bool, ...]

    @model_validator(mode="after")
    def _bijection(self) -> "Alignment":
        q = len(self.permutation)
        if sorted(self.permutation) != list(range(q)):
            raise ValueError(f"permutation {self.permutation} is not a bijection on 0..{q - 1}")
        if len(self.reflect) != q:
            raise ValueError("reflect needs one flag per factor")
        return self

    @classmethod
    def identity(cls, q: int) -> "Alignment":
        return cls(permutation=tuple(range(q)), reflect=(False,) * q)


class Retargeting(BaseModel):
    """A target distribution given by its quantile function and CDF."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    name: str
    quantile: Callable[[np.ndarray], np.ndarray]
    cdf: Callable[[np.ndarray], np.ndarray]


class FactorCorrelation(BaseModel):
    pearson: List[float]
    spearman: List[float]
