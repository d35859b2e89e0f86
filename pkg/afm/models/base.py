"""Common base for value objects holding numpy arrays."""
import numpy as np
from pydantic import BaseModel, ConfigDict


def frozen_array(values, ndim: int, name: str) -> np.ndarray:
    """Copy `values` into a read-only float64 array with `ndim` dimensions."""
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


class ArrayModel(BaseModel):
    """Immutable pydantic model allowed to carry numpy arrays."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)
