"""Run configuration documents and Monte Carlo results."""
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from afm.models.panel_model import EstimatorConfig
from afm.models.simulation_model import DGPSpec, FactorSource, FunctionSource
from afm.utils.errors import ConfigError


class MCConfig(BaseModel):
    """Monte Carlo grid and data-generating template."""
    N: List[int] = Field(default_factory=lambda: [10, 50, 100, 200])
    T: List[int] = Field(default_factory=lambda: [100, 200, 500])
    q: List[int] = Field(default_factory=lambda: [1, 2, 3])
    replications: int = Field(200, ge=1)
    function_source: FunctionSource = FunctionSource.RANDOM_FOURIER
    factor_source: FactorSource = FactorSource.IID_UNIFORM
    noise_sd: float = Field(1.0, ge=0.0)
    theta: float = 0.5
    burn_in: int = Field(100, ge=0)

    @field_validator("N", "T", "q")
    @classmethod
    def _non_empty(cls, value):
        if not value:
            raise ValueError("grid axes must be non-empty")
        return value


class RunConfig(BaseModel):
    """Parameters of one CLI subcommand, loadable from a JSON document."""
    model_config = ConfigDict(extra="forbid")

    out_dir: Optional[str] = None
    seed: Optional[int] = Field(None, ge=0, lt=2**64)
    workers: Optional[int] = Field(None, ge=1)

    dgp: Optional[DGPSpec] = None
    estimator: Optional[EstimatorConfig] = None
    mc: MCConfig = Field(default_factory=MCConfig)

    panel_path: Optional[str] = None
    fit_dir: Optional[str] = Field(None, description="Directory holding factors_est.csv, coeffs.csv and fit_report.json.")
    truth_dir: Optional[str] = Field(None, description="Directory holding factors_true.csv and functions_true.json.")
    factors_path: Optional[str] = None
    target: str = Field("gaussian", description="'gaussian' or 'ecdf:<reference csv>'.")
    intercept: bool = False

    @field_validator("target")
    @classmethod
    def _target(cls, value: str) -> str:
        if value != "gaussian" and not (value.startswith("ecdf:") and len(value) > len("ecdf:")):
            raise ValueError("target must be 'gaussian' or 'ecdf:<file>'")
        return value

    def require(self, *fields: str) -> None:
        """Raise ConfigError unless every named field is set and non-empty."""
        missing = [f for f in fields if getattr(self, f) in (None, "")]
        if missing:
            raise ConfigError(f"missing required config field(s): {', '.join(missing)}")


class MCReplication(BaseModel):
    N: int
    T: int
    q: int
    rep: int
    seed: int
    mse_g: Optional[float] = None
    mse_f: Optional[float] = None
    theta_hat: Optional[float] = None
    iterations: Optional[int] = None
    error: Optional[str] = None
    seconds: float = 0.0


class MCCell(BaseModel):
    N: int
    T: int
    q: int
    replications: int
    failures: int
    mse_g_median: Optional[float] = None
    mse_g_mad: Optional[float] = None
    mse_f_median: Optional[float] = None
    mse_f_mad: Optional[float] = None
    theta_median: Optional[float] = None
    theta_mad: Optional[float] = None
    theta_iqr: Optional[float] = None
    seconds: float = 0.0

    @property
    def flagged(self) -> bool:
        return self.failures > 0


class MCResult(BaseModel):
    cells: List[MCCell]
    raw: List[MCReplication]
