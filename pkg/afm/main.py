import logging

import numpy as np
from fastapi import FastAPI, HTTPException

from afm import __version__
from afm.config.config import settings
from afm.controllers.estimator_controller import fit
from afm.controllers.metrics_controller import ar1_ols, ecdf_retargeting, gaussian_retargeting, retarget_factors
from afm.controllers.run_controller import evaluate
from afm.controllers.simulation_controller import gen_panel
from afm.models.api_model import (
    EvaluateRequest,
    EvaluateResponse,
    FitRequest,
    FitResponse,
    SimulateResponse,
    TransformRequest,
    TransformResponse,
    TransformTarget,
)
from afm.models.panel_model import Panel
from afm.models.simulation_model import DGPSpec
from afm.utils.errors import AFMError, NumericalError

logger = logging.getLogger(__name__)

app = FastAPI(title="Additive Factor Model Service", version=__version__)


def _http_error(e: Exception) -> HTTPException:
    status = 500 if isinstance(e, NumericalError) else 400
    logger.error(f"Request failed: {type(e).__name__}: {e}")
    return HTTPException(status_code=status, detail=str(e))


@app.on_event("startup")
async def configure_logging():
    logging.basicConfig(level=settings.LOG_LEVEL.upper())
    logger.info(f"Additive factor model service {__version__} starting")


@app.get("/health")
def health_check():
    return {"status": "ok", "version": __version__}


@app.post("/simulate", response_model=SimulateResponse)
def simulate(spec: DGPSpec):
    """Simulate a panel and return it with its ground truth."""
    try:
        truth = gen_panel(spec)
    except (AFMError, ValueError) as e:
        raise _http_error(e)
    return SimulateResponse(
        panel=truth.panel.values.tolist(),
        factors=truth.factors.tolist(),
        latent_z=None if truth.latent_z is None else truth.latent_z.tolist(),
        functions=truth.functions,
    )


@app.post("/fit", response_model=FitResponse)
def fit_panel(request: FitRequest):
    """Estimate factors and loading functions of a posted panel."""
    try:
        panel = Panel(values=np.asarray(request.panel, dtype=np.float64),
                      series_ids=tuple(request.series_ids) if request.series_ids else None)
        model, report = fit(panel, request.estimator)
    except (AFMError, ValueError) as e:
        raise _http_error(e)
    return FitResponse(
        factors=model.factors.values.tolist(),
        coeffs=model.coeffs.values.tolist(),
        series_means=model.series_means.tolist(),
        basis_dim=model.basis.dim,
        knots=list(model.basis.knots),
        loss_trace=[[i, v] for i, v in model.loss_trace],
        final_loss=report.final_loss,
        n_iterations=report.n_iterations,
        converged=report.converged,
    )


@app.post("/evaluate", response_model=EvaluateResponse)
def evaluate_dgp(request: EvaluateRequest):
    """Simulate, fit and score one replication."""
    try:
        truth = gen_panel(request.dgp)
        model, report = fit(truth.panel, request.estimator)
        result = evaluate(model, truth)
    except (AFMError, ValueError) as e:
        raise _http_error(e)
    return EvaluateResponse(
        mse_g=result["mse_g"],
        mse_f=result["mse_f"],
        permutation=result["alignment"]["permutation"],
        reflect=result["alignment"]["reflect"],
        final_loss=report.final_loss,
    )


@app.post("/transform", response_model=TransformResponse)
def transform(request: TransformRequest):
    """Map factors to a Gaussian (with AR(1) theta) or to the distribution of a reference sample."""
    try:
        factors = np.asarray(request.factors, dtype=np.float64)
        if request.target == TransformTarget.GAUSSIAN:
            values = retarget_factors(factors, gaussian_retargeting().quantile)
            theta = [ar1_ols(values[:, l], intercept=request.intercept) for l in range(values.shape[1])]
            return TransformResponse(values=values.tolist(), theta_hat=theta)
        if request.reference is None:
            raise HTTPException(status_code=400, detail="the ecdf target needs a reference sample")
        values = retarget_factors(factors, ecdf_retargeting(request.reference).quantile)
        return TransformResponse(values=values.tolist())
    except (AFMError, ValueError) as e:
        raise _http_error(e)
