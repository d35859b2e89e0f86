"""
Subcommands: simulate, fit, eval, mc and transform, each a pure function of its input
files, its RunConfig and its seed.
"""
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Tuple

import numpy as np
import pandas as pd
from scipy.special import ndtri

from afm import __version__
from afm.config.config import settings
from afm.controllers.basis_controller import make_basis
from afm.controllers.estimator_controller import evaluate_functions, fit
from afm.controllers.metrics_controller import (
    RetargetedModel,
    align,
    apply_alignment,
    ar1_ols,
    ecdf_retargeting,
    gaussian_retargeting,
    interquartile_range,
    median_and_mad,
    mse_f,
    mse_g,
    retarget_factors,
)
from afm.controllers.simulation_controller import gen_panel
from afm.models.panel_model import CoefficientTensor, EstimatorConfig, FactorMatrix, FittedModel
from afm.models.run_model import MCCell, MCConfig, MCReplication, MCResult, RunConfig
from afm.models.simulation_model import DGPSpec, FactorSource, FunctionDescriptor, GroundTruth
from afm.storage import ensure_dir
from afm.storage.io_utils import (
    checksums,
    read_coeffs_csv,
    read_factors_csv,
    read_json,
    read_panel_csv,
    read_series_csv,
    write_coeffs_csv,
    write_factors_csv,
    write_frame_csv,
    write_ghat_grid_csv,
    write_json,
    write_panel_csv,
)
from afm.utils.errors import DataError, ParseError
from afm.utils.rng import STREAMS, derive_seed

logger = logging.getLogger(__name__)


def _out_dir(config: RunConfig) -> Path:
    return ensure_dir(config.out_dir or settings.OUTPUT_DIR)


def _manifest(out: Path, command: str, config: Dict[str, Any], seeds: Dict[str, Any], files: List[Path]) -> Path:
    return write_json(out / "manifest.json", {
        "tool": "afm",
        "version": __version__,
        "command": command,
        "config": config,
        "seeds": seeds,
        "files": checksums(files, root=out),
    })


def cmd_simulate(config: RunConfig) -> Dict[str, Path]:
    """Simulate a panel and write it with its ground truth."""
    config.require("dgp")
    dgp = config.dgp
    if config.seed is not None:
        dgp = DGPSpec(**{**dgp.model_dump(), "seed": config.seed})
    out = _out_dir(config)
    logger.info(f"Simulating N={dgp.N} T={dgp.T} q={dgp.q} seed={dgp.seed} into {out}")
    truth = gen_panel(dgp)

    files = {
        "panel": write_panel_csv(out / "panel.csv", truth.panel),
        "factors_true": write_factors_csv(out / "factors_true.csv", truth.factors),
        "functions_true": write_json(out / "functions_true.json", {
            "N": truth.N,
            "q": truth.q,
            "functions": [[fn.model_dump(mode="json") for fn in row] for row in truth.functions],
        }),
    }
    if truth.latent_z is not None:
        files["latent_z"] = write_factors_csv(out / "latent_z.csv", truth.latent_z, prefix="z")
    files["manifest"] = _manifest(
        out, "simulate", {"dgp": dgp.model_dump(mode="json")},
        {"master": dgp.seed, "streams": STREAMS}, list(files.values()),
    )
    return files


def _fit_report_document(model: FittedModel, report, series_ids) -> Dict[str, Any]:
    return {
        "loss_trace": [[i, v] for i, v in model.loss_trace],
        "final_loss": report.final_loss,
        "n_iterations": report.n_iterations,
        "start_index": report.start_index,
        "start_losses": report.start_losses,
        "raw_losses": report.raw_losses,
        "converged": report.converged,
        "seed": model.config.seed,
        "config": model.config.model_dump(mode="json"),
        "basis": {"degree": model.basis.degree, "dim": model.basis.dim, "knots": list(model.basis.knots)},
        "series_ids": list(series_ids),
        "series_means": model.series_means.tolist(),
    }


def cmd_fit(config: RunConfig) -> Dict[str, Path]:
    """Fit the additive factor model to panel.csv and write estimates and a report."""
    config.require("panel_path")
    estimator = config.estimator or EstimatorConfig(q=1, seed=settings.DEFAULT_SEED)
    if config.seed is not None:
        estimator = EstimatorConfig(**{**estimator.model_dump(), "seed": config.seed})
    panel = read_panel_csv(config.panel_path)
    out = _out_dir(config)
    model, report = fit(panel, estimator)
    series_ids, _ = panel.labels()

    points = np.linspace(0.0, 1.0, settings.GHAT_GRID_POINTS)
    files = {
        "factors_est": write_factors_csv(out / "factors_est.csv", model.factors),
        "coeffs": write_coeffs_csv(out / "coeffs.csv", model.coeffs.values, series_ids),
        "ghat_grid": write_ghat_grid_csv(out / "ghat_grid.csv", evaluate_functions(model, points), points, series_ids),
        "fit_report": write_json(out / "fit_report.json", _fit_report_document(model, report, series_ids)),
    }
    files["manifest"] = _manifest(
        out, "fit", {"estimator": estimator.model_dump(mode="json"), "panel_path": str(config.panel_path)},
        {"master": estimator.seed}, list(files.values()),
    )
    return files


def load_fitted_model(fit_dir) -> Tuple[FittedModel, List[str]]:
    """Rebuild a FittedModel from the files written by cmd_fit."""
    fit_dir = Path(fit_dir)
    document = read_json(fit_dir / "fit_report.json")
    coeffs, series_ids = read_coeffs_csv(fit_dir / "coeffs.csv")
    factors = read_factors_csv(fit_dir / "factors_est.csv")
    try:
        model = FittedModel(
            basis=make_basis(coeffs.shape[2]),
            coeffs=CoefficientTensor(values=coeffs),
            factors=FactorMatrix(values=factors),
            series_means=document["series_means"],
            loss_trace=tuple((int(i), float(v)) for i, v in document["loss_trace"]),
            converged=bool(document["converged"]),
            config=EstimatorConfig(**document["config"]),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise DataError(f"{fit_dir}: fitted artifacts are inconsistent ({e})") from e
    return model, series_ids


def load_truth(truth_dir) -> GroundTruth:
    truth_dir = Path(truth_dir)
    document = read_json(truth_dir / "functions_true.json")
    factors = read_factors_csv(truth_dir / "factors_true.csv")
    try:
        functions = [[FunctionDescriptor(**fn) for fn in row] for row in document["functions"]]
        return GroundTruth(functions=functions, factors=factors)
    except (KeyError, TypeError, ValueError) as e:
        raise ParseError(truth_dir / "functions_true.json", f"invalid ground truth ({e})") from e


def evaluate(model: FittedModel, truth: GroundTruth) -> Dict[str, Any]:
    alignment = align(model.factors, truth.factors)
    return {
        "mse_g": mse_g(model, truth, alignment),
        "mse_f": mse_f(model.factors, truth.factors, alignment),
        "alignment": {
            "permutation": [p + 1 for p in alignment.permutation],
            "reflect": list(alignment.reflect),
        },
    }


def cmd_eval(config: RunConfig) -> Dict[str, Any]:
    """Score fitted artifacts against simulated truth."""
    config.require("fit_dir", "truth_dir")
    model, _ = load_fitted_model(config.fit_dir)
    truth = load_truth(config.truth_dir)
    if (model.N, model.T, model.q) != (truth.N, truth.T, truth.q):
        raise DataError(
            f"{config.fit_dir} has N={model.N}, T={model.T}, q={model.q} but "
            f"{config.truth_dir} has N={truth.N}, T={truth.T}, q={truth.q}"
        )
    result = evaluate(model, truth)
    if config.out_dir:
        write_json(_out_dir(config) / "eval.json", result)
    logger.info(f"mse_g={result['mse_g']:.6g} mse_f={result['mse_f']:.6g}")
    return result


def cmd_transform(config: RunConfig) -> Dict[str, Path]:
    """Retarget estimated factors to a Gaussian (with AR(1) theta) or to an empirical distribution."""
    if not config.factors_path and not config.fit_dir:
        config.require("factors_path")
    factors_path = Path(config.factors_path or Path(config.fit_dir) / "factors_est.csv")
    factors = read_factors_csv(factors_path)
    out = _out_dir(config)
    files: Dict[str, Path] = {}

    if config.target == "gaussian":
        retargeting = gaussian_retargeting()
        z = retarget_factors(factors, ndtri)
        theta = [ar1_ols(z[:, l], intercept=config.intercept) for l in range(z.shape[1])]
        files["z"] = write_factors_csv(out / "z.csv", z, prefix="z")
        files["theta"] = write_json(out / "theta.json", {"theta_hat": theta, "intercept": config.intercept})
        logger.info(f"theta_hat={theta}")
    else:
        reference_path = config.target[len("ecdf:"):]
        retargeting = ecdf_retargeting(read_series_csv(reference_path))
        files["retargeted"] = write_factors_csv(out / "retargeted.csv", retarget_factors(factors, retargeting.quantile))

    if config.fit_dir:
        model, series_ids = load_fitted_model(config.fit_dir)
        view = RetargetedModel(model, retargeting)
        grid = retargeting.quantile(np.linspace(0.0, 1.0, settings.GHAT_GRID_POINTS + 2)[1:-1])
        files["ghat_retargeted"] = write_ghat_grid_csv(out / "ghat_retargeted.csv", view.evaluate(grid), grid, series_ids)
    files["manifest"] = _manifest(
        out, "transform", {"target": config.target, "factors_path": str(factors_path), "intercept": config.intercept},
        {}, list(files.values()),
    )
    return files


def run_replication(task: Tuple[int, int, int, int, int, Dict[str, Any], Dict[str, Any]]) -> MCReplication:
    """One simulate -> fit -> evaluate replication; failures are recorded, not raised."""
    N, T, q, rep, seed, mc, estimator = task
    started = time.perf_counter()
    record = {"N": N, "T": T, "q": q, "rep": rep, "seed": seed}
    try:
        mc = MCConfig(**mc)
        truth = gen_panel(DGPSpec(
            N=N, T=T, q=q, function_source=mc.function_source, noise_sd=mc.noise_sd,
            factor_source=mc.factor_source, theta=mc.theta, burn_in=mc.burn_in, seed=seed,
        ))
        model, report = fit(truth.panel, EstimatorConfig(**{**estimator, "q": q, "seed": seed}))
        alignment = align(model.factors, truth.factors)
        record.update(
            mse_g=mse_g(model, truth, alignment),
            mse_f=mse_f(model.factors, truth.factors, alignment),
            iterations=report.n_iterations,
        )
        if mc.factor_source == FactorSource.AR1_COPULA:
            z = ndtri(apply_alignment(model.factors, alignment)[:, 0])
            record["theta_hat"] = ar1_ols(z)
    except Exception as e:
        logger.warning(f"Replication N={N} T={T} q={q} rep={rep} failed: {type(e).__name__}: {e}")
        record["error"] = f"{type(e).__name__}: {e}"
    record["seconds"] = time.perf_counter() - started
    return MCReplication(**record)


def _summarize(key: Tuple[int, int, int], runs: List[MCReplication]) -> MCCell:
    N, T, q = key
    ok = [r for r in runs if r.error is None]
    cell = {"N": N, "T": T, "q": q, "replications": len(runs), "failures": len(runs) - len(ok),
            "seconds": sum(r.seconds for r in runs)}
    if ok:
        cell["mse_g_median"], cell["mse_g_mad"] = median_and_mad([r.mse_g for r in ok])
        cell["mse_f_median"], cell["mse_f_mad"] = median_and_mad([r.mse_f for r in ok])
        thetas = [r.theta_hat for r in ok if r.theta_hat is not None]
        if thetas:
            cell["theta_median"], cell["theta_mad"] = median_and_mad(thetas)
            cell["theta_iqr"] = interquartile_range(thetas)
    return MCCell(**cell)


def _table(cells: List[MCCell], Ts: List[int], with_theta: bool) -> pd.DataFrame:
    """Rows (q, N), one block of columns per T: medians with MADs."""
    stats = ["mse_g_median", "mse_g_mad", "mse_f_median", "mse_f_mad"]
    if with_theta:
        stats += ["theta_median", "theta_mad", "theta_iqr"]
    rows: Dict[Tuple[int, int], Dict[str, Any]] = {}
    for cell in cells:
        row = rows.setdefault((cell.q, cell.N), {"q": cell.q, "N": cell.N})
        for stat in stats:
            row[f"T{cell.T}_{stat}"] = getattr(cell, stat)
        row[f"T{cell.T}_failures"] = cell.failures
    columns = ["q", "N"] + [f"T{T}_{s}" for T in Ts for s in stats + ["failures"]]
    return pd.DataFrame(list(rows.values())).reindex(columns=columns)


def cmd_mc(config: RunConfig) -> MCResult:
    """Replicate simulate -> fit -> eval over the (N, T, q) grid."""
    mc = config.mc
    master = config.seed if config.seed is not None else settings.DEFAULT_SEED
    workers = config.workers or settings.WORKERS
    estimator = (config.estimator or EstimatorConfig(q=1)).model_dump(mode="json")
    out = _out_dir(config)

    keys = [(N, T, q) for q in mc.q for N in mc.N for T in mc.T]
    mc_document = mc.model_dump(mode="json")
    tasks = [
        (N, T, q, rep, derive_seed(master, N, T, q, rep), mc_document, estimator)
        for (N, T, q) in keys for rep in range(mc.replications)
    ]
    logger.info(f"Monte Carlo: {len(keys)} cells x {mc.replications} replications on {workers} worker(s)")
    if workers == 1:
        raw = [run_replication(task) for task in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            raw = list(pool.map(run_replication, tasks))

    cells = []
    for key in keys:
        cell = _summarize(key, [r for r in raw if (r.N, r.T, r.q) == key])
        if cell.flagged:
            logger.warning(f"Cell N={cell.N} T={cell.T} q={cell.q}: {cell.failures} failed replication(s)")
        logger.info(f"Cell N={cell.N} T={cell.T} q={cell.q}: median mse_g={cell.mse_g_median} mse_f={cell.mse_f_median}")
        cells.append(cell)

    with_theta = mc.factor_source == FactorSource.AR1_COPULA
    raw_frame = pd.DataFrame([r.model_dump(exclude={"seconds"}) for r in raw])
    raw_frame["seed"] = raw_frame["seed"].astype(str)
    files = [
        write_frame_csv(out / "raw.csv", raw_frame),
        write_frame_csv(out / "table.csv", _table(cells, mc.T, with_theta)),
    ]
    write_json(out / "timing.json", {
        "workers": workers,
        "cells": [{"N": c.N, "T": c.T, "q": c.q, "seconds": c.seconds} for c in cells],
    })
    _manifest(out, "mc", {"mc": mc_document, "estimator": estimator}, {"master": master}, files)
    return MCResult(cells=cells, raw=raw)
