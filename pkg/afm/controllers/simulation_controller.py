"""
Data-generating processes for simulated panels: random Fourier loadings, the fixed
nine-function suite, i.i.d. uniform or Gaussian-copula AR(1) factors, Gaussian noise.
"""
import logging
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy.signal import lfilter
from scipy.special import expit, ndtr

from afm.controllers.basis_controller import eval_fourier
from afm.models.basis_model import FourierLoading
from afm.models.panel_model import Panel
from afm.models.simulation_model import DGPSpec, FactorSource, FunctionDescriptor, FunctionSource, GroundTruth
from afm.utils.errors import NonstationaryError
from afm.utils.rng import stream

logger = logging.getLogger(__name__)


def _g1(x):
    return 2.0 * x


def _g2(x):
    return 10.0 * (x - 0.5) ** 2


def _g3(x):
    return 1.5 * np.cos(3.0 * np.pi * x)


def _g4(x):
    return 1.5 * np.sin(2.0 * np.pi * x)


def _g5(x):
    return 10.0 * (x - 0.5) ** 3


def _g6(x):
    s = np.sin(2.0 * np.pi * x)
    return 2.0 * s / (2.0 - s)


def _g7(x):
    return np.sin(2.0 * np.pi * x) ** 3


def _g8(x):
    return 2.0 * np.sqrt(x)


def _g9(x):
    # 2 exp(u) / (1 + exp(u)) with u = 10 (x - 1/2)
    return 2.0 * expit(10.0 * (x - 0.5))


_SUITE = (_g1, _g2, _g3, _g4, _g5, _g6, _g7, _g8, _g9)


def fixed_function_suite() -> List[Callable[[np.ndarray], np.ndarray]]:
    """g_1 ... g_9 of the dependent-factor study, vectorized over x."""
    return list(_SUITE)


def gen_random_functions(N: int, q: int, seed: int) -> List[List[FourierLoading]]:
    """N x q Fourier loadings with i.i.d. standard normal a_m, b_m."""
    draws = stream(seed, "functions").standard_normal((N, q, 2, 5))
    return [[FourierLoading(a=draws[i, l, 0], b=draws[i, l, 1]) for l in range(q)] for i in range(N)]


def gen_factors_iid(T: int, q: int, seed: int) -> np.ndarray:
    return stream(seed, "factors").uniform(size=(T, q))


def gen_factors_ar1(T: int, q: int, theta: float, burn_in: int, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """f_t = Phi(z_t), z_t = theta z_{t-1} + v_t started at z_0 = 0, first burn_in draws dropped.

    Phi is the standard normal CDF, so f_t is only exactly uniform when theta = 0.
    """
    if not abs(theta) < 1.0:
        raise NonstationaryError(f"AR(1) coefficient must satisfy |theta| < 1, got {theta}")
    innovations = stream(seed, "factors").standard_normal((burn_in + T, q))
    z = lfilter([1.0], [1.0, -theta], innovations, axis=0)[burn_in:]
    return ndtr(z), z


def eval_descriptor(descriptor: FunctionDescriptor, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if descriptor.kind == "suite":
        return _SUITE[descriptor.index - 1](x)
    return np.asarray(eval_fourier(descriptor.fourier, x))


def true_components(functions: List[List[FunctionDescriptor]], factors) -> np.ndarray:
    """N x q x T values g_il(f_tl)."""
    factors = np.asarray(factors, dtype=np.float64)
    N, q = len(functions), factors.shape[1]
    out = np.empty((N, q, factors.shape[0]))
    for i in range(N):
        for l in range(q):
            out[i, l] = eval_descriptor(functions[i][l], factors[:, l])
    return out


def _descriptors(spec: DGPSpec) -> List[List[FunctionDescriptor]]:
    fourier = gen_random_functions(spec.N, spec.q, spec.seed)
    rows = [[FunctionDescriptor(kind="fourier", fourier=h) for h in row] for row in fourier]
    if spec.function_source == FunctionSource.FIXED_SUITE_PLUS_FOURIER:
        for i in range(9):
            rows[i] = [FunctionDescriptor(kind="suite", index=i + 1)]
    return rows


def gen_panel(spec: DGPSpec) -> GroundTruth:
    """x_it = sum_l g_il(f_tl) + eps_it with eps_it ~ N(0, noise_sd^2)."""
    functions = _descriptors(spec)
    latent: Optional[np.ndarray] = None
    if spec.factor_source == FactorSource.AR1_COPULA:
        factors, latent = gen_factors_ar1(spec.T, spec.q, spec.theta, spec.burn_in, spec.seed)
    else:
        factors = gen_factors_iid(spec.T, spec.q, spec.seed)
    common = true_components(functions, factors).sum(axis=1)
    noise = spec.noise_sd * stream(spec.seed, "noise").standard_normal((spec.N, spec.T))
    logger.debug(f"Simulated panel N={spec.N} T={spec.T} q={spec.q} ({spec.function_source.value}, {spec.factor_source.value})")
    return GroundTruth(
        functions=functions,
        factors=factors,
        latent_z=latent,
        noise=noise,
        panel=Panel(values=common + noise),
    )
