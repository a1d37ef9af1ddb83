"""Generalized Pareto distribution and peaks-over-threshold statistics."""

import math
from typing import List, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize
from scipy.stats import genpareto

from config.settings import FIT_MAX_ITER, FIT_TOLERANCE, MIN_GPD_SAMPLES, ZETA_ZERO_TOL
from core.exceptions import (
    DegenerateDataError,
    DomainError,
    InsufficientDataError,
    MeanUndefinedError,
    NonConvergenceError,
)
from models.schemas import GpdParams, PotModel
from utils.logger import get_logger

MODULE = "evt"
logger = get_logger(MODULE)


def gpd_mean(p: GpdParams) -> float:
    """Mean of the GPD: mu + sigma / (1 - zeta). Undefined for zeta >= 1."""
    if p.shape >= 1:
        raise MeanUndefinedError(MODULE, f"GPD mean undefined for shape {p.shape} >= 1")
    return p.location + p.scale / (1.0 - p.shape)


def _quantile(location, scale, shape, u):
    """Vectorized inverse-survival transform; u in (0, 1], u == 1 maps to the location."""
    shape = np.asarray(shape, dtype=float)
    u = np.asarray(u, dtype=float)
    small = np.abs(shape) < ZETA_ZERO_TOL
    safe = np.where(small, 1.0, shape)
    power = scale * (np.power(u, -safe) - 1.0) / safe
    expo = -scale * np.log(u)
    return location + np.where(small, expo, power)


def gpd_quantile(p: GpdParams, u):
    """mu + sigma * (u^-zeta - 1) / zeta, with the exponential limit for |zeta| < 1e-9.

    Small u maps to the upper tail. Accepts a scalar or an array of u in (0, 1).
    """
    arr = np.asarray(u, dtype=float)
    if np.any(~(arr > 0.0) | ~(arr < 1.0)):
        raise DomainError(MODULE, "quantile level must lie strictly inside (0, 1)")
    q = _quantile(p.location, p.scale, p.shape, arr)
    return float(q) if np.ndim(q) == 0 else q


def _frozen(p: GpdParams):
    shape = 0.0 if abs(p.shape) < ZETA_ZERO_TOL else p.shape
    return genpareto(c=shape, loc=p.location, scale=p.scale)


def gpd_cdf(p: GpdParams, x):
    """P(X <= x)."""
    out = _frozen(p).cdf(np.asarray(x, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def gpd_pdf(p: GpdParams, x):
    """Density; zero outside the support."""
    out = _frozen(p).pdf(np.asarray(x, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def gpd_log_likelihood(p: GpdParams, excesses: Sequence[float]) -> float:
    """Log-likelihood of excesses over the location. -inf when any point falls outside the support."""
    x = np.asarray(excesses, dtype=float)
    n = x.size
    if n == 0:
        return 0.0
    if np.any(x < 0):
        return -math.inf
    if abs(p.shape) < ZETA_ZERO_TOL:
        return float(-n * math.log(p.scale) - x.sum() / p.scale)
    arg = 1.0 + p.shape * x / p.scale
    if np.any(arg <= 0):
        return -math.inf
    return float(-n * math.log(p.scale) - (1.0 + 1.0 / p.shape) * np.log(arg).sum())


def _negative_log_likelihood(theta: np.ndarray, x: np.ndarray) -> float:
    log_scale, shape = theta
    if shape <= -1.0 or not np.isfinite(log_scale):
        return math.inf
    ll = gpd_log_likelihood(GpdParams(scale=math.exp(log_scale), shape=shape), x)
    return -ll if np.isfinite(ll) else math.inf


def _moment_start(x: np.ndarray) -> Tuple[float, float]:
    """Method-of-moments starting point (sigma, zeta), shape clipped into the regular range."""
    mean = float(x.mean())
    var = float(x.var())
    ratio = mean * mean / var
    shape = float(np.clip(0.5 * (1.0 - ratio), -0.45, 0.9))
    scale = max(mean * (1.0 - shape), 1e-12)
    return scale, shape


def fit_gpd(excesses: Sequence[float], max_iter: int = FIT_MAX_ITER) -> GpdParams:
    """Maximum-likelihood (sigma, zeta) with location fixed at 0.

    Nelder-Mead on (ln sigma, zeta), started from method-of-moments estimates.
    Stops when the log-likelihood spread over the simplex drops below 1e-8.
    """
    x = np.asarray(excesses, dtype=float)
    if x.size < MIN_GPD_SAMPLES:
        raise InsufficientDataError(MODULE, f"GPD fit needs at least {MIN_GPD_SAMPLES} excesses, got {x.size}")
    if np.any(~np.isfinite(x)) or np.any(x < 0):
        raise DomainError(MODULE, "excesses must be finite and non-negative")
    if np.ptp(x) == 0.0:
        raise DegenerateDataError(MODULE, "all excesses are equal; GPD parameters are not identifiable")

    scale0, shape0 = _moment_start(x)
    result = minimize(
        _negative_log_likelihood,
        x0=np.array([math.log(scale0), shape0]),
        args=(x,),
        method="Nelder-Mead",
        options={"xatol": 1e-8, "fatol": FIT_TOLERANCE, "maxiter": max_iter, "maxfev": 4 * max_iter},
    )
    log_scale, shape = (float(v) for v in result.x)
    best = GpdParams(scale=math.exp(log_scale), shape=shape) if np.isfinite(result.fun) else None
    if not result.success or best is None:
        raise NonConvergenceError(MODULE, f"GPD fit did not converge after {result.nit} iterations: {result.message}",
                                  best=best)
    logger.debug("GPD fit n=%d scale=%.6g shape=%.6g iterations=%d", x.size, best.scale, best.shape, result.nit)
    return best


def gpd_standard_errors(p: GpdParams, excesses: Sequence[float]) -> Tuple[float, float]:
    """Standard errors of (sigma, zeta) from the numerical Hessian of the log-likelihood.

    Informational only. NaN when the observed information is not positive definite.
    """
    x = np.asarray(excesses, dtype=float)
    theta = np.array([p.scale, p.shape])
    steps = 1e-4 * np.maximum(np.abs(theta), 1e-2)

    def ll(t: np.ndarray) -> float:
        if t[0] <= 0:
            return -math.inf
        return gpd_log_likelihood(GpdParams(location=p.location, scale=t[0], shape=t[1]), x)

    hessian = np.zeros((2, 2))
    for i in range(2):
        for j in range(2):
            ei = np.eye(2)[i] * steps[i]
            ej = np.eye(2)[j] * steps[j]
            hessian[i, j] = (
                ll(theta + ei + ej) - ll(theta + ei - ej) - ll(theta - ei + ej) + ll(theta - ei - ej)
            ) / (4.0 * steps[i] * steps[j])
    try:
        cov = np.linalg.inv(-hessian)
    except np.linalg.LinAlgError:
        return math.nan, math.nan
    diag = np.diag(cov)
    if np.any(~np.isfinite(diag)) or np.any(diag <= 0):
        return math.nan, math.nan
    return float(math.sqrt(diag[0])), float(math.sqrt(diag[1]))


def fit_pot(daily_values: Sequence[float], threshold: float = 0.0) -> PotModel:
    """Event rate above the threshold plus a GPD fit of the exceedances."""
    values = np.asarray(daily_values, dtype=float)
    if values.size == 0:
        raise InsufficientDataError(MODULE, "no daily values to fit")
    if threshold < 0 or not math.isfinite(threshold):
        raise DomainError(MODULE, f"threshold must be finite and >= 0, got {threshold}")
    above = values[values > threshold]
    rate = above.size / values.size
    if above.size == 0:
        logger.info("No exceedances over %.6g in %d days; rate 0, no tail", threshold, values.size)
        return PotModel(threshold=threshold, rate=0.0, tail=None)
    tail = fit_gpd(above - threshold)
    logger.info("POT fit: %d/%d days above %.6g, rate=%.4f scale=%.4f shape=%.4f",
                above.size, values.size, threshold, rate, tail.scale, tail.shape)
    return PotModel(threshold=threshold, rate=rate, tail=tail)


def pot_from_uniforms(rate, threshold, location, scale, shape, u1, u2):
    """Vectorized POT draw: threshold + tail quantile where u1 < rate, threshold elsewhere."""
    event = np.asarray(u1) < np.asarray(rate)
    magnitude = _quantile(location, scale, shape, np.where(event, u2, 1.0))
    return np.asarray(threshold, dtype=float) + np.where(event, magnitude, 0.0)


def sample_pot(m: PotModel, rng: np.random.Generator) -> float:
    """One daily value. Draws two independent uniforms: occurrence, then magnitude."""
    u1 = rng.random()
    u2 = 1.0 - rng.random()
    if m.tail is None or not u1 < m.rate:
        return m.threshold
    return m.threshold + float(_quantile(m.tail.location, m.tail.scale, m.tail.shape, u2))


def qq_pairs(p: GpdParams, excesses: Sequence[float]) -> List[Tuple[float, float]]:
    """(theoretical, empirical) quantile pairs at plotting positions i / (n + 1)."""
    x = np.sort(np.asarray(excesses, dtype=float))
    n = x.size
    if n == 0:
        return []
    probs = np.arange(1, n + 1) / (n + 1.0)
    theoretical = _quantile(p.location, p.scale, p.shape, 1.0 - probs)
    return [(float(t), float(e)) for t, e in zip(theoretical, x)]
