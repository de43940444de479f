"""
Scalar statistical primitives for basket-ssd

Standard normal distribution functions, moments and quantiles of the
two-component Gamma mixture placed on commensurability precisions, the
moment-matched normal approximation of the resulting scaled-t mixture, and
the Hellinger distance between two normal distributions.
"""

import math
from typing import NamedTuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import optimize, stats

from utils.errors import DomainError
from utils.logger import get_logger

logger = get_logger(__name__)

ArrayLike = Union[float, np.ndarray]


class GammaMixtureHyper(BaseModel):
    """Shape/rate pairs of the two Gamma components of the precision prior.

    The first component describes substantial discounting (mass on small
    precisions), the second limited discounting.
    """
    model_config = ConfigDict(frozen=True)

    a1: float = Field(..., gt=0, description="Shape of the substantial-discounting component")
    b1: float = Field(..., gt=0, description="Rate of the substantial-discounting component")
    a2: float = Field(..., gt=0, description="Shape of the limited-discounting component")
    b2: float = Field(..., gt=0, description="Rate of the limited-discounting component")

    @model_validator(mode="after")
    def _check_finite_variance(self) -> "GammaMixtureHyper":
        if self.a1 <= 1 or self.a2 <= 1:
            raise ValueError("a1 and a2 must exceed 1 for the moment-matched variance to be finite")
        return self

    @property
    def substantial_variance(self) -> float:
        """Inverse-precision mean b1/(a1-1) of the first component"""
        return self.b1 / (self.a1 - 1)

    @property
    def limited_variance(self) -> float:
        """Inverse-precision mean b2/(a2-1) of the second component"""
        return self.b2 / (self.a2 - 1)


class NormalSummary(BaseModel):
    """Mean and variance of a normal prior or posterior"""
    model_config = ConfigDict(frozen=True)

    mean: float
    variance: float = Field(..., gt=0)

    @property
    def sd(self) -> float:
        return math.sqrt(self.variance)

    @property
    def precision(self) -> float:
        return 1.0 / self.variance


class GammaMixtureSummary(NamedTuple):
    mean: float
    lower: float
    upper: float


def std_normal_cdf(z: ArrayLike) -> ArrayLike:
    """Standard normal distribution function Φ"""
    result = stats.norm.cdf(z)
    return float(result) if np.ndim(result) == 0 else result


def std_normal_quantile(p: float) -> float:
    """
    Inverse of the standard normal distribution function

    Args:
        p: Probability strictly between 0 and 1

    Returns:
        z with Φ(z) = p
    """
    if not (0.0 < p < 1.0):
        raise DomainError(f"quantile probability must lie in (0, 1), got {p}")
    return float(stats.norm.ppf(p))


def moment_matched_prior_variance(w: ArrayLike, hyper: GammaMixtureHyper) -> ArrayLike:
    """
    Variance of the normal approximation to the commensurate prior

    Integrating the precision out of N(θ_q, 1/ν) with a w-weighted Gamma
    mixture on ν gives a scaled-t mixture; matching its first two moments
    yields w·b1/(a1−1) + (1−w)·b2/(a2−1).

    Args:
        w: Incommensurability weight(s) in [0, 1]
        hyper: Gamma mixture hyperparameters

    Returns:
        Variance (scalar for scalar w, array otherwise)
    """
    if hyper.a1 <= 1 or hyper.a2 <= 1:
        raise DomainError("moment-matched variance undefined for a1 <= 1 or a2 <= 1")
    w_arr = np.asarray(w, dtype=float)
    if np.any(w_arr < 0) or np.any(w_arr > 1):
        raise DomainError(f"incommensurability weight must lie in [0, 1], got {w}")
    variance = w_arr * hyper.substantial_variance + (1.0 - w_arr) * hyper.limited_variance
    return float(variance) if variance.ndim == 0 else variance


def hellinger_weight(mu_q: float, sigma_q: float, mu_k: float, sigma_k: float) -> float:
    """
    Hellinger distance between N(mu_q, sigma_q²) and N(mu_k, sigma_k²)

    Takes standard deviations, not variances.
    """
    if sigma_q <= 0 or sigma_k <= 0:
        raise DomainError(f"standard deviations must be positive, got {sigma_q} and {sigma_k}")
    var_sum = sigma_q ** 2 + sigma_k ** 2
    affinity = math.sqrt(2.0 * sigma_q * sigma_k / var_sum) * math.exp(-((mu_q - mu_k) ** 2) / (4.0 * var_sum))
    # affinity can exceed 1 by an ulp for identical inputs
    return math.sqrt(max(0.0, 1.0 - affinity))


def _gamma(shape: float, rate: float):
    return stats.gamma(a=shape, scale=1.0 / rate)


def gamma_mixture_cdf(x: float, w: float, hyper: GammaMixtureHyper) -> float:
    """CDF of w·Gamma(a1, b1) + (1−w)·Gamma(a2, b2) at x"""
    return float(w * _gamma(hyper.a1, hyper.b1).cdf(x) + (1.0 - w) * _gamma(hyper.a2, hyper.b2).cdf(x))


def _mixture_quantile(p: float, w: float, hyper: GammaMixtureHyper, start: float) -> float:
    """Quantile of the mixture by root finding on a geometrically expanded bracket"""
    lower, upper = start, start
    while gamma_mixture_cdf(upper, w, hyper) < p:
        upper *= 2.0
    while gamma_mixture_cdf(lower, w, hyper) > p:
        lower /= 2.0
    if lower == upper:
        return lower
    return float(optimize.brentq(lambda x: gamma_mixture_cdf(x, w, hyper) - p, lower, upper, xtol=1e-12))


def gamma_mixture_mean_and_interval(w: float, hyper: GammaMixtureHyper, level: float = 0.95) -> GammaMixtureSummary:
    """
    Mean and equal-tail credible interval of the commensurability precision

    Args:
        w: Mixture weight of the first component
        hyper: Gamma mixture hyperparameters
        level: Credible level in (0, 1)

    Returns:
        GammaMixtureSummary(mean, lower, upper)
    """
    if not (0.0 < level < 1.0):
        raise DomainError(f"credible level must lie in (0, 1), got {level}")
    if not (0.0 <= w <= 1.0):
        raise DomainError(f"mixture weight must lie in [0, 1], got {w}")

    mean = w * hyper.a1 / hyper.b1 + (1.0 - w) * hyper.a2 / hyper.b2
    tail = (1.0 - level) / 2.0

    if w in (0.0, 1.0):
        shape, rate = (hyper.a1, hyper.b1) if w == 1.0 else (hyper.a2, hyper.b2)
        component = _gamma(shape, rate)
        return GammaMixtureSummary(mean, float(component.ppf(tail)), float(component.ppf(1.0 - tail)))

    lower = _mixture_quantile(tail, w, hyper, start=mean)
    upper = _mixture_quantile(1.0 - tail, w, hyper, start=mean)
    logger.debug(f"Gamma mixture w={w}: mean={mean:.4f}, interval=[{lower:.4f}, {upper:.4f}]")
    return GammaMixtureSummary(mean, lower, upper)
