"""
Borrowing structure of a basket trial

Validates the pairwise incommensurability matrix, turns it into synthesis
weights, and assembles the commensurate priors and posteriors that let each
subtrial borrow from its complementary subtrials.
"""

from typing import List, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.special import softmax

from stats_core import GammaMixtureHyper, NormalSummary, hellinger_weight, moment_matched_prior_variance
from utils.errors import DomainError, SubtrialIndexError

SYMMETRY_TOL = 1e-12


def check_weight_entries(entries: List[List[float]]) -> List[List[float]]:
    """
    Check that entries form a valid incommensurability matrix

    Raises:
        ValueError: naming the first offending entry
    """
    size = len(entries)
    if size < 2:
        raise ValueError("at least 2 subtrials required")
    for q, row in enumerate(entries):
        if len(row) != size:
            raise ValueError(f"row {q} has {len(row)} entries, expected {size}")
        for k, value in enumerate(row):
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"entry ({q}, {k}) = {value} outside [0, 1]")
        if row[q] != 0.0:
            raise ValueError(f"diagonal entry ({q}, {q}) must be 0")
    for q in range(size):
        for k in range(q + 1, size):
            if abs(entries[q][k] - entries[k][q]) > SYMMETRY_TOL:
                raise ValueError(
                    f"matrix is not symmetric: ({q}, {k}) = {entries[q][k]} but ({k}, {q}) = {entries[k][q]}"
                )
    return entries


class WeightMatrix(BaseModel):
    """K×K matrix of pairwise incommensurability levels w_qk (row q, column k)"""
    model_config = ConfigDict(frozen=True)

    entries: List[List[float]]

    @field_validator("entries")
    @classmethod
    def _check_entries(cls, entries: List[List[float]]) -> List[List[float]]:
        return check_weight_entries(entries)

    @property
    def K(self) -> int:
        return len(self.entries)

    def as_array(self) -> np.ndarray:
        return np.array(self.entries, dtype=float)

    @classmethod
    def zeros(cls, K: int) -> "WeightMatrix":
        """Perfect commensurability between all pairs"""
        return cls(entries=[[0.0] * K for _ in range(K)])


class SubtrialDesign(BaseModel):
    """Design inputs of one subtrial"""
    model_config = ConfigDict(frozen=True)

    label: str = ""
    sigma2: float = Field(..., gt=0, description="Known outcome variance σ_k²")
    R: float = Field(..., gt=0, lt=1, description="Probability of allocation to the experimental arm")
    m0: float = Field(0.0, description="Operational prior mean")
    s02: float = Field(100.0, gt=0, description="Operational prior variance")

    @property
    def info_per_patient(self) -> float:
        """Data precision contributed by one patient: R(1−R)/σ²"""
        return self.R * (1.0 - self.R) / self.sigma2


class BasketDesign(BaseModel):
    """All design inputs of a basket trial"""
    model_config = ConfigDict(frozen=True)

    subtrials: List[SubtrialDesign]
    weights: WeightMatrix
    hyper: GammaMixtureHyper
    c0: float = Field(0.05, gt=0, description="Concentration parameter of the synthesis weights")

    @field_validator("subtrials")
    @classmethod
    def _check_subtrials(cls, subtrials: List[SubtrialDesign]) -> List[SubtrialDesign]:
        if len(subtrials) < 2:
            raise ValueError("at least 2 required")
        return subtrials

    @model_validator(mode="after")
    def _check_consistency(self) -> "BasketDesign":
        if self.weights.K != len(self.subtrials):
            raise ValueError(f"weight matrix is {self.weights.K}x{self.weights.K} but there are {len(self.subtrials)} subtrials")
        if self.hyper.substantial_variance <= self.hyper.limited_variance:
            raise ValueError(
                "first Gamma component must be the substantial-discounting one: "
                "b1/(a1-1) must exceed b2/(a2-1)"
            )
        return self

    @property
    def K(self) -> int:
        return len(self.subtrials)

    @property
    def labels(self) -> List[str]:
        return [s.label or f"subtrial {k + 1}" for k, s in enumerate(self.subtrials)]

    @property
    def sigma2(self) -> np.ndarray:
        return np.array([s.sigma2 for s in self.subtrials])

    @property
    def R(self) -> np.ndarray:
        return np.array([s.R for s in self.subtrials])

    @property
    def m0(self) -> np.ndarray:
        return np.array([s.m0 for s in self.subtrials])

    @property
    def s02(self) -> np.ndarray:
        return np.array([s.s02 for s in self.subtrials])

    @property
    def info_per_patient(self) -> np.ndarray:
        return np.array([s.info_per_patient for s in self.subtrials])

    def with_weights(self, weights: WeightMatrix) -> "BasketDesign":
        return self.model_copy(update={"weights": weights})


def _check_index(design: BasketDesign, index: int) -> None:
    if not 0 <= index < design.K:
        raise SubtrialIndexError(f"subtrial index {index} out of range for K = {design.K}")


def synthesis_weights(weights: WeightMatrix, c0: float, k: int) -> np.ndarray:
    """
    Synthesis weights p_qk for the complementary subtrials of k

    p_qk ∝ exp(−w_qk²/c0), normalised over q ≠ k.

    Returns:
        Array of K−1 weights ordered by ascending q (q ≠ k)
    """
    if c0 <= 0:
        raise DomainError(f"concentration parameter c0 must be positive, got {c0}")
    if not 0 <= k < weights.K:
        raise SubtrialIndexError(f"subtrial index {k} out of range for K = {weights.K}")
    column = np.delete(weights.as_array()[:, k], k)
    return softmax(-column ** 2 / c0)


def synthesis_weight_matrix(weights: WeightMatrix, c0: float) -> np.ndarray:
    """K×K matrix P with P[q, k] = p_qk and a zero diagonal"""
    K = weights.K
    P = np.zeros((K, K))
    for k in range(K):
        P[np.arange(K) != k, k] = synthesis_weights(weights, c0, k)
    return P


def hellinger_weight_matrix(means: Sequence[float], sds: Sequence[float]) -> WeightMatrix:
    """Pairwise Hellinger distances between N(means[k], sds[k]²) as a WeightMatrix"""
    if len(means) != len(sds):
        raise DomainError(f"got {len(means)} means but {len(sds)} standard deviations")
    K = len(means)
    entries = [[0.0] * K for _ in range(K)]
    for q in range(K):
        for k in range(q + 1, K):
            entries[q][k] = entries[k][q] = hellinger_weight(means[q], sds[q], means[k], sds[k])
    return WeightMatrix(entries=entries)


def _data_variance(design: BasketDesign, n: np.ndarray) -> np.ndarray:
    """Posterior variance of each θ_q under its operational prior"""
    return 1.0 / (1.0 / design.s02 + n * design.info_per_patient)


def commensurate_prior_variance(design: BasketDesign, n_q: float, q: int, k: int) -> float:
    """
    Variance ξ_qk² of the commensurate prior for θ_k built from subtrial q

    Args:
        design: Basket design
        n_q: (Fractional) sample size of subtrial q
        q: Complementary subtrial index
        k: Target subtrial index
    """
    _check_index(design, q)
    _check_index(design, k)
    if q == k:
        raise SubtrialIndexError(f"a subtrial cannot be its own complementary subtrial (q = k = {k})")
    if n_q < 0:
        raise DomainError(f"sample size must be nonnegative, got {n_q}")
    sub = design.subtrials[q]
    data_variance = 1.0 / (1.0 / sub.s02 + n_q * sub.info_per_patient)
    return data_variance + moment_matched_prior_variance(design.weights.entries[q][k], design.hyper)


def commensurate_prior_variance_matrix(design: BasketDesign, n: Sequence[float]) -> np.ndarray:
    """All ξ_qk² at once; entry [q, k], diagonal set to 0"""
    n_arr = np.asarray(n, dtype=float)
    xi2 = _data_variance(design, n_arr)[:, None] + moment_matched_prior_variance(design.weights.as_array(), design.hyper)
    np.fill_diagonal(xi2, 0.0)
    return xi2


def collective_prior_variances(design: BasketDesign, n: Sequence[float]) -> np.ndarray:
    """Σ_{q≠k} p_qk² ξ_qk² for every k"""
    P = synthesis_weight_matrix(design.weights, design.c0)
    return np.sum(P ** 2 * commensurate_prior_variance_matrix(design, n), axis=0)


def collective_prior(design: BasketDesign, n: Sequence[float], lambdas: Sequence[float], k: int) -> NormalSummary:
    """
    Collective commensurate prior for θ_k from all complementary subtrials

    Args:
        design: Basket design
        n: Sample sizes of all K subtrials
        lambdas: Posterior means λ_q of all K subtrials (entry k is ignored)
        k: Target subtrial index
    """
    _check_index(design, k)
    P = synthesis_weight_matrix(design.weights, design.c0)
    mean = float(P[:, k] @ np.asarray(lambdas, dtype=float))
    variance = float(collective_prior_variances(design, n)[k])
    return NormalSummary(mean=mean, variance=variance)


def complementary_posterior(sub: SubtrialDesign, n_q: float, xbar_diff: float) -> NormalSummary:
    """
    Posterior of θ_q from its own data under the operational prior

    Args:
        sub: Subtrial design
        n_q: Sample size of the subtrial
        xbar_diff: Observed difference of arm means
    """
    if n_q < 0:
        raise DomainError(f"sample size must be nonnegative, got {n_q}")
    if n_q == 0:
        return NormalSummary(mean=sub.m0, variance=sub.s02)
    data_precision = n_q * sub.info_per_patient
    variance = 1.0 / (1.0 / sub.s02 + data_precision)
    mean = (sub.m0 / (1.0 + sub.s02 * data_precision)
            + xbar_diff / (1.0 + 1.0 / (sub.s02 * data_precision)))
    return NormalSummary(mean=mean, variance=variance)


def complementary_posterior_means(design: BasketDesign, n: Sequence[float], xbar_diff: np.ndarray) -> np.ndarray:
    """
    Vectorised λ_q for arrays of observed differences

    Args:
        design: Basket design
        n: Sample sizes, length K (all positive)
        xbar_diff: Observed differences, shape (..., K)
    """
    data_precision = np.asarray(n, dtype=float) * design.info_per_patient
    shrink = design.s02 * data_precision
    return design.m0 / (1.0 + shrink) + xbar_diff / (1.0 + 1.0 / shrink)


def full_posterior(
    design: BasketDesign,
    n: Sequence[float],
    k: int,
    xbar_diff_k: float,
    lambdas: Sequence[float],
) -> NormalSummary:
    """
    Posterior of θ_k combining the collective prior with subtrial k's data

    Raises:
        DomainError: if n_k is 0 (the posterior mean divides by n_k)
    """
    _check_index(design, k)
    n_arr = np.asarray(n, dtype=float)
    if n_arr[k] <= 0:
        raise DomainError(f"subtrial {k} needs a positive sample size for its posterior, got {n_arr[k]}")
    prior = collective_prior(design, n_arr, lambdas, k)
    data_variance = 1.0 / (n_arr[k] * design.subtrials[k].info_per_patient)
    mean = (data_variance * prior.mean + xbar_diff_k * prior.variance) / (prior.variance + data_variance)
    variance = 1.0 / (1.0 / prior.variance + 1.0 / data_variance)
    return NormalSummary(mean=mean, variance=variance)
