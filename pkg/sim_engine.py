"""
Monte Carlo evaluation of basket trial designs

Simulates replicates of a basket trial under a scenario of true arm means,
analyses each replicate with either the borrowing model or stand-alone
subtrial models, applies the decision rule and aggregates operating
characteristics.

Replicates are processed in fixed-size chunks, each with its own
SeedSequence child of the scenario seed, so results do not depend on how
many worker threads run the chunks.
"""

from concurrent.futures import ThreadPoolExecutor
from enum import Enum
from typing import List, Literal, NamedTuple, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from commensurate import (
    BasketDesign,
    WeightMatrix,
    collective_prior_variances,
    complementary_posterior_means,
    synthesis_weight_matrix,
)
from config import get_config
from decision import classify
from ssd_solver import DecisionSpec, sample_size_borrowing
from utils.errors import ConfigurationError
from utils.logger import get_logger

logger = get_logger(__name__)

RATE_SUM_TOL = 1e-12


class AnalysisModel(str, Enum):
    BORROWING = "borrowing"
    STAND_ALONE = "stand_alone"

    @classmethod
    def parse(cls, value: str) -> "AnalysisModel":
        normalised = value.strip().lower().replace("-", "_")
        if normalised == "standalone":
            normalised = cls.STAND_ALONE.value
        return cls(normalised)


class ScenarioConfig(BaseModel):
    """True arm means, outcome variances and sizes for one simulation scenario"""
    model_config = ConfigDict(frozen=True)

    name: str = "scenario"
    mu_E: List[float]
    mu_C: List[float]
    sigma2: List[float]
    n: List[int]
    R: List[float]
    replicates: int = Field(..., ge=1)
    seed: int = Field(..., ge=0, lt=2 ** 64)
    allocation: Literal["random", "fixed"] = "random"

    @model_validator(mode="after")
    def _check_lengths(self) -> "ScenarioConfig":
        K = len(self.mu_E)
        for name in ("mu_C", "sigma2", "n", "R"):
            if len(getattr(self, name)) != K:
                raise ValueError(f"{name} has {len(getattr(self, name))} entries, expected {K}")
        if any(s <= 0 for s in self.sigma2):
            raise ValueError("sigma2 entries must be positive")
        if any(n <= 0 for n in self.n):
            raise ValueError("n entries must be positive")
        if any(not 0 < r < 1 for r in self.R):
            raise ValueError("R entries must lie in (0, 1)")
        return self

    @property
    def K(self) -> int:
        return len(self.mu_E)

    @property
    def theta(self) -> np.ndarray:
        return np.asarray(self.mu_E) - np.asarray(self.mu_C)

    @property
    def null_subtrials(self) -> np.ndarray:
        """Mask of subtrials with no true treatment effect"""
        return np.isclose(self.theta, 0.0, atol=1e-12)


class OperatingCharacteristics(BaseModel):
    """Verdict rates per subtrial and the overall false positive rate"""
    model_config = ConfigDict(frozen=True)

    scenario: str
    model: AnalysisModel
    labels: List[str]
    n: List[int]
    rate_efficacious: List[float]
    rate_futile: List[float]
    rate_inconclusive: List[float]
    overall_false_positive: Optional[float] = Field(None, ge=0, le=1)
    replicates_used: int
    seed: int

    @model_validator(mode="after")
    def _check_rates(self) -> "OperatingCharacteristics":
        for k, rates in enumerate(zip(self.rate_efficacious, self.rate_futile, self.rate_inconclusive)):
            if any(not 0.0 <= r <= 1.0 for r in rates):
                raise ValueError(f"rates of subtrial {k} outside [0, 1]")
            if abs(sum(rates) - 1.0) > RATE_SUM_TOL:
                raise ValueError(f"rates of subtrial {k} sum to {sum(rates)}")
        return self

    @property
    def decisive_rate(self) -> List[float]:
        return [e + f for e, f in zip(self.rate_efficacious, self.rate_futile)]


class ChunkCounts(NamedTuple):
    verdicts: np.ndarray  # (K, 3) counts of efficacious, futile, inconclusive
    any_false_positive: int
    replicates: int


def _arm_sizes(scenario: ScenarioConfig, rng: np.random.Generator, size: int):
    n = np.asarray(scenario.n)
    R = np.asarray(scenario.R)
    if scenario.allocation == "fixed":
        n_E = np.floor(n * R + 0.5).astype(int)
        n_C = n - n_E
        empty = (n_E == 0) | (n_C == 0)
        if empty.any():
            raise ConfigurationError(
                f"subtrials {np.flatnonzero(empty).tolist()} have an empty arm under fixed allocation",
                field="simulation.n",
            )
        return np.broadcast_to(n_E, (size, scenario.K)), np.broadcast_to(n_C, (size, scenario.K))

    if np.any(n < 2):
        raise ConfigurationError("every subtrial needs at least 2 patients for two arms", field="simulation.n")
    # per-patient randomisation, redrawn until both arms are non-empty
    n_E = rng.binomial(n, R, size=(size, scenario.K))
    invalid = (n_E == 0) | (n_E == n)
    while invalid.any():
        n_E[invalid] = rng.binomial(np.broadcast_to(n, n_E.shape)[invalid], np.broadcast_to(R, n_E.shape)[invalid])
        invalid = (n_E == 0) | (n_E == n)
    return n_E, n - n_E


def simulate_differences(scenario: ScenarioConfig, rng: np.random.Generator, size: int) -> np.ndarray:
    """
    Draw observed differences of arm means for a block of replicates

    Arm means are drawn from their exact sampling distributions
    N(μ_jk, σ_k²/n_jk).

    Returns:
        Array of shape (size, K)
    """
    n_E, n_C = _arm_sizes(scenario, rng, size)
    sigma2 = np.asarray(scenario.sigma2)
    xbar_E = np.asarray(scenario.mu_E) + np.sqrt(sigma2 / n_E) * rng.standard_normal((size, scenario.K))
    xbar_C = np.asarray(scenario.mu_C) + np.sqrt(sigma2 / n_C) * rng.standard_normal((size, scenario.K))
    return xbar_E - xbar_C


def simulate_replicate(scenario: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    """Observed differences x̄_Ek − x̄_Ck of one basket trial replicate"""
    return simulate_differences(scenario, rng, 1)[0]


def posterior_summaries(design: BasketDesign, n: Sequence[int], diffs: np.ndarray, model: AnalysisModel):
    """
    Posterior means and sds of every θ_k for a block of replicates

    Args:
        design: Analysis design (known variances, priors, weights)
        n: Subtrial sizes
        diffs: Observed differences, shape (size, K)
        model: Borrowing or stand-alone analysis

    Returns:
        Tuple of (means of shape (size, K), sds of shape (K,))
    """
    n_arr = np.asarray(n, dtype=float)
    lambdas = complementary_posterior_means(design, n_arr, diffs)
    if model == AnalysisModel.STAND_ALONE:
        return lambdas, np.sqrt(1.0 / (1.0 / design.s02 + n_arr * design.info_per_patient))

    P = synthesis_weight_matrix(design.weights, design.c0)
    prior_mean = lambdas @ P
    prior_var = collective_prior_variances(design, n_arr)
    data_var = 1.0 / (n_arr * design.info_per_patient)
    means = (data_var * prior_mean + diffs * prior_var) / (prior_var + data_var)
    sds = np.sqrt(1.0 / (1.0 / prior_var + 1.0 / data_var))
    return means, sds


def simulate_chunk(
    scenario: ScenarioConfig,
    design: BasketDesign,
    spec: DecisionSpec,
    model: AnalysisModel,
    seed_seq: np.random.SeedSequence,
    size: int,
) -> ChunkCounts:
    """Simulate and classify one seeded block of replicates"""
    rng = np.random.default_rng(seed_seq)
    diffs = simulate_differences(scenario, rng, size)
    means, sds = posterior_summaries(design, scenario.n, diffs, model)

    verdicts = np.zeros((scenario.K, 3), dtype=np.int64)
    codes = np.empty((size, scenario.K), dtype=int)
    for k in range(scenario.K):
        codes[:, k] = classify(means[:, k], sds[k], spec, k)
        verdicts[k] = np.bincount(codes[:, k], minlength=3)

    nulls = scenario.null_subtrials
    any_fp = int(np.any(codes[:, nulls] == 0, axis=1).sum()) if nulls.any() else 0
    return ChunkCounts(verdicts, any_fp, size)


def _chunk_sizes(replicates: int, chunk_size: int) -> List[int]:
    full, remainder = divmod(replicates, chunk_size)
    return [chunk_size] * full + ([remainder] if remainder else [])


def run_study(
    scenario: ScenarioConfig,
    design: BasketDesign,
    spec: DecisionSpec,
    model: AnalysisModel = AnalysisModel.BORROWING,
    threads: Optional[int] = None,
    chunk_size: Optional[int] = None,
) -> OperatingCharacteristics:
    """
    Operating characteristics of a design under one scenario and analysis model

    Args:
        scenario: True means, variances, sizes, replicate count and seed
        design: Analysis design
        spec: Decision specification
        model: Borrowing or stand-alone analysis
        threads: Worker threads (results are identical for any value)
        chunk_size: Replicates per seeded chunk

    Returns:
        OperatingCharacteristics
    """
    config = get_config()
    if scenario.K != design.K:
        raise ConfigurationError(f"scenario has {scenario.K} subtrials but the design has {design.K}", field="simulation")
    threads = config.resolve_threads(threads)
    chunk_size = chunk_size or config.chunk_size

    sizes = _chunk_sizes(scenario.replicates, chunk_size)
    seeds = np.random.SeedSequence(scenario.seed).spawn(len(sizes))
    logger.info(
        f"Simulating {scenario.replicates} replicates of '{scenario.name}' "
        f"({model.value}, {len(sizes)} chunks, {threads} threads)"
    )

    with ThreadPoolExecutor(max_workers=threads) as executor:
        results = list(executor.map(
            lambda job: simulate_chunk(scenario, design, spec, model, job[0], job[1]),
            zip(seeds, sizes),
        ))

    verdicts = sum(r.verdicts for r in results)
    total = sum(r.replicates for r in results)
    rates = verdicts / total
    overall_fp = sum(r.any_false_positive for r in results) / total if scenario.null_subtrials.any() else None

    characteristics = OperatingCharacteristics(
        scenario=scenario.name,
        model=model,
        labels=design.labels,
        n=list(scenario.n),
        rate_efficacious=rates[:, 0].tolist(),
        rate_futile=rates[:, 1].tolist(),
        rate_inconclusive=rates[:, 2].tolist(),
        overall_false_positive=overall_fp,
        replicates_used=total,
        seed=scenario.seed,
    )
    logger.info(
        f"'{scenario.name}' ({model.value}): efficacy rates {[round(r, 3) for r in characteristics.rate_efficacious]}, "
        f"overall false positive {overall_fp}"
    )
    return characteristics


def homoscedastic_design(base: BasketDesign, sigma2: float) -> BasketDesign:
    """Copy of base with a common outcome variance and perfect commensurability"""
    subtrials = [s.model_copy(update={"sigma2": sigma2}) for s in base.subtrials]
    return base.model_copy(update={"subtrials": subtrials, "weights": WeightMatrix.zeros(base.K)})


def tp_fp_sweep(
    sigma2_grid: Sequence[float],
    base_design: BasketDesign,
    spec: DecisionSpec,
    replicates: Optional[int] = None,
    seed: Optional[int] = None,
    threads: Optional[int] = None,
    allocation: Literal["random", "fixed"] = "random",
) -> pd.DataFrame:
    """
    True and false positive rates per subtrial over a grid of common variances

    For each σ², sizes are solved under borrowing with all w_qk = 0, then
    trials are simulated with θ_k = δ (true positives) and θ_k = 0 (false
    positives).

    Returns:
        Long-format DataFrame with columns sigma2, subtrial, label,
        n_fractional, n, kind, rate
    """
    config = get_config()
    replicates = replicates or config.default_replicates
    seed = config.default_seed if seed is None else seed

    rows = []
    for sigma2 in sigma2_grid:
        if sigma2 <= 0:
            raise ConfigurationError(f"variance {sigma2} must be positive", field="sigma2_grid")
        design = homoscedastic_design(base_design, sigma2)
        solution = sample_size_borrowing(design, spec)
        for kind, effect in (("tp", spec.delta), ("fp", 0.0)):
            scenario = ScenarioConfig(
                name=f"sigma2={sigma2:g} {kind}",
                mu_E=[effect] * design.K,
                mu_C=[0.0] * design.K,
                sigma2=[sigma2] * design.K,
                n=solution.n_integer,
                R=design.R.tolist(),
                replicates=replicates,
                seed=seed,
                allocation=allocation,
            )
            result = run_study(scenario, design, spec, AnalysisModel.BORROWING, threads=threads)
            for k in range(design.K):
                rows.append({
                    "sigma2": sigma2,
                    "subtrial": k + 1,
                    "label": design.labels[k],
                    "n_fractional": solution.n_fractional[k],
                    "n": solution.n_integer[k],
                    "kind": kind,
                    "rate": result.rate_efficacious[k],
                })
    return pd.DataFrame(rows, columns=["sigma2", "subtrial", "label", "n_fractional", "n", "kind", "rate"])
