"""
Bayesian decision rule for one subtrial

A subtrial is declared efficacious when enough posterior mass lies on the
beneficial side of 0, futile when enough lies short of the margin δ, and
inconclusive otherwise.
"""

from enum import Enum
from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ssd_solver import DecisionSpec, Direction
from stats_core import NormalSummary, std_normal_cdf

# Slack on the threshold comparison so that the exact design boundary,
# where both criteria hold with equality, is not lost to rounding.
THRESHOLD_SLACK = 1e-12


class Verdict(str, Enum):
    EFFICACIOUS = "efficacious"
    FUTILE = "futile"
    INCONCLUSIVE = "inconclusive"


class TrialDecision(BaseModel):
    model_config = ConfigDict(frozen=True)

    efficacy_prob: float = Field(..., ge=0, le=1)
    futility_prob: float = Field(..., ge=0, le=1)
    verdict: Verdict

    @property
    def decisive(self) -> bool:
        return self.verdict != Verdict.INCONCLUSIVE


def tail_probabilities(mean, sd, spec: DecisionSpec) -> Tuple[np.ndarray, np.ndarray]:
    """
    Posterior efficacy and futility probabilities

    For smaller-is-better outcomes the scale is reflected so one pair of
    formulas serves both directions.
    """
    mean = np.asarray(mean, dtype=float)
    sd = np.asarray(sd, dtype=float)
    delta = spec.delta
    if spec.direction == Direction.SMALLER_IS_BETTER:
        mean, delta = -mean, -delta
    efficacy = std_normal_cdf(mean / sd)
    futility = std_normal_cdf((delta - mean) / sd)
    return efficacy, futility


def classify(means, sds, spec: DecisionSpec, k: int) -> np.ndarray:
    """
    Vectorised verdicts for arrays of posterior means and sds of subtrial k

    Returns:
        Integer codes: 0 efficacious, 1 futile, 2 inconclusive
    """
    efficacy, futility = tail_probabilities(means, sds, spec)
    efficacious = efficacy >= spec.eta - THRESHOLD_SLACK
    futile = ~efficacious & (futility >= spec.zeta_for(k) - THRESHOLD_SLACK)
    return np.where(efficacious, 0, np.where(futile, 1, 2))


VERDICT_CODES = (Verdict.EFFICACIOUS, Verdict.FUTILE, Verdict.INCONCLUSIVE)


def decide(posterior: NormalSummary, spec: DecisionSpec, k: int) -> TrialDecision:
    """
    Apply the efficacy/futility rule to the posterior of θ_k

    When both criteria hold (only possible on the design boundary) the
    verdict is efficacious.
    """
    efficacy, futility = tail_probabilities(posterior.mean, posterior.sd, spec)
    code = int(classify(posterior.mean, posterior.sd, spec, k))
    return TrialDecision(
        efficacy_prob=float(efficacy),
        futility_prob=float(futility),
        verdict=VERDICT_CODES[code],
    )
