"""
Subtrial sample size determination

Closed-form sizes for stand-alone subtrials and simultaneous sizes under
borrowing, the latter found by solving the K coupled posterior-precision
constraints with a damped, projected Newton iteration.
"""

import math
from enum import Enum
from typing import Callable, List, NamedTuple, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from commensurate import BasketDesign, collective_prior_variances
from config import get_config
from stats_core import std_normal_quantile
from utils.errors import ConvergenceError, DesignValidationError
from utils.logger import get_logger

logger = get_logger(__name__)

MAX_HALVINGS = 30
FD_STEP = 1e-6
SINGULAR_COND = 1e14


class Direction(str, Enum):
    GREATER_IS_BETTER = "greater_is_better"
    SMALLER_IS_BETTER = "smaller_is_better"


class SolutionMode(str, Enum):
    NO_BORROWING = "no_borrowing"
    BORROWING = "borrowing"


class DecisionSpec(BaseModel):
    """Posterior-probability thresholds and clinically relevant margin"""
    model_config = ConfigDict(frozen=True)

    eta: float = Field(..., gt=0.5, lt=1, description="Efficacy threshold η")
    zeta: List[float] = Field(..., min_length=1, description="Futility thresholds ζ_k (one value applies to all)")
    delta: float = Field(..., description="Clinically relevant margin δ; its sign encodes the direction")
    direction: Direction

    @field_validator("zeta", mode="before")
    @classmethod
    def _broadcast_zeta(cls, value):
        if isinstance(value, (int, float)):
            return [float(value)]
        return value

    @field_validator("zeta")
    @classmethod
    def _check_zeta(cls, value: List[float]) -> List[float]:
        for z in value:
            if not 0.5 < z < 1.0:
                raise ValueError(f"futility threshold {z} outside (0.5, 1)")
        return value

    @model_validator(mode="before")
    @classmethod
    def _infer_direction(cls, data):
        if isinstance(data, dict) and data.get("direction") is None and isinstance(data.get("delta"), (int, float)):
            data = dict(data)
            data["direction"] = Direction.GREATER_IS_BETTER if data["delta"] > 0 else Direction.SMALLER_IS_BETTER
        return data

    @model_validator(mode="after")
    def _check_direction(self) -> "DecisionSpec":
        if self.delta == 0:
            raise ValueError("delta must be nonzero")
        implied = Direction.GREATER_IS_BETTER if self.delta > 0 else Direction.SMALLER_IS_BETTER
        if self.direction != implied:
            raise ValueError(f"delta = {self.delta} is inconsistent with direction {self.direction.value}")
        return self

    def zeta_for(self, k: int) -> float:
        return self.zeta[0] if len(self.zeta) == 1 else self.zeta[k]

    def zetas(self, K: int) -> np.ndarray:
        if len(self.zeta) == 1:
            return np.full(K, self.zeta[0])
        if len(self.zeta) != K:
            raise DesignValidationError(f"{len(self.zeta)} values given for {K} subtrials", field="decision.zeta")
        return np.array(self.zeta)

    def reflected(self) -> "DecisionSpec":
        """Same decision problem with the outcome scale negated"""
        flipped = (Direction.SMALLER_IS_BETTER if self.direction == Direction.GREATER_IS_BETTER
                   else Direction.GREATER_IS_BETTER)
        return self.model_copy(update={"delta": -self.delta, "direction": flipped})


class SampleSizeSolution(BaseModel):
    """Fractional and whole-patient subtrial sample sizes with solver diagnostics"""
    model_config = ConfigDict(frozen=True)

    mode: SolutionMode
    labels: List[str]
    n_fractional: List[float]
    n_integer: List[int]
    residuals: List[float]
    clamped: List[bool]
    iterations: int = 0
    converged: bool = True
    tolerance: float = 1e-8

    @model_validator(mode="after")
    def _check_invariants(self) -> "SampleSizeSolution":
        if any(n < 0 for n in self.n_fractional):
            raise ValueError("sample sizes must be nonnegative")
        if self.n_integer != [math.ceil(n) for n in self.n_fractional]:
            raise ValueError("integer sizes must be the ceiling of the fractional sizes")
        if self.converged and self.max_residual >= self.tolerance:
            raise ValueError(f"converged solution has residual {self.max_residual} >= {self.tolerance}")
        return self

    @property
    def K(self) -> int:
        return len(self.n_fractional)

    @property
    def max_residual(self) -> float:
        return max((abs(r) for r in self.residuals), default=0.0)

    @property
    def total_fractional(self) -> float:
        return float(sum(self.n_fractional))

    @property
    def total_integer(self) -> int:
        return int(sum(self.n_integer))

    @property
    def prior_sufficient(self) -> List[bool]:
        """Subtrials whose requirement is met without any patients"""
        return list(self.clamped)


class NewtonResult(NamedTuple):
    x: np.ndarray
    iterations: int
    converged: bool
    residuals: np.ndarray


def required_precision(spec: DecisionSpec, K: Optional[int] = None) -> Union[float, np.ndarray]:
    """
    Posterior precision ((z_η + z_ζk)/δ)² needed for a decisive verdict

    Args:
        spec: Decision specification
        K: Number of subtrials; when omitted and ζ is a single value a float is returned

    Returns:
        Required precision per subtrial
    """
    z_eta = std_normal_quantile(spec.eta)
    if K is None and len(spec.zeta) == 1:
        return ((z_eta + std_normal_quantile(spec.zeta[0])) / spec.delta) ** 2
    zetas = spec.zetas(K if K is not None else len(spec.zeta))
    z_zeta = np.array([std_normal_quantile(z) for z in zetas])
    return ((z_eta + z_zeta) / spec.delta) ** 2


def constraint_residuals(design: BasketDesign, spec: DecisionSpec, n: Sequence[float]) -> np.ndarray:
    """Posterior precision of every θ_k at sizes n minus the required precision"""
    n_arr = np.asarray(n, dtype=float)
    precision = n_arr * design.info_per_patient + 1.0 / collective_prior_variances(design, n_arr)
    return precision - required_precision(spec, design.K)


def _no_borrowing_sizes(design: BasketDesign, spec: DecisionSpec) -> np.ndarray:
    """Unclamped closed-form sizes; negative where the prior alone suffices"""
    target = required_precision(spec, design.K)
    return (target - 1.0 / design.s02) / design.info_per_patient


def sample_size_no_borrowing(design: BasketDesign, spec: DecisionSpec) -> SampleSizeSolution:
    """
    Closed-form subtrial sizes when each subtrial is analysed on its own

    Sizes below zero (operational prior already precise enough) are clamped
    to 0 and flagged.
    """
    raw = _no_borrowing_sizes(design, spec)
    clamped = raw <= 0
    n = np.where(clamped, 0.0, raw)
    target = required_precision(spec, design.K)
    residuals = np.where(clamped, 0.0, n * design.info_per_patient + 1.0 / design.s02 - target)
    if clamped.any():
        logger.warning(f"Operational prior alone meets the requirement for subtrials {np.flatnonzero(clamped).tolist()}")

    solution = SampleSizeSolution(
        mode=SolutionMode.NO_BORROWING,
        labels=design.labels,
        n_fractional=n.tolist(),
        n_integer=[math.ceil(v) for v in n],
        residuals=residuals.tolist(),
        clamped=clamped.tolist(),
        iterations=0,
        converged=True,
        tolerance=get_config().newton_tol,
    )
    logger.info(f"No-borrowing sizes: {[round(v, 1) for v in solution.n_fractional]} (total {solution.total_fractional:.1f})")
    return solution


def finite_difference_jacobian(F: Callable[[np.ndarray], np.ndarray], x: np.ndarray) -> np.ndarray:
    """Central-difference Jacobian J[i, j] = dF_i/dx_j"""
    x = np.asarray(x, dtype=float)
    J = np.empty((len(F(x)), len(x)))
    for j in range(len(x)):
        h = max(FD_STEP, FD_STEP * abs(x[j]))
        x_plus, x_minus = x.copy(), x.copy()
        x_plus[j] += h
        x_minus[j] -= h
        J[:, j] = (F(x_plus) - F(x_minus)) / (2.0 * h)
    return J


def _newton_direction(J: np.ndarray, fx: np.ndarray) -> Optional[np.ndarray]:
    if not np.all(np.isfinite(J)) or np.linalg.cond(J) > SINGULAR_COND:
        return None
    try:
        return np.linalg.solve(J, -fx)
    except np.linalg.LinAlgError:
        return None


def solve_newton(
    F: Callable[[np.ndarray], np.ndarray],
    x0: Sequence[float],
    tol: float = 1e-8,
    max_iter: int = 100,
    lower: Optional[float] = 0.0,
) -> NewtonResult:
    """
    Damped Newton's method for a square nonlinear system F(x) = 0

    The Jacobian is taken by central finite differences. Each step is halved
    (up to 30 times) until the sup-norm of the residual decreases, and
    iterates are projected onto x >= lower. A singular Jacobian triggers one
    perturbation of the iterate before giving up.

    Args:
        F: Residual function on R^K
        x0: Starting point
        tol: Sup-norm residual tolerance
        max_iter: Maximum number of Newton steps
        lower: Projection bound, None to disable

    Returns:
        NewtonResult(x, iterations, converged, residuals)
    """
    def project(v: np.ndarray) -> np.ndarray:
        return v if lower is None else np.maximum(v, lower)

    x = project(np.array(x0, dtype=float))
    fx = np.asarray(F(x), dtype=float)
    norm = float(np.max(np.abs(fx)))
    perturbed = False
    iterations = 0

    while norm >= tol and iterations < max_iter:
        direction = _newton_direction(finite_difference_jacobian(F, x), fx)
        if direction is None:
            if perturbed:
                logger.error(f"Singular Jacobian at iterate {x.tolist()}")
                return NewtonResult(x, iterations, False, fx)
            perturbed = True
            x = project(x + 1e-4 * (1.0 + np.abs(x)))
            fx = np.asarray(F(x), dtype=float)
            norm = float(np.max(np.abs(fx)))
            logger.warning("Singular Jacobian; perturbing iterate and retrying")
            continue

        iterations += 1
        step = 1.0
        for _ in range(MAX_HALVINGS + 1):
            candidate = project(x + step * direction)
            f_candidate = np.asarray(F(candidate), dtype=float)
            candidate_norm = float(np.max(np.abs(f_candidate)))
            if np.isfinite(candidate_norm) and candidate_norm < norm:
                break
            step /= 2.0
        else:
            logger.debug(f"Line search stalled at iteration {iterations}, residual {norm:.3e}")
            return NewtonResult(x, iterations, False, fx)

        x, fx, norm = candidate, f_candidate, candidate_norm
        logger.debug(f"Newton iteration {iterations}: step {step:g}, residual {norm:.3e}")

    return NewtonResult(x, iterations, norm < tol, fx)


def sample_size_borrowing(
    design: BasketDesign,
    spec: DecisionSpec,
    x0: Optional[Sequence[float]] = None,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
) -> SampleSizeSolution:
    """
    Simultaneous subtrial sizes when every subtrial borrows from the others

    Solves, for all k, n_k R_k(1−R_k)/σ_k² + 1/Σ_{q≠k} p_qk² ξ_qk²(n_q)
    = ((z_η + z_ζk)/δ)². Subtrials whose constraint holds at n_k = 0 are
    clamped there and the remaining system is re-solved.

    Args:
        design: Basket design
        spec: Decision specification
        x0: Starting sizes, defaults to the no-borrowing sizes
        tol: Residual tolerance in precision units
        max_iter: Newton iteration cap

    Raises:
        ConvergenceError: if Newton's method fails on the reduced system
    """
    config = get_config()
    tol = config.newton_tol if tol is None else tol
    max_iter = config.newton_max_iter if max_iter is None else max_iter

    K = design.K
    start = np.maximum(_no_borrowing_sizes(design, spec), 0.0) if x0 is None else np.asarray(x0, dtype=float)
    free = np.ones(K, dtype=bool)
    total_iterations = 0

    while True:
        free_idx = np.flatnonzero(free)

        def reduced(x_free: np.ndarray, free_idx=free_idx) -> np.ndarray:
            n = np.zeros(K)
            n[free_idx] = x_free
            return constraint_residuals(design, spec, n)[free_idx]

        if free_idx.size:
            result = solve_newton(reduced, start[free_idx], tol=tol, max_iter=max_iter)
            total_iterations += result.iterations
            n = np.zeros(K)
            n[free_idx] = result.x
        else:
            result = NewtonResult(np.zeros(0), 0, True, np.zeros(0))
            n = np.zeros(K)

        residuals = constraint_residuals(design, spec, n)
        if result.converged:
            break

        # components pinned at zero with surplus precision leave the system
        stuck = free & (n <= 0) & (residuals > 0)
        if not stuck.any():
            logger.error(f"Newton's method did not converge: sizes {n.tolist()}, residuals {residuals.tolist()}")
            raise ConvergenceError(
                f"borrowing sample sizes did not converge after {total_iterations} iterations "
                f"(max residual {np.max(np.abs(residuals[free])):.3e})",
                last_iterate=n.tolist(),
                residuals=residuals.tolist(),
                iterations=total_iterations,
            )
        logger.warning(f"Clamping subtrials {np.flatnonzero(stuck).tolist()} at n = 0")
        free &= ~stuck
        start = n

    clamped = ~free
    reported = np.where(clamped, 0.0, residuals)
    solution = SampleSizeSolution(
        mode=SolutionMode.BORROWING,
        labels=design.labels,
        n_fractional=n.tolist(),
        n_integer=[math.ceil(v) for v in n],
        residuals=reported.tolist(),
        clamped=clamped.tolist(),
        iterations=total_iterations,
        converged=True,
        tolerance=tol,
    )
    logger.info(
        f"Borrowing sizes: {[round(v, 1) for v in solution.n_fractional]} "
        f"(total {solution.total_fractional:.1f}, {total_iterations} Newton iterations)"
    )
    return solution
