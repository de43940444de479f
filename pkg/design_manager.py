import json
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from commensurate import BasketDesign, SubtrialDesign, WeightMatrix, check_weight_entries, hellinger_weight_matrix
from config import get_config
from sim_engine import ScenarioConfig
from ssd_solver import DecisionSpec
from stats_core import GammaMixtureHyper
from utils.config_validator import ConfigFileValidator
from utils.errors import ConfigurationError, DesignValidationError
from utils.logger import get_logger

logger = get_logger(__name__)


class HellingerWeights(BaseModel):
    """Weights derived from pairwise Hellinger distances of the assumed outcome distributions"""
    model_config = ConfigDict(frozen=True)

    mode: Literal["hellinger"]
    arm_means: List[float]
    arm_sds: List[float]

    @field_validator("arm_sds")
    @classmethod
    def _check_sds(cls, sds: List[float]) -> List[float]:
        if any(sd <= 0 for sd in sds):
            raise ValueError("standard deviations must be positive")
        return sds


class SimulationSection(BaseModel):
    """Optional true-parameter section driving the simulate command"""
    model_config = ConfigDict(frozen=True)

    name: Optional[str] = None
    mu_E: List[float]
    mu_C: Optional[List[float]] = None
    sigma2: Optional[List[float]] = None
    n: Optional[List[int]] = None
    replicates: Optional[int] = Field(None, ge=1)
    seed: Optional[int] = Field(None, ge=0)
    allocation: Literal["random", "fixed"] = "random"


class DesignConfigFile(BaseModel):
    """Schema of a JSON design config"""
    model_config = ConfigDict(frozen=True)

    name: Optional[str] = None
    subtrials: List[SubtrialDesign]
    weights: Union[HellingerWeights, List[List[float]]]
    hyper: GammaMixtureHyper
    c0: float = Field(default_factory=lambda: get_config().default_c0, gt=0)
    decision: DecisionSpec
    simulation: Optional[SimulationSection] = None

    @field_validator("subtrials")
    @classmethod
    def _check_subtrials(cls, subtrials: List[SubtrialDesign]) -> List[SubtrialDesign]:
        if len(subtrials) < 2:
            raise ValueError("at least 2 required")
        return subtrials

    @field_validator("weights")
    @classmethod
    def _check_weights(cls, weights):
        if isinstance(weights, list):
            return check_weight_entries(weights)
        return weights

    @model_validator(mode="after")
    def _check_lengths(self) -> "DesignConfigFile":
        K = len(self.subtrials)
        if isinstance(self.weights, HellingerWeights):
            for name in ("arm_means", "arm_sds"):
                if len(getattr(self.weights, name)) != K:
                    raise ValueError(f"weights.{name}: expected {K} values, got {len(getattr(self.weights, name))}")
        elif len(self.weights) != K:
            raise ValueError(f"weights: matrix is {len(self.weights)}x{len(self.weights)} but there are {K} subtrials")

        if len(self.decision.zeta) not in (1, K):
            raise ValueError(f"decision.zeta: {len(self.decision.zeta)} values given for {K} subtrials")

        if self.hyper.substantial_variance <= self.hyper.limited_variance:
            raise ValueError("hyper: b1/(a1-1) must exceed b2/(a2-1)")

        if self.simulation is not None:
            for name in ("mu_E", "mu_C", "sigma2", "n"):
                values = getattr(self.simulation, name)
                if values is not None and len(values) != K:
                    raise ValueError(f"simulation.{name}: expected {K} values, got {len(values)}")
        return self

    @property
    def K(self) -> int:
        return len(self.subtrials)

    def weight_matrix(self) -> WeightMatrix:
        if isinstance(self.weights, HellingerWeights):
            return hellinger_weight_matrix(self.weights.arm_means, self.weights.arm_sds)
        return WeightMatrix(entries=self.weights)

    def to_design(self) -> BasketDesign:
        return BasketDesign(subtrials=self.subtrials, weights=self.weight_matrix(), hyper=self.hyper, c0=self.c0)

    def to_spec(self) -> DecisionSpec:
        return self.decision

    def to_scenario(
        self,
        n: Optional[Sequence[int]] = None,
        replicates: Optional[int] = None,
        seed: Optional[int] = None,
    ) -> ScenarioConfig:
        """
        Build the simulation scenario; command-line values override the file

        Raises:
            ConfigurationError: if there is no simulation section or no sizes
        """
        if self.simulation is None:
            raise ConfigurationError("section missing", field="simulation")
        sim = self.simulation
        sizes = list(n) if n is not None else sim.n
        if sizes is None:
            raise ConfigurationError("no subtrial sizes given; pass --solve-n to solve them", field="simulation.n")

        app_config = get_config()
        try:
            return ScenarioConfig(
                name=sim.name or self.name or "scenario",
                mu_E=sim.mu_E,
                mu_C=sim.mu_C if sim.mu_C is not None else [0.0] * self.K,
                sigma2=sim.sigma2 if sim.sigma2 is not None else [s.sigma2 for s in self.subtrials],
                n=sizes,
                R=[s.R for s in self.subtrials],
                replicates=replicates or sim.replicates or app_config.default_replicates,
                seed=next(v for v in (seed, sim.seed, app_config.default_seed) if v is not None),
                allocation=sim.allocation,
            )
        except ValidationError as e:
            raise ConfigurationError(_first_error_message(e), field="simulation") from e


def _first_error_message(error: ValidationError) -> str:
    detail = error.errors()[0]
    message = detail["msg"]
    if message.startswith("Value error, "):
        message = message[len("Value error, "):]
    return message


def translate_validation_error(error: ValidationError) -> DesignValidationError:
    """Turn the first pydantic error into a DesignValidationError naming the dotted field path"""
    detail = error.errors()[0]
    field = ".".join(str(part) for part in detail["loc"]) or None
    return DesignValidationError(_first_error_message(error), field=field)


def _get_default_presets() -> Dict[str, Dict[str, Any]]:
    """Worked examples and homoscedastic simulation scenarios"""
    hyper = {"a1": 1.1, "b1": 1.1, "a2": 54.0, "b2": 3.0}
    summit_means = [-0.489, 0.226, -0.181, 0.293, 0.329, -0.275, -0.136]
    summit_sds = [0.587, 0.345, 0.380, 0.347, 0.344, 0.392, 0.392]
    summit_variances = [0.344569, 0.119025, 0.1444, 0.120409, 0.118336, 0.153664, 0.153664]
    tumour_decision = {"eta": 0.95, "zeta": 0.80, "delta": -0.4, "direction": "smaller_is_better"}

    def homoscedastic(name: str, effect: float) -> Dict[str, Any]:
        return {
            "name": name,
            "subtrials": [{"label": f"subtrial {k + 1}", "sigma2": 0.3, "R": 0.5, "m0": 0.0, "s02": 100.0} for k in range(7)],
            "weights": [[0.0] * 7 for _ in range(7)],
            "hyper": hyper,
            "c0": 0.05,
            "decision": tumour_decision,
            "simulation": {"name": name, "mu_E": [effect] * 7, "mu_C": [0.0] * 7, "replicates": 100000, "seed": 20210101},
        }

    return {
        "oacs": {
            "name": "oacs",
            "subtrials": [
                {"label": "OACS-1", "sigma2": 6.177, "R": 0.5, "m0": 0.0, "s02": 100.0},
                {"label": "OACS-2", "sigma2": 5.134, "R": 0.6, "m0": 0.0, "s02": 100.0},
                {"label": "OACS-3", "sigma2": 5.134, "R": 0.6, "m0": 0.0, "s02": 100.0},
            ],
            "weights": [[0.0, 0.239, 0.417], [0.239, 0.0, 0.145], [0.417, 0.145, 0.0]],
            "hyper": hyper,
            "c0": 0.05,
            "decision": {"eta": 0.95, "zeta": [0.90, 0.80, 0.80], "delta": 2.3, "direction": "greater_is_better"},
        },
        "summit": {
            "name": "summit",
            "subtrials": [
                {"label": f"subtrial {k + 1}", "sigma2": sigma2, "R": 0.5, "m0": 0.0, "s02": 100.0}
                for k, sigma2 in enumerate(summit_variances)
            ],
            "weights": {"mode": "hellinger", "arm_means": summit_means, "arm_sds": summit_sds},
            "hyper": hyper,
            "c0": 0.05,
            "decision": tumour_decision,
            "simulation": {"name": "summit", "mu_E": summit_means, "mu_C": [0.0] * 7, "replicates": 100000, "seed": 20210101},
        },
        "scenario4": homoscedastic("scenario4", -0.4),
        "scenario6": homoscedastic("scenario6", 0.0),
    }


class DesignManager:
    """
    Loads, validates, saves and dumps design configs, and serves built-in presets
    """

    def __init__(self):
        self.config = get_config()
        self.validator = ConfigFileValidator()
        self._presets = _get_default_presets()

    def parse(self, data: Dict[str, Any]) -> DesignConfigFile:
        """
        Validate a decoded config document

        Raises:
            DesignValidationError: naming the offending field
        """
        try:
            return DesignConfigFile.model_validate(data)
        except ValidationError as e:
            raise translate_validation_error(e) from e

    def load(self, path: Union[str, Path]) -> DesignConfigFile:
        """
        Load a design config from a JSON file

        Args:
            path: Path to the config

        Returns:
            DesignConfigFile
        """
        is_valid, message = self.validator.validate_file(path)
        if not is_valid:
            raise DesignValidationError(message)

        try:
            with open(path, 'r', encoding='utf-8') as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise DesignValidationError(f"invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}") from e

        if not isinstance(data, dict):
            raise DesignValidationError("top level of a design config must be an object")
        logger.info(f"Loaded design config {path}")
        return self.parse(data)

    def dump(self, config_file: DesignConfigFile) -> str:
        """Canonical JSON text of a config; loading it back gives an identical design"""
        return json.dumps(config_file.model_dump(mode="json", exclude_none=True), indent=2, ensure_ascii=False) + "\n"

    def save(self, config_file: DesignConfigFile, path: Union[str, Path]) -> bool:
        """
        Save a config to file

        Returns:
            bool: True if save was successful
        """
        try:
            target = Path(path)
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_text(self.dump(config_file), encoding='utf-8')
            return True
        except OSError as e:
            logger.error(f"Error saving design config: {e}")
            return False

    def list_presets(self) -> List[str]:
        return list(self._presets)

    def get_preset(self, name: str) -> DesignConfigFile:
        if name not in self._presets:
            raise DesignValidationError(f"unknown preset '{name}'; available: {', '.join(self._presets)}")
        return self.parse(self._presets[name])

    def resolve(self, source: Union[str, Path]) -> DesignConfigFile:
        """Load source as a file path, falling back to a preset of that name"""
        if Path(source).is_file() or str(source).lower().endswith(".json"):
            return self.load(source)
        if str(source) in self._presets:
            return self.get_preset(str(source))
        raise DesignValidationError(f"no config file or preset named '{source}'")

    def export_presets(self, directory: Union[str, Path]) -> List[Path]:
        """Write every preset as <name>.json into directory"""
        written = []
        for name in self._presets:
            target = Path(directory) / f"{name}.json"
            if self.save(self.get_preset(name), target):
                written.append(target)
        return written
