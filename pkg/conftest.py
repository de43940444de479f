"""
Shared fixtures: the worked-example and simulation-scenario designs
"""

import logging
import os
from pathlib import Path

os.environ.setdefault("LOG_TO_FILE", "false")

import pytest

from design_manager import DesignManager
from stats_core import GammaMixtureHyper
from utils.logger import setup_logger

# bind the console handler to the real stderr before CliRunner swaps streams
setup_logger(console_level=logging.WARNING)

REPO_ROOT = Path(__file__).resolve().parent


@pytest.fixture
def manager():
    return DesignManager()


@pytest.fixture
def hyper():
    return GammaMixtureHyper(a1=1.1, b1=1.1, a2=54.0, b2=3.0)


@pytest.fixture
def oacs_config(manager):
    return manager.get_preset("oacs")


@pytest.fixture
def oacs(oacs_config):
    return oacs_config.to_design()


@pytest.fixture
def oacs_spec(oacs_config):
    return oacs_config.to_spec()


@pytest.fixture
def summit_config(manager):
    return manager.get_preset("summit")


@pytest.fixture
def summit(summit_config):
    return summit_config.to_design()


@pytest.fixture
def summit_spec(summit_config):
    return summit_config.to_spec()


@pytest.fixture
def scenario4_config(manager):
    return manager.get_preset("scenario4")


@pytest.fixture
def scenario6_config(manager):
    return manager.get_preset("scenario6")


@pytest.fixture
def homoscedastic(scenario4_config):
    """Seven subtrials, σ² = 0.3, R = 0.5, all w = 0"""
    return scenario4_config.to_design()


@pytest.fixture
def tumour_spec(scenario4_config):
    """η = 0.95, ζ = 0.80, δ = −0.4"""
    return scenario4_config.to_spec()


@pytest.fixture
def schema_dir():
    return REPO_ROOT / "schemas"
