import re
from dataclasses import replace
from pathlib import Path

import pytest

from config import AppConfig, get_config


def test_defaults_validate():
    assert get_config().validate()


@pytest.mark.parametrize("field,value,message", [
    ("log_level", "LOUD", "LOG_LEVEL"),
    ("newton_tol", 0.0, "NEWTON_TOL"),
    ("newton_max_iter", 0, "NEWTON_MAX_ITER"),
    ("default_c0", -1.0, "DEFAULT_C0"),
    ("threads", 0, "BASKET_SSD_THREADS"),
    ("default_replicates", 0, "DEFAULT_REPLICATES"),
    ("chunk_size", 0, "SIM_CHUNK_SIZE"),
])
def test_invalid_settings(field, value, message):
    config = replace(AppConfig(), **{field: value})
    with pytest.raises(ValueError, match=message):
        config.validate()


def test_requested_threads(monkeypatch):
    monkeypatch.delenv("BASKET_SSD_THREADS", raising=False)
    config = replace(AppConfig(), threads=8)
    assert config.resolve_threads(3) == 3
    assert config.resolve_threads(None) == 8
    assert config.resolve_threads(0) == 8


def test_environment_wins_over_flag(monkeypatch):
    monkeypatch.setenv("BASKET_SSD_THREADS", "2")
    config = replace(AppConfig(), threads=2)
    assert config.resolve_threads(6) == 2


def test_env_example_matches_settings():
    root = Path(__file__).resolve().parent
    documented = {
        line.split("=", 1)[0]
        for line in (root / "env_example.txt").read_text(encoding="utf-8").splitlines()
        if line and not line.startswith("#")
    }
    source = (root / "config.py").read_text(encoding="utf-8")
    read = set(re.findall(r"(?:getenv|_env_flag)\('([A-Z0-9_]+)'", source))
    assert documented == read
    assert "OUTPUT_DIR" not in read
