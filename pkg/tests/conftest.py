"""Shared fixtures: detector settings, default thresholds and synthetic trials."""

import pytest

from eval_harness import scenario_trials
from signal_core import DetectorConfig
from threshold_learn import ThresholdSet


@pytest.fixture(autouse=True)
def isolated_env(monkeypatch, tmp_path):
    """Keep a developer's .env and TRANSITION_* variables out of the tests."""
    for var in ("TRANSITION_LOG_LEVEL", "TRANSITION_OUTPUT_DIR", "TRANSITION_DATA_DIR", "TRANSITION_SYSTEM"):
        monkeypatch.delenv(var, raising=False)
    monkeypatch.setattr("transition_env.load_dotenv", lambda *args, **kwargs: False)
    monkeypatch.chdir(tmp_path)


@pytest.fixture
def detector():
    return DetectorConfig.for_system("ewalk")


@pytest.fixture
def ewalk_thresholds():
    return ThresholdSet.defaults("ewalk")


@pytest.fixture(scope="session")
def sit_trials():
    return scenario_trials("w-s", 5)


@pytest.fixture(scope="session")
def sa_trials():
    return scenario_trials("w-sa", 5)


@pytest.fixture(scope="session")
def sd_trials():
    return scenario_trials("w-sd", 5)


@pytest.fixture(scope="session")
def outlier_trials():
    return scenario_trials("sd-outlier", 5)
