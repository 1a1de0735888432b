import copy
import json
import logging

import pytest

from transition_config import (PAIR_IDS, TRANSITION_CONFIG, TRANSITION_ORDER, RunConfig, deep_merge,
                               get_file_pattern, get_system_defaults, load_config_file, validate_transition_config)
from transition_env import configure_logging, load_config_from_env, validate_config
from transition_errors import InvalidInputError


def test_shipped_config_is_valid():
    assert validate_transition_config() == []
    assert TRANSITION_ORDER == ("W-S", "S-W", "W-SA", "SA-W", "W-SD", "SD-W")
    assert PAIR_IDS == ("ws", "wsa", "wsd")


def test_validation_reports_each_problem():
    config = copy.deepcopy(TRANSITION_CONFIG)
    config["objective"]["c2"] = 0.01
    config["search_spaces"]["wsd"]["bounds"] = [25.0, 0.0]
    del config["systems"]["ewalk"]["thresholds"]["SD-W"]
    errors = validate_transition_config(config)
    assert len(errors) == 3
    assert any("SD-W" in e for e in errors)


def test_system_defaults_are_copies():
    defaults = get_system_defaults("EWALK")
    defaults["thr_range"][0] = 0.0
    assert get_system_defaults("ewalk")["thr_range"] == [62.0, 75.0]
    with pytest.raises(ValueError):
        get_system_defaults("exo")


def test_file_patterns():
    assert get_file_pattern("tune_result", method="bo", pair="wsd") == "transition_tune_bo_wsd.json"
    assert get_file_pattern("unheard_of") == "transition_unheard_of.json"


def test_deep_merge_keeps_siblings():
    merged = deep_merge({"bo": {"k": 0.5, "budget": 30}}, {"bo": {"k": 0.9}})
    assert merged == {"bo": {"k": 0.9, "budget": 30}}


def test_config_file_must_hold_an_object(tmp_path):
    path = tmp_path / "c.json"
    path.write_text("[1, 2]", encoding="utf-8")
    with pytest.raises(ValueError):
        load_config_file(path)
    with pytest.raises(FileNotFoundError):
        load_config_file(tmp_path / "missing.json")


# ---- run configuration ----

def test_precedence_flags_file_env_defaults():
    env = {"system": "autonomyo", "output_dir": "env_out", "data_dir": "env_data"}
    file_settings = {"output_dir": "file_out", "seed": 11, "objective": {"c1": 0.01, "c2": 0.002}}
    flags = {"seed": 3, "pair": None, "objective": {"alpha": 0.0}}
    run = RunConfig.assemble(flags, file_settings, env)
    assert run.system == "autonomyo"
    assert run.output_dir == "file_out"
    assert run.input_path == "env_data"
    assert run.seed == 3
    assert run.pair is None
    assert run.objective == {"c1": 0.01, "c2": 0.002, "alpha": 0.0}
    assert run.budget is None


def test_unknown_settings_are_rejected():
    with pytest.raises(InvalidInputError):
        RunConfig.from_dict({"sistem": "ewalk"})


def test_run_config_round_trip():
    run = RunConfig.from_dict({"system": "AUTONOMYO", "seed": "4", "budget": 20, "excluded_subjects": ["S3"]})
    assert run.system == "autonomyo" and run.seed == 4
    assert RunConfig.from_dict(json.loads(json.dumps(run.to_dict()))) == run


def test_run_config_validation(tmp_path):
    assert RunConfig().validate().system == "ewalk"
    with pytest.raises(InvalidInputError):
        RunConfig(system="exo").validate()
    with pytest.raises(InvalidInputError):
        RunConfig(pair="sit").validate()
    with pytest.raises(InvalidInputError):
        RunConfig(budget=0).validate()
    with pytest.raises(InvalidInputError):
        RunConfig(grf_scale=0.0).validate()
    assert RunConfig.from_dict({"grf_scale": "700", "column_map": "zenodo"}).grf_scale == 700.0
    with pytest.raises(FileNotFoundError):
        RunConfig(thresholds_path=str(tmp_path / "none.json")).validate()


# ---- environment ----

def test_environment_overrides(monkeypatch, tmp_path):
    monkeypatch.setenv("TRANSITION_SYSTEM", " Autonomyo ")
    monkeypatch.setenv("TRANSITION_DATA_DIR", str(tmp_path))
    config = load_config_from_env()
    assert config == {"system": "autonomyo", "data_dir": str(tmp_path)}
    assert validate_config(config)


def test_unset_environment_gives_nothing():
    assert load_config_from_env() == {}


def test_environment_validation(tmp_path):
    assert not validate_config(None)
    assert not validate_config({"log_level": "LOUD"})
    assert not validate_config({"system": "exo"})
    assert not validate_config({"data_dir": str(tmp_path / "missing")})


def test_logging_level_is_applied():
    configure_logging("debug")
    assert logging.getLogger().level == logging.DEBUG
    configure_logging("nonsense")
    assert logging.getLogger().level == logging.INFO
