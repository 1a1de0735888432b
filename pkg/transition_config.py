#!/usr/bin/env python3
"""
Transition Toolkit Configuration
Built-in defaults for detection, threshold tuning and evaluation runs.
A run can override any entry through a JSON file (--config) and command-line flags
"""

import copy
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional

from transition_env import VALID_SYSTEMS
from transition_errors import InvalidInputError

# =============================================================================
# TRANSITION TOOLKIT CONFIGURATION
# =============================================================================
TRANSITION_CONFIG = {
    # ============== PROJECT IDENTIFICATION ==============
    "project": {
        "name": "Locomotion Transition Toolkit",
        "identifier": "transition",
        "description": "Threshold-gated transition detection with per-subject threshold tuning"
    },

    # ============== PER-SYSTEM DEFAULTS ==============
    # Threshold units: deg for ICF-1/ICF-2 rules, deg/s for ICF-3 rules
    "systems": {
        "ewalk": {
            "thr_range": [62.0, 75.0],
            "thresholds": {
                "W-S": 23.32, "S-W": -4.32,
                "W-SA": 50.52, "SA-W": 51.21,
                "W-SD": 10.37, "SD-W": 9.62
            }
        },
        "autonomyo": {
            "thr_range": [55.0, 70.0],
            "thresholds": {
                "W-S": 23.32, "S-W": -4.32,
                "W-SA": 50.52, "SA-W": 51.21,
                "W-SD": 13.37, "SD-W": 9.62
            }
        },
        "custom": {                                    # Starting point for new devices
            "thr_range": [62.0, 75.0],
            "thresholds": {
                "W-S": 23.32, "S-W": -4.32,
                "W-SA": 50.52, "SA-W": 51.21,
                "W-SD": 10.37, "SD-W": 9.62
            }
        }
    },

    # ============== RULE BOUND CONVENTION ==============
    "bound_convention": {
        "W-S": "exceed", "S-W": "fall_below",
        "W-SA": "exceed", "SA-W": "fall_below",
        "W-SD": "exceed", "SD-W": "fall_below"
    },

    # ============== GAIT EVENT DETECTORS ==============
    "detector": {
        "mhf_velocity_band": 5.0,                      # deg/s half-width around zero
        "grf_load_threshold": 0.2,                     # normalized body weight
        "grf_debounce": 5,                             # samples (50 ms at 100 Hz)
        "smoothing_window": 5,                         # samples, 1 disables smoothing
        "sample_rate": 100.0                           # Hz, synthetic data only
    },

    # ============== THRESHOLD SEARCH SPACES ==============
    "search_spaces": {
        "ws": {"bounds": [-60.0, 60.0], "grid_step": 10.0},
        "wsa": {"bounds": [30.0, 65.0], "grid_step": 2.5},
        "wsd": {"bounds": [0.0, 25.0], "grid_step": 2.5}
    },

    # ============== TUNING OBJECTIVE ==============
    "objective": {
        "c1": 0.005,
        "c2": 0.001,
        "alpha": 2e-5,
        "limits": {
            "wsa": {"value": 55.0, "side": "upper"},   # penalize thresholds above 55 deg
            "wsd": {"value": 5.0, "side": "lower"}     # penalize thresholds below 5 deg
        }
    },

    # ============== BAYESIAN OPTIMIZATION ==============
    "bo": {
        "budget": 30,
        "k": 0.5,
        "n_initial": 5,
        "resolution": 101,
        "patience": None,                              # e.g. 10 to stop early
        "seed": 0
    },

    # ============== GAUSSIAN PROCESS ==============
    "gp": {
        "lengthscale": 0.2,
        "noise_ratio": 1e-6,
        "jitter": 1e-9,
        "min_signal_variance": 1e-6,
        "refit": False
    },

    # ============== THRESHOLD LEARNING ==============
    "threshold_learning": {
        "learner": "logistic",                         # logistic | stump
        "lr": 0.1,
        "epochs": 5000
    },

    # ============== EVALUATION ==============
    "evaluation": {
        "excluded_subjects": [],                       # e.g. ["S3", "S7"]
        "window_step_periods": 2.0,                    # fallback window when no second HS
        "step_period": 1.1,                            # s, used when a trial has < 2 heel strikes
        "n_train": 2,
        "min_instances": 5
    },

    # ============== SYNTHETIC GAIT GENERATOR ==============
    "synthetic": {
        "step_period": 1.1,                            # s per stride
        "trough": -15.0,                               # deg, thigh extension minimum
        "mhf_angles": {"walk": 30.0, "sa": 57.0, "sd": 35.0},
        "icf2": {"walk": 5.0, "sa": 5.0, "sd": 15.0},
        "sit_angle": 90.0,
        "sit_rate": 45.0,                              # deg/s sitting down
        "stand_rate": 45.0,                            # deg/s standing up (magnitude)
        "approach_rate": 50.0,                         # deg/s between stance and standing
        "hold_time": 0.5,
        "seated_time": 1.5
    },

    # ============== ALIGNMENT MAPPING ==============
    "mapping": {
        "cycle_points": 100
    },

    # ============== FILE NAMING PATTERNS ==============
    "file_patterns": {
        "trial": "{subject}_{scenario}_trial{index:02d}.csv",
        "detection_log": "{identifier}_detections_{name}.csv",
        "icf_samples": "{identifier}_icf_{name}.csv",
        "thresholds": "{identifier}_thresholds_{name}.json",
        "report_json": "{identifier}_report_{name}.json",
        "report_csv": "{identifier}_report_{name}.csv",
        "tune_result": "{identifier}_tune_{method}_{pair}.json",
        "map_weights": "{identifier}_map_weights.json",
        "map_report": "{identifier}_map_report.json",
        "mapped_trial": "{identifier}_mapped_{name}.csv",
        "surrogate": "plot_surrogate_{method}_{pair}.csv",
        "summary": "{identifier}_summary_{name}.csv",
        "lattice": "plot_lattice_{method}_{pair}.csv",
        "trace": "plot_trace_{method}_{pair}.csv",
        "comparison": "plot_comparison_{pair}.json",
        "accuracy_bars": "plot_accuracy_bars.csv",
        "threshold_changes": "plot_threshold_changes.csv",
        "evaluation_counts": "plot_evaluation_counts.csv"
    }
}

TRANSITION_ORDER = ("W-S", "S-W", "W-SA", "SA-W", "W-SD", "SD-W")
PAIR_IDS = ("ws", "wsa", "wsd")

# =============================================================================
# HELPER FUNCTIONS
# =============================================================================

def get_transition_config():
    """Get a deep copy of the built-in configuration"""
    return copy.deepcopy(TRANSITION_CONFIG)


def get_project_info():
    """Get project information from config"""
    config = get_transition_config()
    return config.get("project", {
        "name": "Unknown Project",
        "identifier": "unknown",
        "description": "Transition study"
    })


def get_system_defaults(system):
    """Get THR range and default thresholds for a system tag"""
    systems = TRANSITION_CONFIG["systems"]
    key = str(system).lower()
    if key not in systems:
        raise ValueError(f"Unknown system '{system}' (expected one of {', '.join(systems)})")
    return copy.deepcopy(systems[key])


def get_file_pattern(pattern_type, **kwargs):
    """Get a file naming pattern with substitutions"""
    project = get_project_info()
    patterns = TRANSITION_CONFIG.get("file_patterns", {})
    pattern = patterns.get(pattern_type, f"{project['identifier']}_{pattern_type}.json")

    kwargs.setdefault('identifier', project['identifier'])
    return pattern.format(**kwargs)


def deep_merge(base, override):
    """Recursively merge override into a copy of base (override wins)"""
    merged = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def load_config_file(path):
    """Load a JSON override file; a missing path raises FileNotFoundError"""
    path = Path(path)
    with open(path, 'r', encoding='utf-8') as f:
        data = json.load(f)
    if not isinstance(data, dict):
        raise ValueError(f"Config file {path} must contain a JSON object")
    return data


def validate_transition_config(config=None):
    """
    Validate a configuration dictionary

    Returns:
        list: Error messages (empty when valid)
    """
    config = config if config is not None else get_transition_config()
    errors = []

    for system, entry in config.get("systems", {}).items():
        low, high = entry.get("thr_range", [None, None])
        if low is None or high is None or not low < high:
            errors.append(f"System '{system}': thr_range must satisfy low < high")
        missing = [name for name in TRANSITION_ORDER if name not in entry.get("thresholds", {})]
        if missing:
            errors.append(f"System '{system}': missing thresholds for {', '.join(missing)}")

    detector = config.get("detector", {})
    if not detector.get("mhf_velocity_band", 0) > 0:
        errors.append("detector.mhf_velocity_band must be > 0")
    if detector.get("grf_load_threshold", -1) < 0:
        errors.append("detector.grf_load_threshold must be >= 0")
    if int(detector.get("smoothing_window", 0)) < 1:
        errors.append("detector.smoothing_window must be >= 1")

    for pair_id, space in config.get("search_spaces", {}).items():
        low, high = space.get("bounds", [None, None])
        if low is None or high is None or not low < high:
            errors.append(f"Search space '{pair_id}': bounds must satisfy low < high")
        if not space.get("grid_step", 0) > 0:
            errors.append(f"Search space '{pair_id}': grid_step must be > 0")

    objective = config.get("objective", {})
    c1, c2 = objective.get("c1", 0), objective.get("c2", 0)
    if not (c1 > c2 > 0):
        errors.append("objective: C1 > C2 > 0 is required")
    if objective.get("alpha", -1) < 0:
        errors.append("objective.alpha must be >= 0")

    bo = config.get("bo", {})
    if bo.get("budget", 0) < bo.get("n_initial", 1):
        errors.append("bo.budget must be >= bo.n_initial")
    if not 0 <= bo.get("k", -1) <= 1:
        errors.append("bo.k must lie in [0, 1]")

    return errors


def print_config_plan(config=None):
    """Print the active configuration"""
    config = config if config is not None else get_transition_config()
    project = config.get("project", {})

    print(f"\n>> {project.get('name', 'Unknown').upper()} CONFIGURATION")
    print("=" * 60)
    print(f">> Description: {project.get('description', '')}")

    print(f"\n>> SYSTEMS:")
    for system, entry in config.get("systems", {}).items():
        thr = entry.get("thr_range")
        print(f"   {system}: THR {thr}")
        for name in TRANSITION_ORDER:
            bound = config.get("bound_convention", {}).get(name, "?")
            print(f"      {name:5s} {entry['thresholds'].get(name):>8} ({bound})")

    bo = config.get("bo", {})
    print(f"\n>> BAYESIAN OPTIMIZATION:")
    print(f"   Budget: {bo.get('budget')}  k: {bo.get('k')}  initial design: {bo.get('n_initial')}")

    excluded = config.get("evaluation", {}).get("excluded_subjects", [])
    if excluded:
        print(f"\n>> EXCLUDED SUBJECTS: {', '.join(excluded)}")


# =============================================================================
# RUN CONFIGURATION
# =============================================================================

# Environment keys from transition_env.load_config_from_env() and the RunConfig field they feed
ENV_FIELDS = {"system": "system", "output_dir": "output_dir", "data_dir": "input_path", "log_level": "log_level"}


@dataclass
class RunConfig:
    """Effective settings of one command-line run."""

    system: str = "ewalk"
    detector: Dict[str, Any] = field(default_factory=dict)     # overrides of the system detector defaults
    objective: Dict[str, Any] = field(default_factory=dict)    # overrides of c1, c2, alpha, limit, limit_side
    thresholds_path: Optional[str] = None
    map_weights_path: Optional[str] = None
    input_path: Optional[str] = None
    column_map: Optional[str] = None                           # preset name or JSON file of column renames
    grf_scale: float = 1.0                                     # raw GRF units per normalized unit
    output_dir: str = "results"
    seed: int = TRANSITION_CONFIG["bo"]["seed"]
    pair: Optional[str] = None
    budget: Optional[int] = None
    excluded_subjects: List[str] = field(
        default_factory=lambda: list(TRANSITION_CONFIG["evaluation"]["excluded_subjects"]))
    log_level: str = "INFO"

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise InvalidInputError(f"Unknown run settings: {', '.join(unknown)}")
        data = copy.deepcopy(dict(data))
        if data.get("seed") is not None:
            data["seed"] = int(data["seed"])
        if data.get("budget") is not None:
            data["budget"] = int(data["budget"])
        if data.get("grf_scale") is not None:
            data["grf_scale"] = float(data["grf_scale"])
        if "excluded_subjects" in data:
            data["excluded_subjects"] = [str(s) for s in data["excluded_subjects"] or []]
        if "system" in data:
            data["system"] = str(data["system"]).lower()
        return cls(**data)

    @classmethod
    def assemble(cls, flags=None, file_settings=None, env=None) -> "RunConfig":
        """Merge settings with precedence flags > config file > environment > defaults."""
        data = cls().to_dict()
        for key, value in (env or {}).items():
            if key in ENV_FIELDS:
                data[ENV_FIELDS[key]] = value
        data = deep_merge(data, file_settings or {})
        for key, value in (flags or {}).items():
            if value is None:
                continue
            if isinstance(value, dict) and isinstance(data.get(key), dict):
                data[key] = deep_merge(data[key], value)
            else:
                data[key] = value
        return cls.from_dict(data)

    def validate(self) -> "RunConfig":
        if self.system not in VALID_SYSTEMS:
            raise InvalidInputError(f"Unknown system '{self.system}' (expected one of {', '.join(VALID_SYSTEMS)})")
        for name in ("thresholds_path", "map_weights_path", "input_path"):
            path = getattr(self, name)
            if path and not Path(path).exists():
                raise FileNotFoundError(f"{name.replace('_', ' ')} does not exist: {path}")
        if self.pair is not None and self.pair not in PAIR_IDS:
            raise InvalidInputError(f"Unknown pair '{self.pair}' (expected one of {', '.join(PAIR_IDS)})")
        if self.budget is not None and self.budget < 1:
            raise InvalidInputError("budget must be >= 1")
        if not self.grf_scale > 0:
            raise InvalidInputError(f"grf_scale must be > 0, got {self.grf_scale}")
        return self


if __name__ == "__main__":
    """Test configuration when run directly"""
    errors = validate_transition_config()
    if errors:
        print("[ERROR] Configuration is invalid:")
        for error in errors:
            print(f"   - {error}")
    else:
        print("[OK] Configuration validated!")
    print_config_plan()
