#!/usr/bin/env python3
"""
BO Tuner - Threshold Personalization by Bayesian Optimization
Frame-level objective over labeled trials, a GP/LCB optimization loop with a
fixed evaluation budget, and the exhaustive grid-search baseline
"""

from __future__ import annotations

import itertools
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import qmc

from alignment_map import MappingWeights
from eval_harness import Trial, evaluate_trials, prepare_frames
from fsm_engine import TransitionFSM
from gp_core import acquisition_value, default_hyper, gp_fit, gp_predict, refit_hyper
from signal_core import DetectorConfig, LocomotionState, TransitionPair, detect_gait_events, frames_to_arrays
from threshold_learn import ThresholdSet
from transition_config import TRANSITION_CONFIG
from transition_errors import InvalidInputError, OptimizationAbortedError

logger = logging.getLogger(__name__)

_STATE_CODES = {state: code for code, state in enumerate(LocomotionState)}


# =============================================================================
# SEARCH SPACE AND OBJECTIVE SETTINGS
# =============================================================================

@dataclass(frozen=True)
class SearchSpace:
    pair: TransitionPair
    bounds: Tuple[Tuple[float, float], Tuple[float, float]]
    grid_step: float

    def __post_init__(self):
        object.__setattr__(self, "pair", TransitionPair.parse(self.pair))
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        if len(bounds) != 2:
            raise InvalidInputError("A transition-pair search space has exactly 2 axes")
        for lo, hi in bounds:
            if not lo < hi:
                raise InvalidInputError(f"Search bounds need low < high, got [{lo}, {hi}]")
        if not self.grid_step > 0:
            raise InvalidInputError("grid_step must be > 0")
        object.__setattr__(self, "bounds", bounds)

    @classmethod
    def for_pair(cls, pair) -> "SearchSpace":
        pair = TransitionPair.parse(pair)
        space = TRANSITION_CONFIG["search_spaces"][pair.value]
        low, high = space["bounds"]
        return cls(pair, ((low, high), (low, high)), space["grid_step"])

    @property
    def low(self):
        return np.array([b[0] for b in self.bounds])

    @property
    def high(self):
        return np.array([b[1] for b in self.bounds])

    def normalize(self, th):
        return (np.asarray(th, dtype=float) - self.low) / (self.high - self.low)

    def denormalize(self, u):
        return np.round(self.low + np.asarray(u, dtype=float) * (self.high - self.low), 10)

    def axis(self, dim=0, step=None) -> np.ndarray:
        """Inclusive lattice axis low, low+step, ... <= high."""
        step = step or self.grid_step
        lo, hi = self.bounds[dim]
        count = int(np.floor((hi - lo) / step + 1e-9)) + 1
        return np.round(lo + step * np.arange(count), 10)

    def lattice(self, step=None) -> List[Tuple[float, float]]:
        return [tuple(map(float, p)) for p in itertools.product(self.axis(0, step), self.axis(1, step))]


@dataclass(frozen=True)
class ObjectiveConfig:
    c1: float = TRANSITION_CONFIG["objective"]["c1"]
    c2: float = TRANSITION_CONFIG["objective"]["c2"]
    alpha: float = TRANSITION_CONFIG["objective"]["alpha"]
    limit: Optional[float] = None
    limit_side: Optional[str] = None         # 'upper' penalizes above the limit, 'lower' below

    def __post_init__(self):
        if not self.c1 > self.c2 > 0:
            raise InvalidInputError(f"Objective needs C1 > C2 > 0, got C1={self.c1}, C2={self.c2}")
        if self.alpha < 0:
            raise InvalidInputError("alpha must be >= 0")
        if self.limit_side not in (None, "upper", "lower"):
            raise InvalidInputError(f"limit_side must be 'upper' or 'lower', got {self.limit_side}")
        if (self.limit is None) != (self.limit_side is None):
            raise InvalidInputError("limit and limit_side are set together")

    @classmethod
    def for_pair(cls, pair, **overrides) -> "ObjectiveConfig":
        pair = TransitionPair.parse(pair)
        settings = TRANSITION_CONFIG["objective"]
        limit = settings["limits"].get(pair.value)
        values = {"c1": settings["c1"], "c2": settings["c2"], "alpha": settings["alpha"],
                  "limit": limit["value"] if limit else None,
                  "limit_side": limit["side"] if limit else None}
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def limit_penalty(self, th_pair) -> float:
        """(alpha/2) * squared distance to [limit, limit] over the components past the limit."""
        if self.limit is None or self.alpha == 0:
            return 0.0
        th = np.asarray(th_pair, dtype=float)
        excess = th - self.limit if self.limit_side == "upper" else self.limit - th
        excess = np.clip(excess, 0.0, None)
        return float(self.alpha / 2.0 * np.sum(excess ** 2))

    def to_dict(self):
        return {"c1": self.c1, "c2": self.c2, "alpha": self.alpha,
                "limit": self.limit, "limit_side": self.limit_side}


def frame_penalty(gt_states: Sequence, fsm_states: Sequence, class1, config: ObjectiveConfig) -> float:
    """
    C1 for every frame where the ground truth is class1 and the machine is not;
    C2 for every frame after the first class1 frame where the ground truth is
    Walk and the machine is not.
    """
    gt = np.array([_STATE_CODES[LocomotionState.parse(s)] for s in gt_states], dtype=int)
    fsm = np.array([_STATE_CODES[LocomotionState.parse(s)] for s in fsm_states], dtype=int)
    if gt.shape != fsm.shape:
        raise InvalidInputError(f"{gt.size} ground-truth frames but {fsm.size} machine frames")
    return _frame_penalty_codes(gt, fsm, _STATE_CODES[LocomotionState.parse(class1)], config)


def _frame_penalty_codes(gt, fsm, class1, config):
    walk = _STATE_CODES[LocomotionState.WALK]
    missed = np.count_nonzero((gt == class1) & (fsm != class1))
    hits = np.flatnonzero(gt == class1)
    late = 0
    if hits.size:
        after = slice(int(hits[0]), None)
        late = np.count_nonzero((gt[after] == walk) & (fsm[after] != walk))
    return config.c1 * missed + config.c2 * late


@dataclass
class _PreparedTrial:
    name: str
    t: np.ndarray
    gt: np.ndarray
    events: list
    start_state: LocomotionState


class ThresholdObjective:
    """
    J(th_pair) over a fixed set of labeled trials.

    Gait events do not depend on the thresholds, so they are detected once and
    each evaluation only replays the state machine.
    """

    def __init__(self, trials: Sequence[Trial], pair, base_thresholds: ThresholdSet,
                 config: Optional[ObjectiveConfig] = None, detector_config: Optional[DetectorConfig] = None,
                 map_weights: Optional[MappingWeights] = None):
        self.pair = TransitionPair.parse(pair)
        self.base_thresholds = base_thresholds
        self.config = config or ObjectiveConfig.for_pair(self.pair)
        self.detector_config = detector_config or DetectorConfig.for_system(base_thresholds.system)
        self.class1 = self.pair.target_state
        self.calls = 0
        if not trials:
            raise InvalidInputError("The objective needs at least one trial")

        self._trials = []
        for trial in trials:
            entry = (LocomotionState.WALK, self.class1)
            if not any((g.from_state, g.to_state) == entry for g in trial.gt_transitions):
                raise InvalidInputError(f"{trial.name} has no W -> {self.class1.value} transition")
            frames = prepare_frames(trial, self.detector_config, map_weights)
            gt = np.array([_STATE_CODES[f.label] if f.label else -1 for f in trial.frames], dtype=int)
            self._trials.append(_PreparedTrial(trial.name, frames_to_arrays(frames)["t"], gt,
                                               detect_gait_events(frames, self.detector_config),
                                               trial.start_state))

    def machine_states(self, prepared: _PreparedTrial, thresholds: ThresholdSet) -> np.ndarray:
        machine = TransitionFSM(thresholds, prepared.start_state)
        change_times, states = [], [_STATE_CODES[prepared.start_state]]
        for event in prepared.events:
            state, fired = machine.step(event)
            if fired is not None:
                change_times.append(event.t)
                states.append(_STATE_CODES[state])
        index = np.searchsorted(np.asarray(change_times), prepared.t, side="right")
        return np.asarray(states)[index]

    def __call__(self, th_pair) -> float:
        th_pair = tuple(float(v) for v in th_pair)
        thresholds = self.base_thresholds.with_pair(self.pair, th_pair)
        class1 = _STATE_CODES[self.class1]
        total = 0.0
        for prepared in self._trials:
            total += _frame_penalty_codes(prepared.gt, self.machine_states(prepared, thresholds), class1, self.config)
        total += self.config.limit_penalty(th_pair)
        self.calls += 1
        return float(total)


# =============================================================================
# RESULTS
# =============================================================================

@dataclass
class TuneResult:
    method: str
    pair: str
    best_th: Tuple[float, float]
    best_J: float
    trace: List[Tuple[Tuple[float, float], float]] = field(default_factory=list)
    evaluations: int = 0
    seed: Optional[int] = None
    budget: Optional[int] = None

    @classmethod
    def from_trace(cls, method, pair, trace, seed=None, budget=None) -> "TuneResult":
        if not trace:
            raise InvalidInputError("Cannot summarize an empty trace")
        values = [j for _, j in trace]
        best = int(np.argmin(values))
        return cls(method, TransitionPair.parse(pair).value, tuple(trace[best][0]), float(values[best]),
                   list(trace), len(trace), seed, budget)

    def to_dict(self):
        return {
            "method": self.method,
            "pair": self.pair,
            "best_th": list(self.best_th),
            "best_J": self.best_J,
            "evaluations": self.evaluations,
            "seed": self.seed,
            "budget": self.budget,
            "trace": [{"th": list(th), "J": j} for th, j in self.trace],
        }

    @classmethod
    def from_dict(cls, data):
        trace = [(tuple(item["th"]), float(item["J"])) for item in data.get("trace", [])]
        return cls(data["method"], data["pair"], tuple(data["best_th"]), float(data["best_J"]),
                   trace, int(data.get("evaluations", len(trace))), data.get("seed"), data.get("budget"))

    def save(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(self.to_dict(), f, indent=2)
        return path

    @classmethod
    def load(cls, path):
        with open(path, 'r', encoding='utf-8') as f:
            return cls.from_dict(json.load(f))


# =============================================================================
# OPTIMIZERS
# =============================================================================

def unit_lattice(resolution):
    axis = np.linspace(0.0, 1.0, int(resolution))
    first, second = np.meshgrid(axis, axis, indexing="ij")
    return np.column_stack([first.ravel(), second.ravel()])


def _lattice_index(u, resolution):
    steps = np.rint(np.asarray(u) * (resolution - 1)).astype(int)
    return int(steps[0] * resolution + steps[1])


def _acquisition_argmin(model, resolution, k, exclude=()):
    points = unit_lattice(resolution)
    mean, std = gp_predict(model, points)
    values = np.asarray(acquisition_value(mean, std, k), dtype=float)
    if exclude:
        values[list(exclude)] = np.inf
    if not np.isfinite(values).any():
        return None
    return int(np.argmin(values))


def argmin_acquisition(model, space: Optional[SearchSpace] = None, resolution=None, k=None, exclude=()):
    """
    Minimize the acquisition over a resolution x resolution lattice of the unit
    square (first axis outer, lowest index wins ties). Returns the point in
    threshold units when a space is given, else in unit coordinates.
    """
    resolution = resolution or TRANSITION_CONFIG["bo"]["resolution"]
    k = TRANSITION_CONFIG["bo"]["k"] if k is None else k
    index = _acquisition_argmin(model, resolution, k, exclude)
    if index is None:
        return None
    u = unit_lattice(resolution)[index]
    return space.denormalize(u) if space is not None else u


def _evaluate(objective, th, trace, method, pair, seed, budget):
    try:
        value = float(objective(tuple(th)))
    except Exception as e:
        partial = TuneResult.from_trace(method, pair, trace, seed, budget) if trace else None
        raise OptimizationAbortedError(f"Objective failed at {tuple(th)} after {len(trace)} evaluations: {e}",
                                       partial=partial) from e
    if not np.isfinite(value):
        partial = TuneResult.from_trace(method, pair, trace, seed, budget) if trace else None
        raise OptimizationAbortedError(f"Objective returned {value} at {tuple(th)}", partial=partial)
    trace.append((tuple(float(v) for v in th), value))
    return value


def bo_optimize(objective: Callable, space: SearchSpace, budget=None, k=None, seed=None,
                n_initial=None, resolution=None, patience=None, refit=None) -> TuneResult:
    """
    GP-surrogate search with a fixed evaluation budget.

    Starts from n_initial scrambled Halton points, then repeats fit, acquisition
    minimization and evaluation until the budget is spent (or, with patience,
    until the best value has not improved for that many evaluations). All points
    lie on the acquisition lattice and none is evaluated twice.
    """
    settings = TRANSITION_CONFIG["bo"]
    budget = settings["budget"] if budget is None else int(budget)
    k = settings["k"] if k is None else k
    seed = settings["seed"] if seed is None else seed
    n_initial = settings["n_initial"] if n_initial is None else int(n_initial)
    resolution = settings["resolution"] if resolution is None else int(resolution)
    patience = settings["patience"] if patience is None else patience
    refit = TRANSITION_CONFIG["gp"]["refit"] if refit is None else refit

    if budget < n_initial:
        raise InvalidInputError(f"budget ({budget}) must be >= the initial design size ({n_initial})")
    if not 0 <= k <= 1:
        raise InvalidInputError(f"k must lie in [0, 1], got {k}")

    started = time.perf_counter()
    pair = space.pair.value
    trace: List[Tuple[Tuple[float, float], float]] = []
    evaluated = []
    units = []

    sampler = qmc.Halton(d=2, scramble=True, seed=seed)
    candidates = sampler.random(max(4 * n_initial, 16))
    for u in candidates:
        if len(evaluated) == n_initial:
            break
        index = _lattice_index(u, resolution)
        if index in evaluated:
            continue
        u_snapped = unit_lattice(resolution)[index]
        _evaluate(objective, space.denormalize(u_snapped), trace, "bo", pair, seed, budget)
        evaluated.append(index)
        units.append(u_snapped)

    best, since_best = min(j for _, j in trace), 0
    while len(trace) < budget:
        y = np.array([j for _, j in trace])
        X = np.array(units)
        hyper = refit_hyper(X, y) if refit else default_hyper(y)
        model = gp_fit(X, y, hyper)
        index = _acquisition_argmin(model, resolution, k, exclude=evaluated)
        if index is None:
            logger.info("Acquisition lattice exhausted")
            break
        u_next = unit_lattice(resolution)[index]
        value = _evaluate(objective, space.denormalize(u_next), trace, "bo", pair, seed, budget)
        evaluated.append(index)
        units.append(u_next)

        if value < best:
            best, since_best = value, 0
        else:
            since_best += 1
        if patience and since_best >= patience:
            logger.info(f"No improvement for {patience} evaluations; stopping early")
            break

    result = TuneResult.from_trace("bo", pair, trace, seed, budget)
    logger.info(f"BO {pair}: best {result.best_th} J={result.best_J:.6f} "
                f"after {result.evaluations} evaluations in {time.perf_counter() - started:.2f}s")
    return result


def grid_search(objective: Callable, space: SearchSpace, step=None) -> TuneResult:
    """Evaluate every lattice point; ties go to the lowest lattice index."""
    started = time.perf_counter()
    trace = []
    for point in space.lattice(step):
        _evaluate(objective, point, trace, "grid", space.pair.value, None, None)
    result = TuneResult.from_trace("grid", space.pair, trace, budget=len(trace))
    logger.info(f"Grid {space.pair.value}: best {result.best_th} J={result.best_J:.6f} "
                f"after {result.evaluations} evaluations in {time.perf_counter() - started:.2f}s")
    return result


def split_train_eval(instances: Sequence, n_train=None, min_instances=None, shuffle=False, seed=None):
    """First n_train instances for training and the rest for evaluation (optionally seeded shuffle)."""
    settings = TRANSITION_CONFIG["evaluation"]
    n_train = settings["n_train"] if n_train is None else n_train
    min_instances = settings["min_instances"] if min_instances is None else min_instances
    instances = list(instances)
    if len(instances) < min_instances:
        raise InvalidInputError(f"Need at least {min_instances} transition instances, got {len(instances)}")
    if shuffle:
        order = np.random.default_rng(seed).permutation(len(instances))
        instances = [instances[i] for i in order]
    return instances[:n_train], instances[n_train:]


def personalize_pair(trials: Sequence[Trial], pair, base_thresholds: ThresholdSet, method="bo",
                     detector_config: Optional[DetectorConfig] = None,
                     objective_config: Optional[ObjectiveConfig] = None, map_weights=None,
                     seed=None, budget=None, shuffle=False):
    """
    Tune one pair on the training split and score the held-out split.

    Returns (TuneResult, tuned ThresholdSet, report before, report after), the
    reports covering the evaluation instances only.
    """
    detector_config = detector_config or DetectorConfig.for_system(base_thresholds.system)
    train, held_out = split_train_eval(trials, shuffle=shuffle, seed=seed)
    objective = ThresholdObjective(train, pair, base_thresholds, objective_config, detector_config, map_weights)
    space = SearchSpace.for_pair(pair)
    if method == "bo":
        result = bo_optimize(objective, space, budget=budget, seed=seed)
    elif method == "grid":
        result = grid_search(objective, space)
    else:
        raise InvalidInputError(f"Unknown tuning method '{method}' (expected bo or grid)")

    tuned = base_thresholds.with_pair(pair, result.best_th)
    before = evaluate_trials(held_out, base_thresholds, detector_config, map_weights, excluded_subjects=())
    after = evaluate_trials(held_out, tuned, detector_config, map_weights, excluded_subjects=())
    return result, tuned, before, after
