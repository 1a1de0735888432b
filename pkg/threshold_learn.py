#!/usr/bin/env python3
"""
Threshold Learning - Scalar Decision Thresholds from 1-D ICF Samples
Logistic regression and an exhaustive decision stump on single features,
plus the ThresholdSet that the state machine and every tuner consume
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, Mapping, Optional

import numpy as np
from scipy.special import expit

from signal_core import Transition, TransitionPair
from transition_config import TRANSITION_CONFIG, TRANSITION_ORDER, get_system_defaults
from transition_env import VALID_SYSTEMS
from transition_errors import IncompleteConfigError, InvalidInputError

logger = logging.getLogger(__name__)


class BoundType(str, Enum):
    EXCEED = "exceed"            # fires when ICF > threshold
    FALL_BELOW = "fall_below"    # fires when ICF < threshold

    @property
    def orientation(self):
        return 1 if self is BoundType.EXCEED else -1


DEFAULT_BOUNDS = {Transition.parse(name): BoundType(bound)
                  for name, bound in TRANSITION_CONFIG["bound_convention"].items()}


def search_bounds(pair) -> tuple:
    """Allowed threshold range for a transition pair."""
    pair = TransitionPair.parse(pair)
    low, high = TRANSITION_CONFIG["search_spaces"][pair.value]["bounds"]
    return float(low), float(high)


# =============================================================================
# LABELED DATA AND 1-D LEARNERS
# =============================================================================

@dataclass
class LabeledIcfSet:
    """ICF values with binary labels, 1 = transition, 0 = no transition."""

    values: np.ndarray
    labels: np.ndarray
    transition_id: Optional[Transition] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).ravel()
        self.labels = np.asarray(self.labels, dtype=int).ravel()
        if self.values.shape != self.labels.shape:
            raise InvalidInputError(f"{self.values.size} values but {self.labels.size} labels")
        if not np.all(np.isfinite(self.values)):
            raise InvalidInputError("ICF values must be finite")
        if not np.all(np.isin(self.labels, (0, 1))):
            raise InvalidInputError("Labels must be 0 or 1")
        if self.transition_id is not None:
            self.transition_id = Transition.parse(self.transition_id)
        if self.labels.sum() == 0 or self.labels.sum() == self.labels.size:
            name = self.transition_id.value if self.transition_id else "set"
            raise InvalidInputError(f"Labeled ICF {name} needs both classes")

    @classmethod
    def from_classes(cls, negatives, positives, transition_id=None):
        negatives = np.asarray(negatives, dtype=float).ravel()
        positives = np.asarray(positives, dtype=float).ravel()
        values = np.concatenate([negatives, positives])
        labels = np.concatenate([np.zeros(negatives.size, dtype=int), np.ones(positives.size, dtype=int)])
        return cls(values, labels, transition_id)


@dataclass(frozen=True)
class Boundary1D:
    """Learned split; orientation +1 means the transition class lies above it."""

    threshold: float
    orientation: int
    accuracy: float


def _accuracy(values, labels, threshold, orientation):
    predicted = values > threshold if orientation > 0 else values < threshold
    return float(np.mean(predicted == labels.astype(bool)))


def train_logistic_1d(data: LabeledIcfSet, lr=None, epochs=None) -> Boundary1D:
    """
    Fit p(y|v) = sigmoid(a*v + b) by full-batch gradient descent.

    Inputs are standardized internally and the p = 0.5 boundary -b/a is mapped
    back to ICF units. Overlapping classes still return the converged boundary,
    with a separability warning.
    """
    settings = TRANSITION_CONFIG["threshold_learning"]
    lr = settings["lr"] if lr is None else lr
    epochs = settings["epochs"] if epochs is None else epochs

    v, y = data.values, data.labels.astype(float)
    mu, sigma = float(v.mean()), float(v.std())
    if sigma == 0.0:
        logger.warning("All ICF values are identical; classes are inseparable, boundary set to their value")
        return Boundary1D(mu, 1, _accuracy(v, data.labels, mu, 1))

    z = (v - mu) / sigma
    a = b = 0.0
    for _ in range(int(epochs)):
        error = expit(a * z + b) - y
        a -= lr * float(np.mean(error * z))
        b -= lr * float(np.mean(error))

    if abs(a) < 1e-12:
        logger.warning("Logistic slope vanished (classes overlap completely); boundary set to the mean")
        return Boundary1D(mu, 1, _accuracy(v, data.labels, mu, 1))

    threshold = mu + sigma * (-b / a)
    orientation = 1 if a > 0 else -1
    accuracy = _accuracy(v, data.labels, threshold, orientation)
    if accuracy < 1.0:
        logger.warning(f"Classes are not separable by one threshold "
                       f"(training accuracy {accuracy:.1%} at {threshold:.3f})")
    return Boundary1D(float(threshold), orientation, accuracy)


def train_stump_1d(data: LabeledIcfSet) -> Boundary1D:
    """
    Exhaustive stump over midpoints of adjacent distinct values, both orientations.

    Ties in accuracy go to the midpoint closest to the grand mean, then to the
    lower midpoint.
    """
    v, y = data.values, data.labels.astype(bool)
    distinct = np.unique(v)
    if distinct.size == 1:
        return Boundary1D(float(distinct[0]), 1, float(np.mean(~y)))

    candidates = (distinct[:-1] + distinct[1:]) / 2.0
    above = v[None, :] > candidates[:, None]
    below = v[None, :] < candidates[:, None]
    acc_up = np.mean(above == y[None, :], axis=1)
    acc_down = np.mean(below == y[None, :], axis=1)

    best = max(acc_up.max(), acc_down.max())
    grand_mean = float(v.mean())
    options = []
    for idx in np.flatnonzero(np.isclose(acc_up, best, rtol=0, atol=1e-12)):
        options.append((abs(candidates[idx] - grand_mean), candidates[idx], 0, 1))
    for idx in np.flatnonzero(np.isclose(acc_down, best, rtol=0, atol=1e-12)):
        options.append((abs(candidates[idx] - grand_mean), candidates[idx], 1, -1))
    _, threshold, _, orientation = min(options)
    return Boundary1D(float(threshold), orientation, float(best))


LEARNERS = {
    "logistic": train_logistic_1d,
    "stump": train_stump_1d,
}


# =============================================================================
# THRESHOLD SET
# =============================================================================

@dataclass(frozen=True)
class ThresholdEntry:
    value: float
    bound: BoundType


class ThresholdSet:
    """The six transition thresholds with their bound types and a system tag."""

    def __init__(self, entries: Mapping, system: str = "custom"):
        system = str(system).lower()
        if system not in VALID_SYSTEMS:
            raise InvalidInputError(f"Unknown system '{system}' (expected one of {', '.join(VALID_SYSTEMS)})")

        parsed: Dict[Transition, ThresholdEntry] = {}
        for key, entry in entries.items():
            transition = Transition.parse(key)
            if transition in parsed:
                raise InvalidInputError(f"Transition {transition.value} appears twice")
            if not isinstance(entry, ThresholdEntry):
                if isinstance(entry, Mapping):
                    entry = ThresholdEntry(float(entry["value"]), BoundType(entry.get("bound", DEFAULT_BOUNDS[transition])))
                else:
                    entry = ThresholdEntry(float(entry), DEFAULT_BOUNDS[transition])
            parsed[transition] = entry

        missing = [t.value for t in Transition if t not in parsed]
        if missing:
            raise IncompleteConfigError(f"Threshold set is missing {', '.join(missing)}")

        for transition, entry in parsed.items():
            low, high = search_bounds(transition.pair)
            if not np.isfinite(entry.value) or not low <= entry.value <= high:
                raise InvalidInputError(
                    f"{transition.value} threshold {entry.value} outside its search range [{low}, {high}]")

        self._entries = {t: parsed[t] for t in Transition}
        self.system = system

    # ---- access ----

    def __getitem__(self, transition):
        return self._entries[Transition.parse(transition)]

    def value(self, transition) -> float:
        return self[transition].value

    def bound(self, transition) -> BoundType:
        return self[transition].bound

    def items(self):
        return self._entries.items()

    def pair_values(self, pair) -> tuple:
        pair = TransitionPair.parse(pair)
        return tuple(self.value(t) for t in pair.transitions)

    def __eq__(self, other):
        return isinstance(other, ThresholdSet) and self.to_dict() == other.to_dict()

    def __repr__(self):
        values = ", ".join(f"{t.value}={e.value:g}" for t, e in self._entries.items())
        return f"ThresholdSet({self.system}: {values})"

    # ---- derived sets ----

    def with_values(self, values: Mapping) -> "ThresholdSet":
        entries = dict(self._entries)
        for key, value in values.items():
            transition = Transition.parse(key)
            entries[transition] = ThresholdEntry(float(value), entries[transition].bound)
        return ThresholdSet(entries, self.system)

    def with_pair(self, pair, th_pair) -> "ThresholdSet":
        pair = TransitionPair.parse(pair)
        first, second = pair.transitions
        return self.with_values({first: th_pair[0], second: th_pair[1]})

    # ---- serialization ----

    def to_dict(self):
        return {
            "system": self.system,
            "thresholds": {t.value: {"value": e.value, "bound": e.bound.value} for t, e in self._entries.items()},
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data):
        if "thresholds" not in data:
            raise IncompleteConfigError("Threshold JSON needs a 'thresholds' object")
        return cls(data["thresholds"], data.get("system", "custom"))

    def save(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            f.write(self.to_json())
        return path

    @classmethod
    def load(cls, path):
        with open(path, 'r', encoding='utf-8') as f:
            return cls.from_dict(json.load(f))

    @classmethod
    def defaults(cls, system="ewalk") -> "ThresholdSet":
        try:
            thresholds = get_system_defaults(system)["thresholds"]
        except ValueError as e:
            raise InvalidInputError(str(e)) from e
        return cls({name: thresholds[name] for name in TRANSITION_ORDER}, system)


def clip_to_search_space(transition, value) -> float:
    transition = Transition.parse(transition)
    low, high = search_bounds(transition.pair)
    clipped = float(np.clip(value, low, high))
    if clipped != value:
        logger.warning(f"{transition.value} threshold {value:.3f} clipped to search range [{low}, {high}]")
    return clipped


def derive_threshold_set(sets: Optional[Mapping] = None, system="ewalk", learner=None,
                         fallback: Optional[ThresholdSet] = None, **learner_kwargs) -> ThresholdSet:
    """
    Learn all six thresholds, or return the system defaults when no data is given.

    Bound types follow the default convention. Learned values outside the search
    range are clipped with a warning. Transitions without a labeled set take the
    fallback value when a fallback set is given; otherwise they are an error.
    """
    if not sets:
        logger.info(f"No labeled ICF sets supplied; using {system} defaults")
        return ThresholdSet.defaults(system)

    sets = {Transition.parse(k): v for k, v in sets.items()}
    missing = [t for t in Transition if t not in sets]
    if missing and fallback is None:
        raise IncompleteConfigError(f"Labeled ICF sets missing for {', '.join(t.value for t in missing)}")

    learner = learner or TRANSITION_CONFIG["threshold_learning"]["learner"]
    if learner not in LEARNERS:
        raise InvalidInputError(f"Unknown learner '{learner}' (expected {', '.join(LEARNERS)})")
    train = LEARNERS[learner]

    entries = {}
    for transition in Transition:
        if transition in missing:
            entries[transition] = fallback[transition]
            logger.warning(f"{transition.value}: no labeled set; keeping {fallback.value(transition):g}")
            continue
        kwargs = learner_kwargs if learner == "logistic" else {}
        boundary = train(sets[transition], **kwargs)
        bound = DEFAULT_BOUNDS[transition]
        if boundary.orientation != bound.orientation:
            logger.warning(f"{transition.value}: learned orientation disagrees with bound '{bound.value}'")
        value = clip_to_search_space(transition, boundary.threshold)
        entries[transition] = ThresholdEntry(value, bound)
        logger.debug(f"{transition.value}: threshold {value:.3f} (train accuracy {boundary.accuracy:.1%})")

    return ThresholdSet(entries, system)
