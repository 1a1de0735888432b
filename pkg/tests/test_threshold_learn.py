import json

import numpy as np
import pytest

from signal_core import Transition
from threshold_learn import (BoundType, LabeledIcfSet, ThresholdSet, clip_to_search_space, derive_threshold_set,
                             train_logistic_1d, train_stump_1d)
from transition_errors import IncompleteConfigError, InvalidInputError

EWALK = {"W-S": 23.32, "S-W": -4.32, "W-SA": 50.52, "SA-W": 51.21, "W-SD": 10.37, "SD-W": 9.62}


def test_ewalk_defaults(ewalk_thresholds):
    assert {t.value: e.value for t, e in ewalk_thresholds.items()} == EWALK
    assert ewalk_thresholds.bound("W-S") is BoundType.EXCEED
    assert ewalk_thresholds.bound("SD-W") is BoundType.FALL_BELOW


def test_autonomyo_only_differs_on_stair_descent_entry():
    autonomyo = ThresholdSet.defaults("autonomyo")
    assert autonomyo.value("W-SD") == 13.37
    assert {t.value: e.value for t, e in autonomyo.items() if t is not Transition.W_SD} == \
        {k: v for k, v in EWALK.items() if k != "W-SD"}


def test_serialization_is_stable(ewalk_thresholds, tmp_path):
    path = ewalk_thresholds.save(tmp_path / "th.json")
    assert path.read_text(encoding="utf-8") == ThresholdSet.defaults("ewalk").to_json()
    assert list(json.loads(path.read_text(encoding="utf-8"))["thresholds"]) == list(EWALK)
    assert ThresholdSet.load(path) == ewalk_thresholds


def test_missing_transition_is_incomplete():
    partial = {k: v for k, v in EWALK.items() if k != "SA-W"}
    with pytest.raises(IncompleteConfigError):
        ThresholdSet(partial, "ewalk")


def test_value_outside_search_range_is_rejected():
    with pytest.raises(InvalidInputError):
        ThresholdSet({**EWALK, "W-SD": 30.0}, "ewalk")


def test_unknown_system_is_rejected():
    with pytest.raises(InvalidInputError):
        ThresholdSet(EWALK, "exo9000")


def test_with_pair_leaves_original_untouched(ewalk_thresholds):
    tuned = ewalk_thresholds.with_pair("wsd", (5.0, 7.5))
    assert tuned.pair_values("wsd") == (5.0, 7.5)
    assert ewalk_thresholds.pair_values("wsd") == (10.37, 9.62)
    assert tuned.bound("W-SD") is BoundType.EXCEED


def test_clipping_to_search_space():
    assert clip_to_search_space("W-SA", 80.0) == 65.0
    assert clip_to_search_space("W-S", 12.0) == 12.0


# ---- learners ----

def test_labeled_set_needs_both_classes():
    with pytest.raises(InvalidInputError):
        LabeledIcfSet([1.0, 2.0], [1, 1])
    with pytest.raises(InvalidInputError):
        LabeledIcfSet([1.0, 2.0], [0, 2])


def test_logistic_boundary_on_symmetric_classes():
    data = LabeledIcfSet.from_classes([1.0, 2.0, 3.0], [7.0, 8.0, 9.0])
    boundary = train_logistic_1d(data)
    assert boundary.threshold == pytest.approx(5.0, abs=1e-6)
    assert boundary.orientation == 1
    assert boundary.accuracy == 1.0


def test_logistic_learns_fall_below_orientation():
    data = LabeledIcfSet.from_classes([20.0, 22.0, 25.0], [2.0, 4.0, 5.0])
    boundary = train_logistic_1d(data)
    assert boundary.orientation == -1
    assert 5.0 < boundary.threshold < 20.0


def test_stump_tie_goes_to_midpoint_nearest_mean():
    data = LabeledIcfSet.from_classes([1.0, 2.0], [8.0, 9.0])
    boundary = train_stump_1d(data)
    assert boundary.threshold == 5.0
    assert boundary.orientation == 1
    assert boundary.accuracy == 1.0


def test_logistic_boundary_lies_inside_the_gap():
    boundary = train_logistic_1d(LabeledIcfSet.from_classes([1.0, 2.0, 3.0], [5.0, 6.0, 7.0]))
    assert 3.0 < boundary.threshold < 5.0
    assert boundary.accuracy == 1.0


def test_swapped_labels_flip_only_the_orientation():
    data = LabeledIcfSet.from_classes([1.0, 2.0, 3.0], [5.0, 6.5, 7.0])
    swapped = LabeledIcfSet(data.values, 1 - data.labels)
    boundary, flipped = train_logistic_1d(data), train_logistic_1d(swapped)
    assert flipped.threshold == pytest.approx(boundary.threshold, abs=1e-9)
    assert flipped.orientation == -boundary.orientation


def test_stump_splits_at_the_gap_midpoint():
    boundary = train_stump_1d(LabeledIcfSet.from_classes([1.0, 2.0, 3.0], [5.0, 6.0, 7.0]))
    assert boundary.threshold == 4.0
    assert boundary.accuracy == 1.0


@pytest.mark.parametrize("scale, offset", [(2.5, -3.0), (0.1, 40.0), (1.0, 0.0)])
def test_stump_follows_affine_rescaling(scale, offset):
    negatives, positives = np.array([1.0, 2.0, 4.5, 3.0]), np.array([4.0, 6.0, 7.0, 5.5])
    base = train_stump_1d(LabeledIcfSet.from_classes(negatives, positives))
    moved = train_stump_1d(LabeledIcfSet.from_classes(scale * negatives + offset, scale * positives + offset))
    assert moved.threshold == pytest.approx(scale * base.threshold + offset)
    assert moved.accuracy == base.accuracy


def test_overlapping_classes_warn(caplog):
    data = LabeledIcfSet.from_classes([1.0, 5.0, 6.0], [4.0, 7.0, 8.0])
    boundary = train_logistic_1d(data)
    assert boundary.accuracy < 1.0
    assert "not separable" in caplog.text


# ---- deriving a full set ----

def _sets(shift=0.0):
    rng = np.random.default_rng(0)
    centers = {"W-S": (5.0, 45.0), "S-W": (5.0, -45.0), "W-SA": (30.0, 57.0),
               "SA-W": (57.0, 30.0), "W-SD": (5.0, 15.0), "SD-W": (15.0, 5.0)}
    return {name: LabeledIcfSet.from_classes(neg + shift + rng.normal(0, 0.5, 20), pos + shift + rng.normal(0, 0.5, 20), name)
            for name, (neg, pos) in centers.items()}


def test_no_data_gives_system_defaults():
    assert derive_threshold_set(None, "autonomyo") == ThresholdSet.defaults("autonomyo")


def test_derived_thresholds_separate_the_classes():
    derived = derive_threshold_set(_sets(), "ewalk")
    assert 30.0 < derived.value("W-SA") < 57.0
    assert 5.0 < derived.value("SD-W") < 15.0
    assert -45.0 < derived.value("S-W") < 5.0
    assert derived.bound("SA-W") is BoundType.FALL_BELOW


def test_missing_set_without_fallback_is_incomplete():
    sets = _sets()
    del sets["W-S"]
    with pytest.raises(IncompleteConfigError):
        derive_threshold_set(sets, "ewalk")


def test_missing_set_takes_fallback(ewalk_thresholds):
    sets = _sets()
    del sets["W-S"]
    derived = derive_threshold_set(sets, "ewalk", learner="stump", fallback=ewalk_thresholds)
    assert derived.value("W-S") == 23.32
    assert 5.0 < derived.value("W-SD") < 15.0


def test_unknown_learner_is_rejected():
    with pytest.raises(InvalidInputError):
        derive_threshold_set(_sets(), "ewalk", learner="svm")
