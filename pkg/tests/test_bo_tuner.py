import numpy as np
import pytest

from bo_tuner import (ObjectiveConfig, SearchSpace, ThresholdObjective, TuneResult, argmin_acquisition, bo_optimize,
                      frame_penalty, grid_search, personalize_pair, split_train_eval, unit_lattice)
from gp_core import gp_fit
from signal_core import LocomotionState, TransitionPair
from transition_errors import InvalidInputError, OptimizationAbortedError

W, SA = LocomotionState.WALK, LocomotionState.STAIR_ASCENT


# ---- objective arithmetic ----

def test_ten_missed_frames_cost_five_hundredths():
    config = ObjectiveConfig()
    assert frame_penalty([SA] * 10, [W] * 10, SA, config) == pytest.approx(0.05)


def test_late_return_to_walk_costs_c2():
    config = ObjectiveConfig()
    gt = [W, W, SA, SA, W, W, W]
    fsm = [SA, W, SA, SA, SA, SA, W]     # early false entry is not charged
    assert frame_penalty(gt, fsm, SA, config) == pytest.approx(2 * 0.001)


def test_limit_penalty_on_both_components():
    config = ObjectiveConfig.for_pair("wsa")
    assert config.limit_penalty([57.5, 57.5]) == pytest.approx(1.25e-4)
    assert config.limit_penalty([50.0, 55.0]) == 0.0
    assert ObjectiveConfig.for_pair("wsd").limit_penalty([2.5, 10.0]) == pytest.approx(1e-5 * 6.25)
    assert ObjectiveConfig.for_pair("ws").limit_penalty([60.0, -60.0]) == 0.0


def test_objective_config_validation():
    with pytest.raises(InvalidInputError):
        ObjectiveConfig(c1=0.001, c2=0.005)
    with pytest.raises(InvalidInputError):
        ObjectiveConfig(limit=5.0)
    assert ObjectiveConfig.for_pair("wsd", alpha=0.0, c1=None).alpha == 0.0


def test_penalty_grows_with_missed_and_late_frames():
    config = ObjectiveConfig()
    gt = [W] * 3 + [SA] * 5 + [W] * 5
    assert frame_penalty(gt, gt, SA, config) == 0.0

    missed = [frame_penalty(gt, gt[:3] + [W] * k + [SA] * (5 - k) + gt[8:], SA, config) for k in range(6)]
    late = [frame_penalty(gt, gt[:8] + [SA] * m + [W] * (5 - m), SA, config) for m in range(6)]
    assert all(b > a for a, b in zip(missed, missed[1:]))
    assert all(b > a for a, b in zip(late, late[1:]))
    assert missed[5] == pytest.approx(5 * config.c1)
    assert late[5] == pytest.approx(5 * config.c2)


def test_penalty_is_never_negative():
    rng = np.random.default_rng(3)
    states = list(LocomotionState)
    config = ObjectiveConfig()
    for _ in range(50):
        gt = [states[i] for i in rng.integers(0, len(states), 40)]
        fsm = [states[i] for i in rng.integers(0, len(states), 40)]
        assert frame_penalty(gt, fsm, SA, config) >= 0.0


def test_frame_penalty_needs_equal_lengths():
    with pytest.raises(InvalidInputError):
        frame_penalty([W, W], [W], SA, ObjectiveConfig())


# ---- search space ----

def test_grid_lattices():
    assert len(SearchSpace.for_pair("wsd").lattice()) == 121
    assert len(SearchSpace.for_pair("ws").lattice()) == 169
    axis = SearchSpace.for_pair("wsa").axis()
    assert axis[0] == 30.0 and axis[-1] == 65.0 and len(axis) == 15


def test_normalization_round_trip():
    space = SearchSpace.for_pair("wsa")
    np.testing.assert_allclose(space.normalize([30.0, 65.0]), [0.0, 1.0])
    np.testing.assert_allclose(space.denormalize([0.5, 0.5]), [47.5, 47.5])


def test_search_space_validation():
    with pytest.raises(InvalidInputError):
        SearchSpace("wsd", ((5.0, 0.0), (0.0, 25.0)), 2.5)


# ---- acquisition lattice ----

def test_pure_exploration_picks_the_far_corner():
    model = gp_fit([[0.5, 0.5]], [1.0])
    np.testing.assert_allclose(argmin_acquisition(model, resolution=11, k=0.0), [0.0, 0.0])


def test_flat_posterior_ties_go_to_lowest_index():
    model = gp_fit([[0.5, 0.5]], [1.0])
    far = gp_fit([[40.0, 40.0]], [1.0], model.hyper)
    np.testing.assert_allclose(argmin_acquisition(far, resolution=11, k=1.0), [0.0, 0.0])


def test_exhausted_lattice_returns_none():
    model = gp_fit([[0.5, 0.5]], [1.0])
    assert argmin_acquisition(model, resolution=3, k=0.5, exclude=range(9)) is None
    assert unit_lattice(3).shape == (9, 2)


# ---- optimizers on a bowl ----

def bowl(th):
    return (th[0] - 12.5) ** 2 + (th[1] - 7.5) ** 2


def test_bo_finds_the_bowl_minimum():
    result = bo_optimize(bowl, SearchSpace.for_pair("wsd"), budget=30, seed=3)
    assert result.evaluations == 30
    assert abs(result.best_th[0] - 12.5) <= 2.5
    assert abs(result.best_th[1] - 7.5) <= 2.5
    assert len({th for th, _ in result.trace}) == 30


def test_bo_is_deterministic_under_a_seed():
    first = bo_optimize(bowl, SearchSpace.for_pair("wsd"), budget=12, seed=5)
    second = bo_optimize(bowl, SearchSpace.for_pair("wsd"), budget=12, seed=5)
    assert first.trace == second.trace


def test_bo_patience_stops_early():
    result = bo_optimize(lambda th: 1.0, SearchSpace.for_pair("wsd"), budget=30, seed=0, patience=3)
    assert result.evaluations == 5 + 3


def test_bo_budget_must_cover_initial_design():
    with pytest.raises(InvalidInputError):
        bo_optimize(bowl, SearchSpace.for_pair("wsd"), budget=3, n_initial=5)


def test_grid_search_is_exhaustive():
    result = grid_search(bowl, SearchSpace.for_pair("wsd"))
    assert result.evaluations == 121
    assert result.best_th == (12.5, 7.5)
    assert result.best_J == 0.0


def test_failing_objective_keeps_the_partial_trace():
    def objective(th):
        if th[0] > 20.0:
            raise RuntimeError("sensor dropout")
        return bowl(th)

    with pytest.raises(OptimizationAbortedError) as excinfo:
        grid_search(objective, SearchSpace.for_pair("wsd"))
    assert excinfo.value.partial.evaluations == 9 * 11


def test_tune_result_file_round_trip(tmp_path):
    result = grid_search(bowl, SearchSpace.for_pair("wsd"), step=12.5)
    path = result.save(tmp_path / "tune.json")
    loaded = TuneResult.load(path)
    assert loaded.best_th == result.best_th
    assert loaded.trace == [(tuple(th), j) for th, j in result.trace]


# ---- objective over trials ----

def test_split_keeps_first_two_for_training():
    train, held_out = split_train_eval(range(5))
    assert train == [0, 1] and held_out == [2, 3, 4]
    with pytest.raises(InvalidInputError):
        split_train_eval(range(4))


def test_objective_counts_calls(sd_trials, ewalk_thresholds, detector):
    objective = ThresholdObjective(sd_trials[:2], "wsd", ewalk_thresholds, detector_config=detector)
    at_defaults = objective(ewalk_thresholds.pair_values("wsd"))
    assert 0.0 < at_defaults < objective((25.0, 25.0))
    assert objective.calls == 2


def test_objective_needs_the_pair_transition(sa_trials, ewalk_thresholds):
    with pytest.raises(InvalidInputError):
        ThresholdObjective(sa_trials[:2], TransitionPair.WSD, ewalk_thresholds)


def test_grid_personalization_recovers_the_outlier(outlier_trials, ewalk_thresholds, detector):
    result, tuned, before, after = personalize_pair(outlier_trials, "wsd", ewalk_thresholds, "grid", detector)
    assert result.best_th == (5.0, 5.0)
    assert before.accuracy("W-SD") <= 40.0
    assert after.accuracy("W-SD") >= 90.0
    assert after.accuracy("SD-W") >= 90.0
    assert tuned.pair_values("wsa") == ewalk_thresholds.pair_values("wsa")


def test_unknown_method_is_rejected(outlier_trials, ewalk_thresholds):
    with pytest.raises(InvalidInputError):
        personalize_pair(outlier_trials, "wsd", ewalk_thresholds, "random")
