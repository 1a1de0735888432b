import json

import numpy as np
import pandas as pd
import pytest

from eval_harness import (EvaluationReport, GtTransition, ScenarioParams, Segment, Trial, collect_transition_icfs,
                          build_labeled_sets, compute_accuracy, evaluate_trials, generate_synthetic_trial,
                          load_trial_csv, load_trial_dir, resolve_column_map, save_trial_csv, scenario_trials,
                          summarize_subjects, transitions_from_labels)
from fsm_engine import TransitionEvent
from helpers import make_frames
from signal_core import KinematicFrame, LocomotionState, Transition
from transition_errors import InvalidInputError, TrialLoadError

W, S, SA, SD = (LocomotionState.WALK, LocomotionState.SIT, LocomotionState.STAIR_ASCENT,
                LocomotionState.STAIR_DESCENT)


# ---- ground truth from labels ----

def test_label_changes_become_transitions():
    frames = make_frames(np.zeros(6))
    labels = [W, W, SA, SA, W, None]
    frames = [KinematicFrame(f.t, f.theta_th, f.theta_dot, f.theta_ddot, f.grf, label) for f, label in zip(frames, labels)]
    assert transitions_from_labels(frames) == [GtTransition(0.02, W, SA), GtTransition(0.04, SA, W)]


def test_label_change_outside_the_table_is_rejected():
    frames = [KinematicFrame(0.0, 0.0, label=SA), KinematicFrame(0.01, 0.0, label=SD)]
    with pytest.raises(InvalidInputError):
        transitions_from_labels(frames)


# ---- accuracy window ----

def detection(t, from_state=W, to_state=SA):
    return TransitionEvent(t, from_state, to_state, 57.0, 50.52)


@pytest.mark.parametrize("t_detect, detected", [(2.0, True), (2.3, True), (2.5, False), (0.9, False)])
def test_window_runs_to_the_second_heel_strike(t_detect, detected):
    report = compute_accuracy([detection(t_detect)], [GtTransition(1.0, W, SA)], step_window=5.0,
                              hs_times=[0.5, 1.2, 2.3, 3.4])
    assert report.tally("W-SA").detected == int(detected)
    assert report.tally("W-SA").total == 1


def test_window_falls_back_to_step_window():
    report = compute_accuracy([detection(2.5)], [GtTransition(1.0, W, SA)], step_window=1.0)
    assert report.accuracy("W-SA") == 0.0


def test_detection_must_match_direction():
    report = compute_accuracy([detection(1.5, SA, W)], [GtTransition(1.0, W, SA)], step_window=2.0)
    assert report.accuracy("W-SA") == 0.0


def test_each_detection_matches_once():
    gts = [GtTransition(1.0, W, SA), GtTransition(1.2, W, SA)]
    report = compute_accuracy([detection(1.5)], gts, step_window=2.0)
    assert (report.tally("W-SA").detected, report.tally("W-SA").total) == (1, 2)


# ---- reports ----

def _report():
    report = EvaluationReport()
    report.add("S1", "W-S", True)
    report.add("S1", "W-S", False)
    report.add("S2", "W-S", True)
    report.add("S2", "SD-W", True)
    return report


def test_pooled_accuracy_sums_subjects():
    report = _report()
    assert report.accuracy("W-S") == pytest.approx(200.0 / 3.0)
    assert report.accuracy("W-S", subject="S1") == 50.0
    assert report.accuracy("W-SA") is None


def test_report_frame_and_dict():
    report = _report()
    frame = report.to_frame()
    assert list(frame.columns) == ["subject", "transition", "n_cdt", "n_tt", "accuracy"]
    pooled = frame[frame["subject"] == "pooled"]
    assert pooled["transition"].tolist() == ["W-S", "SD-W"]
    data = report.to_dict()
    assert data["pooled"]["W-S"] == {"n_cdt": 2, "n_tt": 3, "accuracy": pytest.approx(200.0 / 3.0)}
    assert set(data["subjects"]) == {"S1", "S2"}


def test_subject_summary():
    summary = summarize_subjects(_report())
    row = summary[summary["transition"] == "W-S"].iloc[0]
    assert row["n_subjects"] == 2
    assert row["mean_accuracy"] == 75.0
    assert row["min_accuracy"] == 50.0
    assert summarize_subjects(EvaluationReport()).empty


def test_report_save(tmp_path):
    _report().save(tmp_path / "r" / "report.json", tmp_path / "r" / "report.csv")
    assert pd.read_csv(tmp_path / "r" / "report.csv").shape[0] == 5
    assert (tmp_path / "r" / "report.json").exists()


# ---- scenarios ----

def test_clean_scenarios_score_full_accuracy(sit_trials, sa_trials, sd_trials, ewalk_thresholds, detector):
    report = evaluate_trials(sit_trials + sa_trials + sd_trials, ewalk_thresholds, detector)
    for transition in Transition:
        assert report.tally(transition).total == 5
        assert report.accuracy(transition) == 100.0, transition


def test_outlier_defaults_miss_most_stair_descents(outlier_trials, ewalk_thresholds, detector):
    report = evaluate_trials(outlier_trials, ewalk_thresholds, detector)
    assert report.accuracy("W-SD") == 20.0
    assert report.accuracy("SD-W") == 20.0
    assert report.subjects == ["S5"]


def test_accuracy_ignores_trial_order(outlier_trials, sd_trials, ewalk_thresholds, detector):
    trials = outlier_trials + sd_trials
    forward = evaluate_trials(trials, ewalk_thresholds, detector)
    shuffled = [trials[i] for i in np.random.default_rng(1).permutation(len(trials))]
    backward = evaluate_trials(shuffled, ewalk_thresholds, detector)
    assert backward.to_dict() == forward.to_dict()
    assert forward.accuracy("W-SD") < 100.0


def test_excluded_subjects_are_skipped(outlier_trials, ewalk_thresholds, detector):
    report = evaluate_trials(outlier_trials, ewalk_thresholds, detector, excluded_subjects=["S5"])
    assert report.subjects == []
    assert report.accuracy("W-SD") is None


def test_scenario_trials_are_labeled(sd_trials, outlier_trials):
    trial = sd_trials[0]
    assert [g.transition for g in trial.gt_transitions] == [Transition.W_SD, Transition.SD_W]
    assert trial.start_state is W
    assert outlier_trials[2].name == "S5_trial02"


def test_generator_is_seeded():
    first = scenario_trials("w-sa", 1, seed=4, noise_std=0.5)[0]
    second = scenario_trials("w-sa", 1, seed=4, noise_std=0.5)[0]
    assert [f.theta_th for f in first.frames] == [f.theta_th for f in second.frames]


def test_scenarios_must_be_bracketed_by_walking():
    with pytest.raises(InvalidInputError):
        generate_synthetic_trial(ScenarioParams(segments=(Segment(S), Segment(W, 3))))
    with pytest.raises(InvalidInputError):
        scenario_trials("jog", 1)


# ---- transition ICFs and labeled sets ----

def test_transition_icfs_for_stair_ascent(sa_trials, detector):
    table = collect_transition_icfs(sa_trials[:2], detector)
    assert list(table.columns) == ["subject", "trial_index", "transition", "icf_id", "t", "value"]
    assert table["transition"].tolist() == ["W-SA", "SA-W"] * 2
    np.testing.assert_allclose(table["value"], [57.0, 30.0] * 2)


def test_labeled_sets_come_from_origin_states(sa_trials, detector):
    sets = build_labeled_sets(sa_trials, detector)
    assert set(sets) == {Transition.W_SA, Transition.SA_W}
    w_sa = sets[Transition.W_SA]
    np.testing.assert_allclose(w_sa.values[w_sa.labels == 1], 57.0)
    np.testing.assert_allclose(w_sa.values[w_sa.labels == 0], 30.0)


# ---- CSV ingestion ----

def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_csv_round_trip(tmp_path, sd_trials):
    path = save_trial_csv(sd_trials[0], tmp_path / "S1_trial00.csv")
    loaded = load_trial_csv(path, subject="S1")
    assert loaded.gt_transitions == sd_trials[0].gt_transitions
    np.testing.assert_allclose([f.theta_th for f in loaded.frames], [f.theta_th for f in sd_trials[0].frames])


@pytest.mark.parametrize("body, row", [
    ("t,theta_th,grf,label\n0.00,1,0,walk\n0.01,1,0,walk\n0.02,abc,0,walk\n", 3),
    ("t,theta_th,grf,label\n0.00,1,0,walk\n0.01,1,0,walk\n0.01,1,0,walk\n", 3),
    ("t,theta_th,grf,label\n0.00,1,0,walk\n0.01,1,-1,walk\n", 2),
    ("t,theta_th,grf,label\n0.00,1,0,walk\n0.01,1,0,jogging\n", 2),
])
def test_bad_rows_are_reported_one_based(tmp_path, body, row):
    with pytest.raises(TrialLoadError) as excinfo:
        load_trial_csv(_write(tmp_path / "bad.csv", body))
    assert excinfo.value.row == row
    assert f"(row {row})" in str(excinfo.value)


def test_missing_columns_and_files(tmp_path):
    with pytest.raises(TrialLoadError):
        load_trial_csv(_write(tmp_path / "x.csv", "t,grf\n0,0\n"))
    with pytest.raises(FileNotFoundError):
        load_trial_csv(tmp_path / "absent.csv")


def test_column_map_renames_source_columns(tmp_path):
    path = _write(tmp_path / "z.csv", "time,hip_angle,hip_velocity,grf,mode\n"
                                      "0.00,10,1,0,walk\n0.01,11,1,0,walk\n0.02,12,1,0,walk\n")
    trial = load_trial_csv(path, column_map={"time": "t", "hip_angle": "theta_th",
                                             "hip_velocity": "theta_dot", "mode": "label"})
    assert [f.theta_th for f in trial.frames] == [10.0, 11.0, 12.0]
    assert all(f.theta_ddot is not None for f in trial.frames)


def test_grf_is_scaled(tmp_path):
    path = _write(tmp_path / "g.csv", "t,theta_th,grf\n0.00,1,700\n0.01,1,350\n")
    trial = load_trial_csv(path, grf_scale=700.0)
    assert [f.grf for f in trial.frames] == [1.0, 0.5]


def test_directory_loading(tmp_path, sa_trials):
    for index, trial in enumerate(sa_trials[:2]):
        save_trial_csv(trial, tmp_path / "trials" / f"S7_trial{index:02d}.csv")
    loaded = load_trial_dir(tmp_path / "trials")
    assert [t.name for t in loaded] == ["S7_trial00", "S7_trial01"]
    with pytest.raises(InvalidInputError):
        load_trial_dir(tmp_path / "trials", pattern="*.txt")
    with pytest.raises(FileNotFoundError):
        load_trial_dir(tmp_path / "nowhere")


def test_empty_trial_is_invalid():
    with pytest.raises(InvalidInputError):
        Trial([]).validate()


def test_column_map_sources(tmp_path):
    assert resolve_column_map(None) is None
    assert resolve_column_map("Zenodo")["hip_angle"] == "theta_th"
    path = tmp_path / "columns.json"
    path.write_text(json.dumps({"angle": "theta_th"}), encoding="utf-8")
    assert resolve_column_map(path) == {"angle": "theta_th"}
    with pytest.raises(InvalidInputError):
        resolve_column_map({"angle": "knee"})
    with pytest.raises(FileNotFoundError):
        resolve_column_map(tmp_path / "missing.json")
