import pytest

from eval_harness import replay
from fsm_engine import (TransitionEvent, TransitionFSM, build_rules, evaluate_rule, read_detection_log, run_events,
                        write_detection_log)
from signal_core import EventKind, GaitEvent, IcfId, IcfSample, LocomotionState, Transition, TransitionPair
from transition_errors import InvalidInputError

W, S, SA, SD = (LocomotionState.WALK, LocomotionState.SIT, LocomotionState.STAIR_ASCENT,
                LocomotionState.STAIR_DESCENT)


def mhf(t, theta):
    return GaitEvent(EventKind.MHF, t, theta)


def hs(t, theta, mhf_theta=None):
    return GaitEvent(EventKind.HS, t, theta, mhf_theta=mhf_theta)


def thr(t, theta_dot):
    return GaitEvent(EventKind.THR, t, 62.0, theta_dot=theta_dot)


def test_rules_follow_declared_order(ewalk_thresholds):
    rules = build_rules(ewalk_thresholds)
    assert [r.transition for r in rules] == list(Transition)
    assert rules[0].trigger_event is EventKind.THR


def test_rule_comparison_is_strict(ewalk_thresholds):
    rule = build_rules(ewalk_thresholds)[2]
    assert rule.transition is Transition.W_SA
    at = IcfSample(IcfId.ICF1, 50.52, TransitionPair.WSA)
    above = IcfSample(IcfId.ICF1, 50.53, TransitionPair.WSA)
    assert not evaluate_rule(rule, at)
    assert evaluate_rule(rule, above)


def test_rule_rejects_wrong_icf(ewalk_thresholds):
    rule = build_rules(ewalk_thresholds)[0]
    with pytest.raises(InvalidInputError):
        evaluate_rule(rule, IcfSample(IcfId.ICF1, 80.0, TransitionPair.WSA))


def test_stair_ascent_round_trip(ewalk_thresholds):
    detections = run_events([mhf(1.0, 30.0), mhf(2.0, 57.0), mhf(3.0, 57.0), mhf(4.0, 30.0)], ewalk_thresholds)
    assert [(d.t, d.transition) for d in detections] == [(2.0, Transition.W_SA), (4.0, Transition.SA_W)]
    assert detections[0].icf_value == 57.0
    assert detections[0].threshold_used == 50.52


def test_replay_is_deterministic(sd_trials, ewalk_thresholds, detector):
    first = replay(sd_trials[0], ewalk_thresholds, detector)
    assert replay(sd_trials[0], ewalk_thresholds, detector) == first
    assert first


@pytest.mark.parametrize("transition", [Transition.W_SA, Transition.SA_W])
def test_raising_the_threshold_never_adds_detections(ewalk_thresholds, transition):
    samples = [IcfSample(IcfId.ICF1, v, TransitionPair.WSA) for v in (28.0, 45.0, 50.0, 51.0, 55.0, 60.0)]
    fired = []
    for level in (35.0, 45.0, 50.5, 52.0, 58.0):
        values = dict(zip(("W-SA", "SA-W"), ewalk_thresholds.pair_values("wsa")))
        values[transition.value] = level
        tuned = ewalk_thresholds.with_pair("wsa", (values["W-SA"], values["SA-W"]))
        rule = next(r for r in build_rules(tuned) if r.transition is transition)
        fired.append({s.value for s in samples if evaluate_rule(rule, s)})
    pairs = list(zip(fired, fired[1:]))
    if transition is Transition.W_SA:
        assert all(higher <= lower for lower, higher in pairs)
    else:
        assert all(lower <= higher for lower, higher in pairs)
    assert fired[0] != fired[-1]


def test_stair_descent_uses_icf2(ewalk_thresholds):
    events = [mhf(0.4, 30.0), hs(0.7, 25.0, 30.0),      # ICF2 5: stays in walk
              mhf(1.5, 35.0), hs(1.8, 20.0, 35.0),      # ICF2 15: W-SD
              mhf(2.6, 30.0), hs(2.9, 25.0, 30.0)]      # ICF2 5: SD-W
    detections = run_events(events, ewalk_thresholds)
    assert [d.transition for d in detections] == [Transition.W_SD, Transition.SD_W]
    assert detections[0].icf_value == pytest.approx(15.0)


def test_sit_round_trip_on_thr(ewalk_thresholds):
    detections = run_events([thr(1.0, 45.0), thr(3.0, -45.0)], ewalk_thresholds)
    assert [d.transition for d in detections] == [Transition.W_S, Transition.S_W]


def test_only_rules_leaving_the_current_state_fire(ewalk_thresholds):
    machine = TransitionFSM(ewalk_thresholds, start_state=S)
    state, fired = machine.step(mhf(1.0, 60.0))
    assert state is S and fired is None
    state, fired = machine.step(hs(1.2, 0.0, 60.0))
    assert state is S and fired is None


def test_hs_without_mhf_memory_is_ignored(ewalk_thresholds):
    machine = TransitionFSM(ewalk_thresholds)
    state, fired = machine.step(hs(0.5, 0.0))
    assert state is W and fired is None


def test_mhf_memory_feeds_icf2(ewalk_thresholds):
    machine = TransitionFSM(ewalk_thresholds)
    machine.step(mhf(0.4, 35.0))
    state, fired = machine.step(hs(0.7, 20.0))
    assert state is SD
    assert fired.icf_value == pytest.approx(15.0)


def test_reset_returns_to_walk(ewalk_thresholds):
    machine = TransitionFSM(ewalk_thresholds)
    machine.step(mhf(1.0, 57.0))
    assert machine.state is SA
    assert machine.reset().state is W


def test_event_needs_two_states():
    with pytest.raises(InvalidInputError):
        TransitionEvent(1.0, W, W, 0.0, 0.0)


def test_clean_trials_detect_each_transition_once(ewalk_thresholds, detector, sit_trials, sa_trials, sd_trials):
    expected = {"w-s": [Transition.W_S, Transition.S_W],
                "w-sa": [Transition.W_SA, Transition.SA_W],
                "w-sd": [Transition.W_SD, Transition.SD_W]}
    for name, trials in (("w-s", sit_trials), ("w-sa", sa_trials), ("w-sd", sd_trials)):
        detections = replay(trials[0], ewalk_thresholds, detector)
        assert [d.transition for d in detections] == expected[name], name


def test_detection_log_round_trip(ewalk_thresholds, tmp_path):
    detections = run_events([mhf(1.0, 57.0), mhf(2.0, 30.0)], ewalk_thresholds)
    path = write_detection_log(detections, tmp_path / "log.csv")
    assert path.read_text(encoding="utf-8").splitlines()[0] == "t,from,to,icf,threshold"
    assert read_detection_log(path) == detections
