#!/usr/bin/env python3
"""
FSM Engine - Four-State Locomotion Transition Machine
Consumes gait events and fires a transition when the event's ICF passes
the threshold of a rule leaving the current state
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

import pandas as pd

from signal_core import (EventKind, GaitEvent, IcfId, IcfSample, LocomotionState, Transition,
                         TransitionPair, sort_events)
from threshold_learn import BoundType, ThresholdSet
from transition_errors import InvalidInputError

logger = logging.getLogger(__name__)

__all__ = [
    "LocomotionState", "TransitionRule", "TransitionEvent", "TransitionFSM",
    "build_rules", "evaluate_rule", "step", "reset", "run_events",
    "detections_to_frame", "write_detection_log", "read_detection_log",
]

DETECTION_LOG_COLUMNS = ["t", "from", "to", "icf", "threshold"]


@dataclass(frozen=True)
class TransitionRule:
    from_state: LocomotionState
    to_state: LocomotionState
    icf_id: IcfId
    trigger_event: EventKind
    bound_type: BoundType
    threshold: float

    @property
    def transition(self) -> Transition:
        return Transition.between(self.from_state, self.to_state)


@dataclass(frozen=True)
class TransitionEvent:
    t: float
    from_state: LocomotionState
    to_state: LocomotionState
    icf_value: float
    threshold_used: float

    def __post_init__(self):
        if self.from_state == self.to_state:
            raise InvalidInputError("A transition event needs two different states")

    @property
    def transition(self) -> Optional[Transition]:
        return Transition.between(self.from_state, self.to_state)


def build_rules(threshold_set: ThresholdSet) -> Tuple[TransitionRule, ...]:
    """The six rules in declared evaluation order."""
    return tuple(
        TransitionRule(t.from_state, t.to_state, t.icf_id, t.trigger,
                       threshold_set.bound(t), threshold_set.value(t))
        for t in Transition
    )


def evaluate_rule(rule: TransitionRule, icf: IcfSample) -> bool:
    """Strict comparison of the ICF value against the rule threshold."""
    if icf.icf_id != rule.icf_id:
        raise InvalidInputError(f"Rule {rule.transition.value} reads {rule.icf_id.value}, got {icf.icf_id.value}")
    if rule.bound_type == BoundType.EXCEED:
        return icf.value > rule.threshold
    return icf.value < rule.threshold


class TransitionFSM:
    """
    One machine per trial. Only rules leaving the current state and triggered
    by the event's kind are evaluated, first match wins, at most one fire per event.
    """

    def __init__(self, threshold_set: ThresholdSet, start_state=LocomotionState.WALK):
        self.threshold_set = threshold_set
        self.rules = build_rules(threshold_set)
        self._by_trigger = {}
        for rule in self.rules:
            self._by_trigger.setdefault((rule.from_state, rule.trigger_event), []).append(rule)
        self.state = LocomotionState.parse(start_state)
        self._last_mhf = None

    def reset(self, state=LocomotionState.WALK) -> "TransitionFSM":
        self.state = LocomotionState.parse(state)
        self._last_mhf = None
        return self

    def _icf_for(self, event: GaitEvent) -> Optional[IcfSample]:
        """ICF of an event, computed from the machine's memory when not attached."""
        if event.kind == EventKind.MHF:
            self._last_mhf = event.theta_at_event
        if event.icf is not None:
            if event.kind == EventKind.HS:
                self._last_mhf = None
            return event.icf

        if event.kind == EventKind.MHF:
            return IcfSample(IcfId.ICF1, event.theta_at_event, TransitionPair.WSA, event.t)
        if event.kind == EventKind.HS:
            mhf = event.mhf_theta if event.mhf_theta is not None else self._last_mhf
            self._last_mhf = None
            if mhf is None:
                return None
            return IcfSample(IcfId.ICF2, mhf - event.theta_at_event, TransitionPair.WSD, event.t)
        if event.theta_dot is None:
            return None
        return IcfSample(IcfId.ICF3, event.theta_dot, TransitionPair.WS, event.t)

    def step(self, event: GaitEvent) -> Tuple[LocomotionState, Optional[TransitionEvent]]:
        icf = self._icf_for(event)
        candidates = self._by_trigger.get((self.state, event.kind), ())
        if icf is None or not candidates:
            return self.state, None

        for rule in candidates:
            if rule.icf_id == icf.icf_id and evaluate_rule(rule, icf):
                fired = TransitionEvent(event.t, rule.from_state, rule.to_state, icf.value, rule.threshold)
                self.state = rule.to_state
                logger.debug(f"t={event.t:.3f}s {fired.transition.value} "
                             f"({icf.icf_id.value}={icf.value:.3f}, threshold {rule.threshold:.3f})")
                return self.state, fired
        return self.state, None

    def run(self, events: Iterable[GaitEvent]) -> List[TransitionEvent]:
        detections = []
        for event in sort_events(events):
            _, fired = self.step(event)
            if fired is not None:
                detections.append(fired)
        return detections


def step(machine: TransitionFSM, event: GaitEvent):
    return machine.step(event)


def reset(machine: TransitionFSM, state=LocomotionState.WALK) -> TransitionFSM:
    return machine.reset(state)


def run_events(events: Sequence[GaitEvent], threshold_set: ThresholdSet,
               start_state=LocomotionState.WALK) -> List[TransitionEvent]:
    return TransitionFSM(threshold_set, start_state).run(events)


# =============================================================================
# DETECTION LOG
# =============================================================================

def detections_to_frame(detections: Sequence[TransitionEvent]) -> pd.DataFrame:
    rows = [{"t": d.t, "from": d.from_state.value, "to": d.to_state.value,
             "icf": d.icf_value, "threshold": d.threshold_used} for d in detections]
    return pd.DataFrame(rows, columns=DETECTION_LOG_COLUMNS)


def write_detection_log(detections: Sequence[TransitionEvent], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    detections_to_frame(detections).to_csv(path, index=False, encoding='utf-8')
    return path


def read_detection_log(path) -> List[TransitionEvent]:
    df = pd.read_csv(path)
    missing = [c for c in DETECTION_LOG_COLUMNS if c not in df.columns]
    if missing:
        raise InvalidInputError(f"{path}: detection log missing columns {', '.join(missing)}")
    return [TransitionEvent(float(r["t"]), LocomotionState.parse(r["from"]), LocomotionState.parse(r["to"]),
                            float(r["icf"]), float(r["threshold"]))
            for _, r in df.iterrows()]
