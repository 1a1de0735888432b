#!/usr/bin/env python3
"""
Evaluation Harness - Trial Replay, Accuracy and Synthetic Gait
Replays labeled trials through detectors and the state machine, scores
detections with the one-step-delay accuracy rule, reads/writes trial CSVs
and generates synthetic gait with exact ground-truth labels
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from alignment_map import MappingWeights, map_frames
from fsm_engine import TransitionEvent, TransitionFSM
from signal_core import (DetectorConfig, KinematicFrame, LocomotionState, Transition,
                         detect_gait_events, ensure_derivatives, fill_acceleration, frames_to_arrays,
                         hs_indices)
from threshold_learn import LabeledIcfSet, ThresholdSet
from transition_config import TRANSITION_CONFIG
from transition_errors import InvalidInputError, TrialLoadError

logger = logging.getLogger(__name__)

CANONICAL_COLUMNS = ["t", "theta_th", "theta_dot", "grf", "label"]
REQUIRED_COLUMNS = ["t", "theta_th", "grf"]

# Provisional layout for the public eWalk/autonomyo recordings; confirm against
# the loader script shipped with the dataset before relying on it.
ZENODO_COLUMN_MAP = {
    "time": "t",
    "hip_angle": "theta_th",
    "hip_velocity": "theta_dot",
    "grf": "grf",
    "mode": "label",
}

COLUMN_MAP_PRESETS = {"zenodo": ZENODO_COLUMN_MAP}


def resolve_column_map(source) -> Optional[Dict[str, str]]:
    """
    Column renames for load_trial_csv from a preset name (e.g. 'zenodo'), a JSON
    file of {source column: canonical column}, or a mapping. None keeps the canonical header.
    """
    if source is None:
        return None
    if isinstance(source, Mapping):
        mapping = dict(source)
    elif str(source).lower() in COLUMN_MAP_PRESETS:
        return dict(COLUMN_MAP_PRESETS[str(source).lower()])
    else:
        path = Path(source)
        if not path.exists():
            raise FileNotFoundError(
                f"Column map not found: {path} (presets: {', '.join(COLUMN_MAP_PRESETS)})")
        with open(path, 'r', encoding='utf-8') as f:
            mapping = json.load(f)

    if not isinstance(mapping, dict) or not all(isinstance(k, str) and isinstance(v, str)
                                                for k, v in mapping.items()):
        raise InvalidInputError("A column map is a JSON object of column name strings")
    unknown = sorted(set(mapping.values()) - set(CANONICAL_COLUMNS))
    if unknown:
        raise InvalidInputError(f"Column map targets unknown columns: {', '.join(unknown)}")
    return mapping


# =============================================================================
# TRIALS
# =============================================================================

class GtTransition(NamedTuple):
    t: float
    from_state: LocomotionState
    to_state: LocomotionState

    @property
    def transition(self) -> Transition:
        return Transition.between(self.from_state, self.to_state)


def transitions_from_labels(frames: Sequence[KinematicFrame]) -> List[GtTransition]:
    """Label changes as (t, from, to); every change must be one of the six transitions."""
    transitions = []
    previous = None
    for frame in frames:
        if frame.label is None:
            continue
        if previous is not None and frame.label != previous:
            if Transition.between(previous, frame.label) is None:
                raise InvalidInputError(
                    f"Invalid label change {previous.value} -> {frame.label.value} at t={frame.t:.3f}s")
            transitions.append(GtTransition(frame.t, previous, frame.label))
        previous = frame.label
    return transitions


@dataclass
class Trial:
    frames: List[KinematicFrame]
    gt_transitions: List[GtTransition] = field(default_factory=list)
    subject: str = "S1"
    system: str = "custom"
    trial_index: int = 0

    @classmethod
    def from_frames(cls, frames, subject="S1", system="custom", trial_index=0) -> "Trial":
        frames = list(frames)
        return cls(frames, transitions_from_labels(frames), subject, system, trial_index)

    def __len__(self):
        return len(self.frames)

    @property
    def name(self):
        return f"{self.subject}_trial{self.trial_index:02d}"

    @property
    def start_state(self) -> LocomotionState:
        for frame in self.frames:
            if frame.label is not None:
                return frame.label
        return LocomotionState.WALK

    def labels(self) -> np.ndarray:
        return np.array([f.label.value if f.label else "" for f in self.frames], dtype=object)

    def validate(self) -> "Trial":
        if not self.frames:
            raise InvalidInputError("Trial has no frames")
        times = [g.t for g in self.gt_transitions]
        if times != sorted(times):
            raise InvalidInputError("Ground-truth transitions must be chronological")
        for gt in self.gt_transitions:
            if gt.transition is None:
                raise InvalidInputError(f"Invalid ground-truth transition {gt.from_state.value} -> {gt.to_state.value}")
        return self


def heel_strike_times(trial: Trial, config: DetectorConfig) -> np.ndarray:
    arrays = frames_to_arrays(trial.frames)
    return arrays["t"][hs_indices(arrays["grf"], config)]


def step_window_for(trial: Trial, config: DetectorConfig, window_step_periods=None) -> float:
    """Fallback window: a multiple of the median stride time, or of the configured period."""
    periods = TRANSITION_CONFIG["evaluation"]["window_step_periods"] if window_step_periods is None else window_step_periods
    hs = heel_strike_times(trial, config)
    period = float(np.median(np.diff(hs))) if hs.size >= 2 else TRANSITION_CONFIG["evaluation"]["step_period"]
    return periods * period


def prepare_frames(trial: Trial, config: DetectorConfig, map_weights: Optional[MappingWeights] = None):
    frames = ensure_derivatives(trial.frames, config)
    if map_weights is not None:
        frames = map_frames(map_weights, frames, config)
    return frames


def replay(trial: Trial, threshold_set: ThresholdSet, detector_config: DetectorConfig,
           map_weights: Optional[MappingWeights] = None) -> List[TransitionEvent]:
    """Detect events on the (optionally mapped) trial and run a fresh machine from its first label."""
    if not trial.frames:
        raise InvalidInputError("Cannot replay an empty trial")
    frames = prepare_frames(trial, detector_config, map_weights)
    events = detect_gait_events(frames, detector_config)
    machine = TransitionFSM(threshold_set, trial.start_state)
    detections = machine.run(events)
    logger.debug(f"{trial.name}: {len(events)} events, {len(detections)} detections")
    return detections


# =============================================================================
# ACCURACY
# =============================================================================

@dataclass
class TransitionTally:
    detected: int = 0
    total: int = 0

    @property
    def accuracy(self) -> Optional[float]:
        return 100.0 * self.detected / self.total if self.total else None


class EvaluationReport:
    """Per-subject detection tallies; pooled figures are sums over subjects."""

    POOLED = "pooled"

    def __init__(self):
        self.by_subject: Dict[str, Dict[Transition, TransitionTally]] = {}

    def add(self, subject, transition, detected: bool):
        tallies = self.by_subject.setdefault(str(subject), {})
        tally = tallies.setdefault(Transition.parse(transition), TransitionTally())
        tally.total += 1
        tally.detected += int(bool(detected))

    @property
    def subjects(self):
        return sorted(self.by_subject)

    def pooled(self) -> Dict[Transition, TransitionTally]:
        pooled = {}
        for tallies in self.by_subject.values():
            for transition, tally in tallies.items():
                total = pooled.setdefault(transition, TransitionTally())
                total.detected += tally.detected
                total.total += tally.total
        return {t: pooled[t] for t in Transition if t in pooled}

    def tally(self, transition, subject=None) -> TransitionTally:
        transition = Transition.parse(transition)
        source = self.pooled() if subject is None else self.by_subject.get(str(subject), {})
        return source.get(transition, TransitionTally())

    def accuracy(self, transition, subject=None) -> Optional[float]:
        return self.tally(transition, subject).accuracy

    def merge(self, other: "EvaluationReport") -> "EvaluationReport":
        merged = EvaluationReport()
        for report in (self, other):
            for subject, tallies in report.by_subject.items():
                target = merged.by_subject.setdefault(subject, {})
                for transition, tally in tallies.items():
                    total = target.setdefault(transition, TransitionTally())
                    total.detected += tally.detected
                    total.total += tally.total
        return merged

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for subject in self.subjects:
            for transition in Transition:
                tally = self.by_subject[subject].get(transition)
                if tally is not None:
                    rows.append(self._row(subject, transition, tally))
        for transition, tally in self.pooled().items():
            rows.append(self._row(self.POOLED, transition, tally))
        return pd.DataFrame(rows, columns=["subject", "transition", "n_cdt", "n_tt", "accuracy"])

    @staticmethod
    def _row(subject, transition, tally):
        return {"subject": subject, "transition": transition.value,
                "n_cdt": tally.detected, "n_tt": tally.total, "accuracy": tally.accuracy}

    def to_dict(self):
        def block(tallies):
            return {t.value: {"n_cdt": v.detected, "n_tt": v.total, "accuracy": v.accuracy}
                    for t, v in tallies.items()}
        return {
            "pooled": block(self.pooled()),
            "subjects": {s: block({t: self.by_subject[s][t] for t in Transition if t in self.by_subject[s]})
                         for s in self.subjects},
        }

    def save(self, json_path=None, csv_path=None):
        if json_path:
            Path(json_path).parent.mkdir(parents=True, exist_ok=True)
            with open(json_path, 'w', encoding='utf-8') as f:
                json.dump(self.to_dict(), f, indent=2)
        if csv_path:
            Path(csv_path).parent.mkdir(parents=True, exist_ok=True)
            self.to_frame().to_csv(csv_path, index=False, encoding='utf-8')


def _window_end(t_gt, hs_times, step_window):
    if hs_times is not None:
        later = np.asarray(hs_times, dtype=float)
        later = later[later > t_gt]
        if later.size >= 2:
            return float(later[1])
    return t_gt + step_window


def compute_accuracy(detections: Sequence[TransitionEvent], gt_transitions: Sequence[GtTransition],
                     step_window: float, hs_times=None, subject="all") -> EvaluationReport:
    """
    A ground-truth transition is detected when a detection with the same (from, to)
    lies in [t_gt, window end]. The window ends at the second heel strike after
    onset, or at t_gt + step_window without one. Each detection matches at most
    one ground-truth transition.
    """
    ordered = sorted(detections, key=lambda d: (d.t, d.from_state.value, d.to_state.value))
    used = [False] * len(ordered)
    report = EvaluationReport()

    for gt in sorted(gt_transitions, key=lambda g: g.t):
        end = _window_end(gt.t, hs_times, step_window)
        matched = False
        for i, detection in enumerate(ordered):
            if used[i] or detection.t < gt.t:
                continue
            if detection.t > end:
                break
            if detection.from_state == gt.from_state and detection.to_state == gt.to_state:
                used[i] = True
                matched = True
                break
        report.add(subject, gt.transition, matched)
    return report


def evaluate_trial(trial: Trial, threshold_set: ThresholdSet, detector_config: DetectorConfig,
                   map_weights: Optional[MappingWeights] = None, window_step_periods=None) -> EvaluationReport:
    detections = replay(trial, threshold_set, detector_config, map_weights)
    return compute_accuracy(detections, trial.gt_transitions,
                            step_window_for(trial, detector_config, window_step_periods),
                            hs_times=heel_strike_times(trial, detector_config),
                            subject=trial.subject)


def evaluate_trials(trials: Iterable[Trial], threshold_set: ThresholdSet, detector_config: DetectorConfig,
                    map_weights: Optional[MappingWeights] = None, excluded_subjects=None,
                    window_step_periods=None) -> EvaluationReport:
    """Evaluate and merge trials; subjects on the exclusion list are skipped."""
    excluded = set(TRANSITION_CONFIG["evaluation"]["excluded_subjects"] if excluded_subjects is None
                   else excluded_subjects)
    report = EvaluationReport()
    for trial in trials:
        if trial.subject in excluded:
            logger.info(f"Skipping {trial.name} (subject excluded)")
            continue
        report = report.merge(evaluate_trial(trial, threshold_set, detector_config, map_weights,
                                             window_step_periods))
    return report


def summarize_subjects(report: EvaluationReport) -> pd.DataFrame:
    """Across-subject mean and median accuracy per transition."""
    frame = report.to_frame()
    frame = frame[(frame["subject"] != EvaluationReport.POOLED) & frame["accuracy"].notna()]
    columns = ["transition", "n_subjects", "mean_accuracy", "median_accuracy", "min_accuracy", "max_accuracy"]
    if frame.empty:
        return pd.DataFrame(columns=columns)
    grouped = frame.groupby("transition", sort=False)["accuracy"]
    summary = pd.DataFrame({
        "n_subjects": grouped.count(),
        "mean_accuracy": grouped.mean(),
        "median_accuracy": grouped.median(),
        "min_accuracy": grouped.min(),
        "max_accuracy": grouped.max(),
    }).reset_index()
    order = {t.value: i for i, t in enumerate(Transition)}
    summary = summary.sort_values("transition", key=lambda s: s.map(order)).reset_index(drop=True)
    return summary[columns]


# =============================================================================
# TRANSITION ICFS AND LABELED SETS
# =============================================================================

def _annotated_events(trial, config, map_weights=None):
    return detect_gait_events(prepare_frames(trial, config, map_weights), config)


def collect_transition_icfs(trials: Iterable[Trial], detector_config: DetectorConfig,
                            map_weights: Optional[MappingWeights] = None, window_step_periods=None) -> pd.DataFrame:
    """
    For each ground-truth transition, the ICF of the first event of the rule's
    trigger kind inside its detection window.
    """
    rows = []
    for trial in trials:
        events = _annotated_events(trial, detector_config, map_weights)
        hs = heel_strike_times(trial, detector_config)
        step_window = step_window_for(trial, detector_config, window_step_periods)
        for gt in trial.gt_transitions:
            transition = gt.transition
            end = _window_end(gt.t, hs, step_window)
            sample = next((e.icf for e in events
                           if e.kind == transition.trigger and e.icf is not None and gt.t <= e.t <= end), None)
            if sample is None:
                logger.debug(f"{trial.name}: no {transition.trigger.value} event in window of {transition.value}")
                continue
            rows.append({"subject": trial.subject, "trial_index": trial.trial_index,
                         "transition": transition.value, "icf_id": sample.icf_id.value,
                         "t": sample.t, "value": sample.value})
    return pd.DataFrame(rows, columns=["subject", "trial_index", "transition", "icf_id", "t", "value"])


def build_labeled_sets(trials: Sequence[Trial], detector_config: DetectorConfig,
                       map_weights: Optional[MappingWeights] = None) -> Dict[Transition, LabeledIcfSet]:
    """
    Positives are transition-cycle ICFs; negatives are ICFs of the same trigger
    kind observed while the ground truth sits in the transition's origin state.
    Transitions lacking either class are left out (and logged).
    """
    trials = list(trials)
    positives = collect_transition_icfs(trials, detector_config, map_weights)
    negatives: Dict[Transition, List[float]] = {t: [] for t in Transition}

    for trial in trials:
        arrays = frames_to_arrays(trial.frames)
        labels = [f.label for f in trial.frames]
        for event in _annotated_events(trial, detector_config, map_weights):
            if event.icf is None:
                continue
            index = int(np.searchsorted(arrays["t"], event.t, side="right")) - 1
            state = labels[max(index, 0)]
            for transition in Transition:
                if transition.trigger == event.kind and transition.from_state == state:
                    negatives[transition].append(event.icf.value)

    sets = {}
    for transition in Transition:
        pos = positives.loc[positives["transition"] == transition.value, "value"].to_numpy(dtype=float)
        neg = np.asarray(negatives[transition], dtype=float)
        if pos.size == 0 or neg.size == 0:
            logger.warning(f"{transition.value}: {pos.size} positive / {neg.size} negative ICFs; no labeled set")
            continue
        sets[transition] = LabeledIcfSet.from_classes(neg, pos, transition)
    return sets


# =============================================================================
# CSV INGESTION
# =============================================================================

def _first_bad_row(mask):
    bad = np.flatnonzero(mask)
    return int(bad[0]) + 1 if bad.size else None


def load_trial_csv(path, column_map=None, subject=None, system="custom", trial_index=0,
                   grf_scale=1.0, detector_config: Optional[DetectorConfig] = None) -> Trial:
    """
    Parse a trial CSV (canonical header t,theta_th,theta_dot,grf,label, theta_dot optional).

    column_map renames source columns to canonical names. Row numbers in errors
    are 1-based data rows (the header is not counted).
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Trial file not found: {path}")
    try:
        df = pd.read_csv(path, encoding='utf-8')
    except (pd.errors.ParserError, UnicodeDecodeError) as e:
        raise TrialLoadError(f"unreadable CSV ({e})", path=path) from e
    if column_map:
        df = df.rename(columns=dict(column_map))

    missing = [c for c in REQUIRED_COLUMNS if c not in df.columns]
    if missing:
        raise TrialLoadError(f"missing columns {', '.join(missing)}", path=path)
    if df.empty:
        raise TrialLoadError("no data rows", path=path)

    numeric = {}
    for column in ("t", "theta_th", "theta_dot", "grf"):
        if column not in df.columns:
            continue
        values = pd.to_numeric(df[column], errors="coerce").to_numpy(dtype=float)
        if column == "theta_dot" and np.all(np.isnan(values)):
            continue
        row = _first_bad_row(~np.isfinite(values))
        if row is not None:
            raise TrialLoadError(f"column '{column}' has a non-numeric value", row=row, path=path)
        numeric[column] = values

    row = _first_bad_row(np.diff(numeric["t"]) <= 0)
    if row is not None:
        raise TrialLoadError("time is not strictly increasing", row=row + 1, path=path)

    grf = numeric["grf"] / float(grf_scale)
    row = _first_bad_row(grf < 0)
    if row is not None:
        raise TrialLoadError("negative grf", row=row, path=path)

    labels = [None] * len(df)
    if "label" in df.columns:
        for i, raw in enumerate(df["label"].tolist()):
            if pd.isna(raw) or str(raw).strip() == "":
                continue
            try:
                labels[i] = LocomotionState.parse(raw)
            except InvalidInputError as e:
                raise TrialLoadError(str(e), row=i + 1, path=path) from e

    theta_dot = numeric.get("theta_dot")
    frames = [KinematicFrame(t=float(numeric["t"][i]), theta_th=float(numeric["theta_th"][i]),
                             theta_dot=None if theta_dot is None else float(theta_dot[i]),
                             grf=float(grf[i]), label=labels[i])
              for i in range(len(df))]
    if theta_dot is not None and len(frames) >= 3:
        frames = fill_acceleration(frames, detector_config or DetectorConfig())

    try:
        trial = Trial.from_frames(frames, subject or path.stem, system, trial_index)
    except InvalidInputError as e:
        raise TrialLoadError(str(e), path=path) from e
    logger.info(f"Loaded {path.name}: {len(frames)} frames, {len(trial.gt_transitions)} transitions")
    return trial.validate()


def trial_to_frame(trial: Trial) -> pd.DataFrame:
    arrays = frames_to_arrays(trial.frames)
    data = {"t": arrays["t"], "theta_th": arrays["theta"]}
    if all(f.theta_dot is not None for f in trial.frames):
        data["theta_dot"] = arrays["theta_dot"]
    data["grf"] = arrays["grf"]
    data["label"] = trial.labels()
    return pd.DataFrame(data)


def save_trial_csv(trial: Trial, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    trial_to_frame(trial).to_csv(path, index=False, encoding='utf-8')
    return path


def load_trial_dir(directory, pattern="*.csv", **kwargs) -> List[Trial]:
    """Load every trial CSV in a directory, sorted by name; the subject is the name prefix."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"Trial directory not found: {directory}")
    fixed_subject = kwargs.pop("subject", None)
    trials = []
    for index, path in enumerate(sorted(directory.glob(pattern))):
        subject = fixed_subject or path.stem.split("_")[0]
        trials.append(load_trial_csv(path, subject=subject, trial_index=index, **kwargs))
    if not trials:
        raise InvalidInputError(f"No trial files matching {pattern} in {directory}")
    return trials


# =============================================================================
# SYNTHETIC GAIT
# =============================================================================

SYNTH = TRANSITION_CONFIG["synthetic"]


@dataclass(frozen=True)
class Segment:
    """A bout of one mode. Sit bouts ignore `strides`; per-segment values override defaults."""

    mode: LocomotionState
    strides: int = 1
    mhf_angle: Optional[float] = None
    icf2: Optional[float] = None
    sit_rate: Optional[float] = None
    stand_rate: Optional[float] = None


@dataclass(frozen=True)
class ScenarioParams:
    segments: Tuple[Segment, ...]
    step_period: float = SYNTH["step_period"]
    sample_rate: float = TRANSITION_CONFIG["detector"]["sample_rate"]
    trough: float = SYNTH["trough"]
    mhf_angles: Dict[str, float] = field(default_factory=lambda: dict(SYNTH["mhf_angles"]))
    icf2: Dict[str, float] = field(default_factory=lambda: dict(SYNTH["icf2"]))
    sit_angle: float = SYNTH["sit_angle"]
    sit_rate: float = SYNTH["sit_rate"]
    stand_rate: float = SYNTH["stand_rate"]
    approach_rate: float = SYNTH["approach_rate"]
    hold_time: float = SYNTH["hold_time"]
    seated_time: float = SYNTH["seated_time"]
    icf_jitter_std: float = 0.0
    rate_jitter_std: float = 0.0
    noise_std: float = 0.0
    seed: int = 0
    subject: str = "S1"
    system: str = "ewalk"
    trial_index: int = 0

    def validate(self):
        if not self.segments:
            raise InvalidInputError("Scenario needs at least one segment")
        if self.step_period <= 0 or self.sample_rate <= 0:
            raise InvalidInputError("step_period and sample_rate must be > 0")
        if self.stride_samples < 8:
            raise InvalidInputError("step_period too short for the sample rate")
        modes = [LocomotionState.parse(s.mode) for s in self.segments]
        if modes[0] != LocomotionState.WALK or modes[-1] != LocomotionState.WALK:
            raise InvalidInputError("Scenarios must start and end with a walk segment")
        for previous, current in zip(modes[:-1], modes[1:]):
            if previous != LocomotionState.WALK and current != LocomotionState.WALK:
                raise InvalidInputError(f"{previous.value} -> {current.value}: non-walk bouts must be bracketed by walk")
        for segment in self.segments:
            if segment.strides < 1:
                raise InvalidInputError("Segments need at least one stride")
            mode = LocomotionState.parse(segment.mode)
            if mode == LocomotionState.SIT:
                for rate in (segment.sit_rate or self.sit_rate, segment.stand_rate or self.stand_rate):
                    if rate <= 0:
                        raise InvalidInputError("Sit and stand rates must be > 0")
                continue
            peak = self._mhf(segment)
            icf2 = self._icf2(segment)
            if peak <= self.trough:
                raise InvalidInputError(f"{mode.value} MHF angle {peak} must exceed the trough {self.trough}")
            if not 0 < icf2 < peak - self.trough:
                raise InvalidInputError(f"{mode.value} ICF2 {icf2} must lie in (0, {peak - self.trough})")
        return self

    @property
    def stride_samples(self) -> int:
        return 2 * int(round(self.step_period * self.sample_rate / 2.0))

    def _mhf(self, segment):
        mode = LocomotionState.parse(segment.mode)
        return segment.mhf_angle if segment.mhf_angle is not None else self.mhf_angles[mode.value]

    def _icf2(self, segment):
        mode = LocomotionState.parse(segment.mode)
        return segment.icf2 if segment.icf2 is not None else self.icf2[mode.value]


def _stride(peak, icf2, n, trough):
    """One raised-cosine stride; exact peak at n/2 and theta(HS) = peak - icf2."""
    j = np.arange(n)
    theta = trough + (peak - trough) * (1.0 - np.cos(2.0 * np.pi * j / n)) / 2.0
    mid = n // 2
    theta[mid] = peak
    after = np.arange(mid + 1, n)
    hs = int(after[np.argmin(np.abs(theta[after] - (peak - icf2)))])
    theta[hs] = peak - icf2
    grf = np.zeros(n)
    grf[hs:] = 1.0
    return theta, grf


def _ramp(start, end, rate, fs):
    n = max(1, int(round(abs(end - start) / rate * fs)))
    return start + (end - start) * np.arange(1, n + 1) / n


def generate_synthetic_trial(params: ScenarioParams) -> Trial:
    """
    Piecewise gait: raised-cosine strides (walk, stair ascent, stair descent) and
    ramp/hold sit bouts, a GRF square wave rising at each heel strike, seeded
    jitter and noise, exact labels.
    """
    params.validate()
    rng = np.random.default_rng(params.seed)
    fs, n = params.sample_rate, params.stride_samples
    theta_parts, grf_parts, label_parts = [], [], []

    def emit(theta, grf, state):
        theta_parts.append(np.asarray(theta, dtype=float))
        grf_parts.append(np.broadcast_to(np.asarray(grf, dtype=float), np.shape(theta)).copy())
        label_parts.extend([state] * len(theta))

    for segment in params.segments:
        mode = LocomotionState.parse(segment.mode)
        if mode == LocomotionState.SIT:
            sit_rate = (segment.sit_rate or params.sit_rate) + params.rate_jitter_std * rng.standard_normal()
            stand_rate = (segment.stand_rate or params.stand_rate) + params.rate_jitter_std * rng.standard_normal()
            sit_rate, stand_rate = max(sit_rate, 1.0), max(stand_rate, 1.0)
            last = theta_parts[-1][-1]
            walk = LocomotionState.WALK
            emit(_ramp(last, 0.0, params.approach_rate, fs), 1.0, walk)
            emit(np.zeros(int(round(params.hold_time * fs))), 1.0, walk)
            emit(_ramp(0.0, params.sit_angle, sit_rate, fs), 1.0, LocomotionState.SIT)
            emit(np.full(int(round(params.seated_time * fs)), params.sit_angle), 0.1, LocomotionState.SIT)
            emit(_ramp(params.sit_angle, 0.0, stand_rate, fs), 1.0, walk)
            emit(np.zeros(int(round(params.hold_time * fs))), 1.0, walk)
            emit(_ramp(0.0, params.trough, params.approach_rate, fs), 1.0, walk)
            continue

        for _ in range(segment.strides):
            peak = params._mhf(segment) + params.icf_jitter_std * rng.standard_normal()
            icf2 = params._icf2(segment) + params.icf_jitter_std * rng.standard_normal()
            icf2 = float(np.clip(icf2, 0.1, peak - params.trough - 0.1))
            theta, grf = _stride(peak, icf2, n, params.trough)
            emit(theta, grf, mode)

    theta = np.concatenate(theta_parts)
    grf = np.concatenate(grf_parts)
    if params.noise_std > 0:
        theta = theta + rng.normal(0.0, params.noise_std, theta.size)
    t = np.arange(theta.size) / fs

    frames = [KinematicFrame(t=float(t[i]), theta_th=float(theta[i]), grf=float(grf[i]), label=label_parts[i])
              for i in range(theta.size)]
    return Trial.from_frames(frames, params.subject, params.system, params.trial_index).validate()


# ---- built-in scenarios ----

PRE_STRIDES = 4
BOUT_STRIDES = 4
POST_STRIDES = 6

# Stair-descent ICF2 per instance for the outlier subject: all but one fall below the default W-SD threshold
OUTLIER_SD_ICF2 = (9.0, 9.0, 11.5, 9.0, 9.0)

SCENARIOS = ("walk", "w-s", "w-sa", "w-sd", "slow-sit", "sd-outlier")


def _bout(mode, **kwargs):
    return (Segment(LocomotionState.WALK, PRE_STRIDES),
            Segment(mode, BOUT_STRIDES, **kwargs),
            Segment(LocomotionState.WALK, POST_STRIDES))


def scenario_params(name, instance=0, seed=0, **overrides) -> ScenarioParams:
    """
    Parameters of a built-in scenario instance.

    walk, w-s, w-sa and w-sd are clean eWalk-separable trials. slow-sit is a
    subject who sits down at 20 deg/s, below the default W-S threshold.
    sd-outlier is a subject whose stair-descent ICF2 mostly sits under the
    default W-SD threshold, with a walking ICF2 of 2 deg.
    """
    key = str(name).lower()
    base = {"seed": seed + instance, "trial_index": instance}
    if key == "walk":
        base.update(segments=(Segment(LocomotionState.WALK, PRE_STRIDES + POST_STRIDES),))
    elif key == "w-s":
        base.update(segments=_bout(LocomotionState.SIT))
    elif key == "w-sa":
        base.update(segments=_bout(LocomotionState.STAIR_ASCENT))
    elif key == "w-sd":
        base.update(segments=_bout(LocomotionState.STAIR_DESCENT))
    elif key == "slow-sit":
        base.update(segments=_bout(LocomotionState.SIT), sit_rate=20.0, rate_jitter_std=1.0, subject="S2")
    elif key == "sd-outlier":
        sd = OUTLIER_SD_ICF2[instance % len(OUTLIER_SD_ICF2)]
        base.update(segments=_bout(LocomotionState.STAIR_DESCENT, icf2=sd),
                    icf2={**SYNTH["icf2"], "walk": 2.0}, subject="S5")
    else:
        raise InvalidInputError(f"Unknown scenario '{name}' (expected one of {', '.join(SCENARIOS)})")
    base.update(overrides)
    return ScenarioParams(**base)


def scenario_trials(name, n_instances=5, seed=0, **overrides) -> List[Trial]:
    return [generate_synthetic_trial(scenario_params(name, i, seed, **overrides)) for i in range(n_instances)]
