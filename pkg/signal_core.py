#!/usr/bin/env python3
"""
Signal Core - Kinematic Data Model and Gait Event Detection
Frames of thigh kinematics, smoothed finite-difference derivatives,
the MHF / HS / THR detectors and instantaneous characteristic features (ICFs)
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.ndimage import uniform_filter1d

from transition_config import TRANSITION_CONFIG, get_system_defaults
from transition_errors import InvalidInputError

logger = logging.getLogger(__name__)


# =============================================================================
# ENUMERATIONS
# =============================================================================

class LocomotionState(str, Enum):
    """Locomotion mode; WALK also covers standing and ramp walking."""

    WALK = "walk"
    SIT = "sit"
    STAIR_ASCENT = "sa"
    STAIR_DESCENT = "sd"

    @classmethod
    def parse(cls, label):
        """Parse a label such as 'walk', 'W', 'stair_ascent' or 'SA'."""
        if isinstance(label, cls):
            return label
        key = str(label).strip().lower().replace("-", "_").replace(" ", "_")
        if key in _STATE_ALIASES:
            return _STATE_ALIASES[key]
        raise InvalidInputError(f"Unknown locomotion label '{label}'")

    @property
    def short(self):
        return _STATE_SHORT[self]


_STATE_ALIASES = {
    "walk": LocomotionState.WALK, "w": LocomotionState.WALK, "walking": LocomotionState.WALK,
    "stand": LocomotionState.WALK, "standing": LocomotionState.WALK,
    "sit": LocomotionState.SIT, "s": LocomotionState.SIT, "sitting": LocomotionState.SIT,
    "sa": LocomotionState.STAIR_ASCENT, "stair_ascent": LocomotionState.STAIR_ASCENT,
    "stairascent": LocomotionState.STAIR_ASCENT,
    "sd": LocomotionState.STAIR_DESCENT, "stair_descent": LocomotionState.STAIR_DESCENT,
    "stairdescent": LocomotionState.STAIR_DESCENT,
}

_STATE_SHORT = {
    LocomotionState.WALK: "W",
    LocomotionState.SIT: "S",
    LocomotionState.STAIR_ASCENT: "SA",
    LocomotionState.STAIR_DESCENT: "SD",
}


class EventKind(str, Enum):
    MHF = "MHF"
    HS = "HS"
    THR = "THR"


# MHF before HS before THR when events share a timestamp
EVENT_ORDER = {EventKind.MHF: 0, EventKind.HS: 1, EventKind.THR: 2}


class IcfId(str, Enum):
    ICF1 = "ICF1"    # theta at MHF
    ICF2 = "ICF2"    # theta at MHF minus theta at HS
    ICF3 = "ICF3"    # theta_dot on entering THR


class TransitionPair(str, Enum):
    WS = "ws"
    WSA = "wsa"
    WSD = "wsd"

    @property
    def transitions(self):
        return _PAIR_TRANSITIONS[self]

    @property
    def target_state(self):
        """The non-Walk class of the pair."""
        return self.transitions[0].to_state

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("/", "").replace("-", "")
        aliases = {"ws": cls.WS, "wssw": cls.WS, "wsa": cls.WSA, "wsasaw": cls.WSA,
                   "wsd": cls.WSD, "wsdsdw": cls.WSD}
        if key not in aliases:
            raise InvalidInputError(f"Unknown transition pair '{value}' (expected ws, wsa or wsd)")
        return aliases[key]


class Transition(str, Enum):
    """The six detectable transitions, in rule evaluation order."""

    W_S = "W-S"
    S_W = "S-W"
    W_SA = "W-SA"
    SA_W = "SA-W"
    W_SD = "W-SD"
    SD_W = "SD-W"

    @property
    def from_state(self):
        return _TRANSITION_SPECS[self][0]

    @property
    def to_state(self):
        return _TRANSITION_SPECS[self][1]

    @property
    def icf_id(self):
        return _TRANSITION_SPECS[self][2]

    @property
    def trigger(self):
        return _TRANSITION_SPECS[self][3]

    @property
    def pair(self):
        return _TRANSITION_SPECS[self][4]

    @classmethod
    def between(cls, from_state, to_state):
        """Look up the transition for a (from, to) state pair, or None."""
        for transition in cls:
            if transition.from_state == from_state and transition.to_state == to_state:
                return transition
        return None

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().upper().replace("_", "-")
        for transition in cls:
            if transition.value == key:
                return transition
        raise InvalidInputError(f"Unknown transition '{value}'")


_W, _S, _SA, _SD = (LocomotionState.WALK, LocomotionState.SIT,
                    LocomotionState.STAIR_ASCENT, LocomotionState.STAIR_DESCENT)

_TRANSITION_SPECS = {
    Transition.W_S: (_W, _S, IcfId.ICF3, EventKind.THR, TransitionPair.WS),
    Transition.S_W: (_S, _W, IcfId.ICF3, EventKind.THR, TransitionPair.WS),
    Transition.W_SA: (_W, _SA, IcfId.ICF1, EventKind.MHF, TransitionPair.WSA),
    Transition.SA_W: (_SA, _W, IcfId.ICF1, EventKind.MHF, TransitionPair.WSA),
    Transition.W_SD: (_W, _SD, IcfId.ICF2, EventKind.HS, TransitionPair.WSD),
    Transition.SD_W: (_SD, _W, IcfId.ICF2, EventKind.HS, TransitionPair.WSD),
}

_PAIR_TRANSITIONS = {
    TransitionPair.WS: (Transition.W_S, Transition.S_W),
    TransitionPair.WSA: (Transition.W_SA, Transition.SA_W),
    TransitionPair.WSD: (Transition.W_SD, Transition.SD_W),
}


# =============================================================================
# DOMAIN TYPES
# =============================================================================

@dataclass(frozen=True)
class KinematicFrame:
    """One time step of thigh kinematics (flexion positive)."""

    t: float
    theta_th: float
    theta_dot: Optional[float] = None
    theta_ddot: Optional[float] = None
    grf: float = 0.0
    label: Optional[LocomotionState] = None

    @property
    def has_derivatives(self):
        return self.theta_dot is not None and self.theta_ddot is not None


@dataclass(frozen=True)
class DetectorConfig:
    mhf_velocity_band: float = TRANSITION_CONFIG["detector"]["mhf_velocity_band"]
    thr_range: Tuple[float, float] = tuple(TRANSITION_CONFIG["systems"]["ewalk"]["thr_range"])
    grf_load_threshold: float = TRANSITION_CONFIG["detector"]["grf_load_threshold"]
    grf_debounce: int = TRANSITION_CONFIG["detector"]["grf_debounce"]
    smoothing_window: int = TRANSITION_CONFIG["detector"]["smoothing_window"]

    def __post_init__(self):
        low, high = self.thr_range
        object.__setattr__(self, "thr_range", (float(low), float(high)))
        if not low < high:
            raise InvalidInputError(f"thr_range low must be below high, got {self.thr_range}")
        if not self.mhf_velocity_band > 0:
            raise InvalidInputError("mhf_velocity_band must be > 0")
        if self.grf_load_threshold < 0:
            raise InvalidInputError("grf_load_threshold must be >= 0")
        if int(self.grf_debounce) < 0:
            raise InvalidInputError("grf_debounce must be >= 0")
        if int(self.smoothing_window) < 1:
            raise InvalidInputError("smoothing_window must be >= 1")

    @classmethod
    def for_system(cls, system, **overrides):
        """Detector defaults with the THR range of a system (ewalk, autonomyo, custom)."""
        settings = dict(TRANSITION_CONFIG["detector"])
        settings.pop("sample_rate", None)
        settings["thr_range"] = tuple(get_system_defaults(system)["thr_range"])
        settings.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**settings)

    def to_dict(self):
        return {
            "mhf_velocity_band": self.mhf_velocity_band,
            "thr_range": list(self.thr_range),
            "grf_load_threshold": self.grf_load_threshold,
            "grf_debounce": int(self.grf_debounce),
            "smoothing_window": int(self.smoothing_window),
        }

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        if "thr_range" in data:
            data["thr_range"] = tuple(data["thr_range"])
        return cls(**data)


@dataclass(frozen=True)
class IcfSample:
    icf_id: IcfId
    value: float
    transition_context: TransitionPair
    t: Optional[float] = None


@dataclass(frozen=True)
class GaitEvent:
    """
    A detected key moment.

    MHF events hold theta at the flexion maximum, HS events hold theta at contact
    plus the MHF angle of the same cycle (mhf_theta), THR events hold theta_dot.
    """

    kind: EventKind
    t: float
    theta_at_event: float
    index: int = -1
    theta_dot: Optional[float] = None
    mhf_theta: Optional[float] = None
    icf: Optional[IcfSample] = field(default=None, compare=False)


# =============================================================================
# ARRAY HELPERS
# =============================================================================

def frames_to_arrays(frames: Sequence[KinematicFrame]):
    """Column arrays for a frame sequence; missing derivatives become NaN."""
    t = np.array([f.t for f in frames], dtype=float)
    theta = np.array([f.theta_th for f in frames], dtype=float)
    theta_dot = np.array([np.nan if f.theta_dot is None else f.theta_dot for f in frames], dtype=float)
    theta_ddot = np.array([np.nan if f.theta_ddot is None else f.theta_ddot for f in frames], dtype=float)
    grf = np.array([f.grf for f in frames], dtype=float)
    return {"t": t, "theta": theta, "theta_dot": theta_dot, "theta_ddot": theta_ddot, "grf": grf}


def _check_time(t):
    if t.size and np.any(np.diff(t) <= 0):
        bad = int(np.flatnonzero(np.diff(t) <= 0)[0]) + 1
        raise InvalidInputError(f"Time must be strictly increasing (violated at frame {bad})")


def _require_derivatives(frames, what):
    if any(f.theta_dot is None for f in frames):
        raise InvalidInputError(f"{what} needs theta_dot; run estimate_derivatives first")


def _centered_moving_average(y, window):
    """Centered moving average; the window shrinks symmetrically at the ends and linear ramps pass unchanged."""
    y = np.asarray(y, dtype=float)
    n = len(y)
    half = min((int(window) - 1) // 2, (n - 1) // 2)
    if half < 1:
        return y
    out = uniform_filter1d(y, size=2 * half + 1, mode="nearest")
    for i in range(half):
        out[i] = y[:2 * i + 1].mean()
        out[n - 1 - i] = y[n - 1 - 2 * i:].mean()
    return out


def _second_derivative(y, t):
    """Three-point second derivative, exact for quadratics on any grid."""
    h0 = t[1:-1] - t[:-2]
    h1 = t[2:] - t[1:-1]
    interior = 2.0 * (h0 * y[2:] - (h0 + h1) * y[1:-1] + h1 * y[:-2]) / (h0 * h1 * (h0 + h1))
    out = np.empty_like(y)
    out[1:-1] = interior
    out[0] = interior[0]
    out[-1] = interior[-1]
    return out


# =============================================================================
# OPERATIONS
# =============================================================================

def estimate_derivatives(frames: Sequence[KinematicFrame], config: DetectorConfig) -> List[KinematicFrame]:
    """
    Fill theta_dot and theta_ddot from the thigh angle.

    The angle is smoothed with a centered moving average (config.smoothing_window
    samples rounded down to odd, shrinking at the ends; 1 disables it), then
    differentiated with central differences.
    Endpoints use one-sided differences. The stored theta_th is left untouched.
    """
    if len(frames) < 3:
        raise InvalidInputError(f"estimate_derivatives needs at least 3 frames, got {len(frames)}")

    arrays = frames_to_arrays(frames)
    t, theta = arrays["t"], arrays["theta"]
    _check_time(t)
    if not np.all(np.isfinite(theta)):
        raise InvalidInputError("theta_th contains non-finite values")

    smooth = _centered_moving_average(theta, config.smoothing_window)

    theta_dot = np.gradient(smooth, t, edge_order=1)
    theta_ddot = _second_derivative(smooth, t)

    return [replace(frame, theta_dot=float(d1), theta_ddot=float(d2))
            for frame, d1, d2 in zip(frames, theta_dot, theta_ddot)]


def fill_acceleration(frames: Sequence[KinematicFrame], config: DetectorConfig) -> List[KinematicFrame]:
    """Derive theta_ddot from a recorded theta_dot (smoothed, then differentiated)."""
    if len(frames) < 3:
        raise InvalidInputError(f"fill_acceleration needs at least 3 frames, got {len(frames)}")
    _require_derivatives(frames, "fill_acceleration")
    arrays = frames_to_arrays(frames)
    _check_time(arrays["t"])
    velocity = _centered_moving_average(arrays["theta_dot"], config.smoothing_window)
    theta_ddot = np.gradient(velocity, arrays["t"], edge_order=1)
    return [replace(frame, theta_ddot=float(d2)) for frame, d2 in zip(frames, theta_ddot)]


def ensure_derivatives(frames: Sequence[KinematicFrame], config: DetectorConfig) -> List[KinematicFrame]:
    """Return frames unchanged when every frame has both derivatives, else derive both."""
    if frames and all(f.has_derivatives for f in frames):
        return list(frames)
    if any(f.theta_dot is not None for f in frames):
        logger.info("Partial derivatives in input; re-deriving theta_dot and theta_ddot from theta_th")
    return estimate_derivatives(frames, config)


def hs_indices(grf, config: DetectorConfig) -> np.ndarray:
    """Sample indices of debounced rising crossings of grf through the load threshold."""
    grf = np.asarray(grf, dtype=float)
    loaded = grf >= config.grf_load_threshold
    edges = np.flatnonzero(loaded[1:] & ~loaded[:-1]) + 1

    accepted = []
    last = None
    for i in edges:
        if last is not None and i - last <= config.grf_debounce:
            continue
        accepted.append(int(i))
        last = i
    return np.array(accepted, dtype=int)


def _mhf_indices(theta, theta_dot, hs, band):
    """One MHF per cycle: the in-band +/- velocity crossing with the largest angle."""
    crossing = np.flatnonzero((theta_dot[:-1] > 0) & (theta_dot[1:] <= 0))
    if crossing.size == 0:
        return np.array([], dtype=int)

    in_band = np.minimum(np.abs(theta_dot[crossing]), np.abs(theta_dot[crossing + 1])) <= band
    crossing = crossing[in_band]
    if crossing.size == 0:
        return np.array([], dtype=int)

    candidates = np.where(theta[crossing] >= theta[crossing + 1], crossing, crossing + 1)

    if hs.size:
        # cycle k spans (HS_k-1, HS_k]
        cycle_ids = np.searchsorted(hs, candidates, side="left")
    else:
        troughs = np.flatnonzero((theta_dot[:-1] < 0) & (theta_dot[1:] >= 0)) + 1
        cycle_ids = np.searchsorted(troughs, candidates, side="right")

    chosen = {}
    for cycle, idx in zip(cycle_ids, candidates):
        best = chosen.get(cycle)
        if best is None or theta[idx] > theta[best]:
            chosen[cycle] = int(idx)
    return np.array(sorted(chosen.values()), dtype=int)


def detect_mhf(frames: Sequence[KinematicFrame], config: DetectorConfig) -> List[GaitEvent]:
    """
    Maximum hip flexion events.

    A candidate is a +/- zero crossing of theta_dot where one of the two straddling
    samples lies inside the velocity band; the sample with the larger angle is kept.
    Cycles are delimited by heel strikes, or by velocity troughs when the trial has
    no heel strike, and each cycle keeps only its highest candidate.
    """
    if len(frames) < 2:
        return []
    _require_derivatives(frames, "detect_mhf")
    arrays = frames_to_arrays(frames)
    hs = hs_indices(arrays["grf"], config)
    idx = _mhf_indices(arrays["theta"], arrays["theta_dot"], hs, config.mhf_velocity_band)
    return [GaitEvent(EventKind.MHF, float(arrays["t"][i]), float(arrays["theta"][i]), index=int(i),
                      theta_dot=float(arrays["theta_dot"][i]))
            for i in idx]


def detect_hs(frames: Sequence[KinematicFrame], config: DetectorConfig,
              mhf_events: Optional[Sequence[GaitEvent]] = None) -> List[GaitEvent]:
    """
    Heel strikes at debounced rising GRF crossings.

    Each HS records the MHF angle of its own cycle (an MHF after the previous HS,
    up to and including this sample), or None when the cycle had no MHF.
    """
    if len(frames) < 2:
        return []
    arrays = frames_to_arrays(frames)
    hs = hs_indices(arrays["grf"], config)
    if hs.size == 0:
        return []

    if mhf_events is None:
        mhf_events = detect_mhf(frames, config) if all(f.theta_dot is not None for f in frames) else []
    mhf_idx = np.array([e.index for e in mhf_events], dtype=int)
    mhf_theta = np.array([e.theta_at_event for e in mhf_events], dtype=float)

    events = []
    previous = -1
    for h in hs:
        in_cycle = np.flatnonzero((mhf_idx > previous) & (mhf_idx <= h))
        recorded = float(mhf_theta[in_cycle[-1]]) if in_cycle.size else None
        events.append(GaitEvent(EventKind.HS, float(arrays["t"][h]), float(arrays["theta"][h]),
                                index=int(h), mhf_theta=recorded))
        previous = h
    return events


def detect_thr_crossing(frames: Sequence[KinematicFrame], config: DetectorConfig) -> List[GaitEvent]:
    """
    THR events at the first sample of each entry of theta_th into [low, high].

    The detector re-arms only after theta_th leaves the range; a trial that starts
    inside the range does not fire until it has left and re-entered.
    """
    if len(frames) < 2:
        return []
    _require_derivatives(frames, "detect_thr_crossing")
    arrays = frames_to_arrays(frames)
    low, high = config.thr_range
    theta = arrays["theta"]
    inside = (theta >= low) & (theta <= high)
    entries = np.flatnonzero(inside[1:] & ~inside[:-1]) + 1
    return [GaitEvent(EventKind.THR, float(arrays["t"][i]), float(theta[i]), index=int(i),
                      theta_dot=float(arrays["theta_dot"][i]))
            for i in entries]


def sort_events(events: Iterable[GaitEvent]) -> List[GaitEvent]:
    return sorted(events, key=lambda e: (e.t, EVENT_ORDER[e.kind]))


def _pair_icfs(events):
    """Yield (event, IcfSample or None) in time order."""
    last_mhf = None
    for event in sort_events(events):
        if event.kind == EventKind.MHF:
            last_mhf = event.theta_at_event
            yield event, IcfSample(IcfId.ICF1, event.theta_at_event, TransitionPair.WSA, event.t)
        elif event.kind == EventKind.HS:
            mhf = event.mhf_theta if event.mhf_theta is not None else last_mhf
            last_mhf = None
            if mhf is None:
                yield event, None
            else:
                yield event, IcfSample(IcfId.ICF2, mhf - event.theta_at_event, TransitionPair.WSD, event.t)
        else:
            value = event.theta_dot if event.theta_dot is not None else float("nan")
            yield event, IcfSample(IcfId.ICF3, value, TransitionPair.WS, event.t)


def extract_icf(events: Iterable[GaitEvent]) -> List[IcfSample]:
    """
    ICF samples from time-ordered events: ICF1 per MHF, ICF2 per HS (preceding MHF
    angle minus HS angle), ICF3 per THR event. An HS with no MHF in its cycle is
    skipped and reported in the log.
    """
    samples = []
    skipped = 0
    for event, sample in _pair_icfs(events):
        if sample is None:
            skipped += 1
            logger.warning(f"HS at t={event.t:.3f}s has no preceding MHF in its cycle; ICF2 skipped")
        else:
            samples.append(sample)
    if skipped:
        logger.info(f"ICF2 skipped for {skipped} heel strike(s)")
    return samples


def annotate_events(events: Iterable[GaitEvent]) -> List[GaitEvent]:
    """Attach each event's ICF sample (None for unpaired HS) in time order."""
    return [replace(event, icf=sample) for event, sample in _pair_icfs(events)]


def detect_gait_events(frames: Sequence[KinematicFrame], config: DetectorConfig) -> List[GaitEvent]:
    """Run all three detectors on frames that carry derivatives; ICF-annotated, time-ordered."""
    mhf = detect_mhf(frames, config)
    hs = detect_hs(frames, config, mhf_events=mhf)
    thr = detect_thr_crossing(frames, config)
    return annotate_events(mhf + hs + thr)
