#!/usr/bin/env python3
"""
SBA Tuner - Statistics-Based Threshold Rescaling
One-shot rescaling of trained thresholds by the ratio of a new subject's
ICF statistics to those of the training population
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Tuple

import numpy as np
import pandas as pd

from signal_core import IcfSample, Transition
from threshold_learn import BoundType, ThresholdSet, clip_to_search_space
from transition_errors import DegenerateStatsError, InvalidInputError

logger = logging.getLogger(__name__)

DENOMINATOR_TOLERANCE = 1e-9


@dataclass(frozen=True)
class IcfStats:
    mean: float
    std: float
    n: int
    transition_id: Optional[Transition] = None

    def __post_init__(self):
        if self.std < 0:
            raise InvalidInputError("std must be >= 0")
        if self.n < 1:
            raise InvalidInputError("n must be >= 1")

    def to_dict(self):
        return {"transition": self.transition_id.value if self.transition_id else None,
                "mean": self.mean, "std": self.std, "n": self.n}


def compute_icf_stats(samples: Iterable, transition_id=None) -> IcfStats:
    """Mean and population standard deviation of ICF values (or IcfSample objects)."""
    values = np.array([s.value if isinstance(s, IcfSample) else s for s in samples], dtype=float)
    if values.size == 0:
        raise InvalidInputError("compute_icf_stats needs at least one sample")
    if not np.all(np.isfinite(values)):
        raise InvalidInputError("ICF samples must be finite")
    transition_id = Transition.parse(transition_id) if transition_id is not None else None
    return IcfStats(float(values.mean()), float(values.std(ddof=0)), int(values.size), transition_id)


def tune_sba(th_tr: float, stats_tr: IcfStats, stats_new: IcfStats, bound_type) -> float:
    """
    th_new = th_tr * (mean_new +/- std_new) / (mean_tr +/- std_tr)

    '+' for exceed rules (the threshold is a lower bound on the feature), '-' for
    fall_below rules. A near-zero denominator, or numerator and denominator of
    opposite sign, raises DegenerateStatsError.
    """
    sign = 1.0 if BoundType(bound_type) == BoundType.EXCEED else -1.0
    numerator = stats_new.mean + sign * stats_new.std
    denominator = stats_tr.mean + sign * stats_tr.std

    if abs(denominator) <= DENOMINATOR_TOLERANCE:
        raise DegenerateStatsError(f"Training statistics give a zero denominator ({denominator:.3g})")
    if numerator * denominator < 0:
        raise DegenerateStatsError(
            f"Scaling ratio {numerator:.3f}/{denominator:.3f} would flip the threshold sign")
    return float(th_tr * (numerator / denominator))


def tune_threshold_set_sba(threshold_set: ThresholdSet, stats_tr: Mapping, stats_new: Mapping
                           ) -> Tuple[ThresholdSet, List[Transition]]:
    """
    Rescale every transition that has statistics for both populations.

    Degenerate transitions keep their threshold and are returned in the second
    element; results outside the search range are clipped.
    """
    stats_tr = {Transition.parse(k): v for k, v in stats_tr.items()}
    stats_new = {Transition.parse(k): v for k, v in stats_new.items()}

    updates: Dict[Transition, float] = {}
    unchanged: List[Transition] = []
    for transition in Transition:
        if transition not in stats_tr or transition not in stats_new:
            continue
        entry = threshold_set[transition]
        try:
            value = tune_sba(entry.value, stats_tr[transition], stats_new[transition], entry.bound)
        except DegenerateStatsError as e:
            logger.warning(f"{transition.value}: {e}; threshold left at {entry.value}")
            unchanged.append(transition)
            continue
        updates[transition] = clip_to_search_space(transition, value)
        logger.info(f"{transition.value}: {entry.value:.3f} -> {updates[transition]:.3f}")

    return threshold_set.with_values(updates), unchanged


def stats_by_transition(samples: pd.DataFrame) -> Dict[Transition, IcfStats]:
    """Group an ICF table (columns: transition, value) into per-transition statistics."""
    missing = [c for c in ("transition", "value") if c not in samples.columns]
    if missing:
        raise InvalidInputError(f"ICF table missing columns {', '.join(missing)}")
    stats = {}
    for name, group in samples.groupby("transition", sort=False):
        transition = Transition.parse(name)
        stats[transition] = compute_icf_stats(group["value"].to_numpy(dtype=float), transition)
    return stats
