#!/usr/bin/env python3
"""
Alignment Map - Human/Exoskeleton Misalignment Correction
Maps measured hip angle and its derivatives onto a reference-aligned angle
with a closed-form least-squares fit over a seven-term polynomial basis
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
from scipy import linalg

from signal_core import DetectorConfig, KinematicFrame, estimate_derivatives, frames_to_arrays, hs_indices
from transition_config import TRANSITION_CONFIG
from transition_errors import InvalidInputError

logger = logging.getLogger(__name__)

N_WEIGHTS = 7
BASIS_TERMS = ("1", "x", "x_dot", "x_ddot", "x*x_dot", "x*x_ddot", "x_dot*x_ddot")

# Weights trained on eWalk stair-ascent cycles against literature mean trajectories
EWALK_REFERENCE_WEIGHTS = (5.7, 0.67, 0.033, 3.1e-4, -4.6e-4, 5.7e-6, -2.5e-6)


@dataclass(frozen=True)
class MappingWeights:
    w: tuple
    rank_deficient: bool = False

    def __post_init__(self):
        w = tuple(float(v) for v in np.ravel(self.w))
        if len(w) != N_WEIGHTS:
            raise InvalidInputError(f"Mapping weights need exactly {N_WEIGHTS} values, got {len(w)}")
        if not np.all(np.isfinite(w)):
            raise InvalidInputError("Mapping weights must be finite")
        object.__setattr__(self, "w", w)

    @property
    def vector(self):
        return np.array(self.w, dtype=float)

    def __add__(self, other):
        return MappingWeights(self.vector + other.vector)

    def to_json(self):
        return json.dumps(list(self.w))

    @classmethod
    def identity(cls):
        return cls((0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0))


@dataclass
class MappingFitReport:
    rmse_before: float
    rmse_after: float
    residual_gradient_norm: float
    n_samples: int
    mhf_mean_before: Optional[float] = None
    mhf_mean_after: Optional[float] = None
    mhf_mean_reference: Optional[float] = None
    cycle_std_before: Optional[float] = None
    cycle_std_after: Optional[float] = None
    rank_deficient: bool = False

    def to_dict(self):
        return dict(self.__dict__)


# =============================================================================
# BASIS AND FIT
# =============================================================================

def basis_rows(x, x_dot, x_ddot) -> np.ndarray:
    """Rows [1, x, x', x'', x*x', x*x'', x'*x''] for array inputs."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x_dot = np.atleast_1d(np.asarray(x_dot, dtype=float))
    x_ddot = np.atleast_1d(np.asarray(x_ddot, dtype=float))
    return np.column_stack([np.ones_like(x), x, x_dot, x_ddot, x * x_dot, x * x_ddot, x_dot * x_ddot])


def design_matrix(frames: Sequence[KinematicFrame]) -> np.ndarray:
    """n x 7 design matrix; inputs are used unnormalized."""
    if any(not f.has_derivatives for f in frames):
        raise InvalidInputError("design_matrix needs theta_dot and theta_ddot on every frame")
    arrays = frames_to_arrays(frames)
    return basis_rows(arrays["theta"], arrays["theta_dot"], arrays["theta_ddot"])


def squared_loss(w, X, t) -> float:
    residual = np.asarray(t, dtype=float) - np.asarray(X, dtype=float) @ _as_vector(w)
    return float(residual @ residual)


def loss_gradient(w, X, t) -> np.ndarray:
    """Gradient of the summed squared error with respect to w."""
    X = np.asarray(X, dtype=float)
    residual = np.asarray(t, dtype=float) - X @ _as_vector(w)
    return -2.0 * X.T @ residual


def _as_vector(w):
    return w.vector if isinstance(w, MappingWeights) else np.asarray(w, dtype=float)


def fit_weights(X, t) -> MappingWeights:
    """
    Least-squares weights for t ~ X w.

    Uses an SVD-based solve, which equals the normal-equations solution when X
    has full column rank and the minimum-norm solution otherwise. A rank below 7
    is flagged on the returned weights.
    """
    X = np.asarray(X, dtype=float)
    t = np.asarray(t, dtype=float).ravel()
    if X.ndim != 2 or X.shape[1] != N_WEIGHTS:
        raise InvalidInputError(f"Design matrix must be n x {N_WEIGHTS}, got {X.shape}")
    if X.shape[0] != t.shape[0]:
        raise InvalidInputError(f"Design matrix has {X.shape[0]} rows but {t.shape[0]} targets")
    if X.shape[0] < N_WEIGHTS:
        logger.warning(f"Only {X.shape[0]} samples for {N_WEIGHTS} weights; solution is minimum-norm")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(t))):
        raise InvalidInputError("Design matrix and targets must be finite")

    w, _, rank, _ = linalg.lstsq(X, t, lapack_driver="gelsd")
    rank_deficient = int(rank) < N_WEIGHTS
    if rank_deficient:
        logger.warning(f"Design matrix rank {rank} < {N_WEIGHTS}; using minimum-norm least squares")
    return MappingWeights(w, rank_deficient=rank_deficient)


def apply_map(w: MappingWeights, frame: KinematicFrame) -> float:
    if not frame.has_derivatives:
        raise InvalidInputError("apply_map needs theta_dot and theta_ddot")
    row = basis_rows(frame.theta_th, frame.theta_dot, frame.theta_ddot)[0]
    return float(row @ _as_vector(w))


def apply_map_series(w: MappingWeights, frames: Sequence[KinematicFrame]) -> np.ndarray:
    return design_matrix(frames) @ _as_vector(w)


def map_frames(w: MappingWeights, frames: Sequence[KinematicFrame], config: DetectorConfig) -> List[KinematicFrame]:
    """Replace theta_th by the mapped angle and re-derive derivatives of the mapped signal."""
    if not frames:
        return []
    if any(not f.has_derivatives for f in frames):
        frames = estimate_derivatives(frames, config)
    mapped = apply_map_series(w, frames)
    remapped = [replace(f, theta_th=float(v), theta_dot=None, theta_ddot=None) for f, v in zip(frames, mapped)]
    return estimate_derivatives(remapped, config)


# =============================================================================
# CYCLES
# =============================================================================

def segment_cycles(frames: Sequence[KinematicFrame], config: DetectorConfig) -> List[List[KinematicFrame]]:
    """Split frames into heel-strike to heel-strike cycles [HS_k, HS_k+1)."""
    arrays = frames_to_arrays(frames)
    hs = hs_indices(arrays["grf"], config)
    return [list(frames[a:b]) for a, b in zip(hs[:-1], hs[1:])]


def resample_signal(values, n_points=None) -> np.ndarray:
    """Linear interpolation of one cycle onto n_points evenly spaced phase samples."""
    n_points = n_points or TRANSITION_CONFIG["mapping"]["cycle_points"]
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        raise InvalidInputError("A cycle needs at least 2 samples to resample")
    source = np.linspace(0.0, 1.0, values.size)
    target = np.linspace(0.0, 1.0, int(n_points))
    return np.interp(target, source, values)


def resample_cycle(cycle: Sequence[KinematicFrame], n_points=None) -> List[KinematicFrame]:
    """Resample every column of a cycle onto n_points; labels follow the nearest source sample."""
    n_points = int(n_points or TRANSITION_CONFIG["mapping"]["cycle_points"])
    if len(cycle) < 2:
        raise InvalidInputError("A cycle needs at least 2 frames to resample")
    arrays = frames_to_arrays(cycle)
    columns = {key: resample_signal(arrays[key], n_points) for key in ("t", "theta", "grf")}
    has_derivs = all(f.has_derivatives for f in cycle)
    if has_derivs:
        columns["theta_dot"] = resample_signal(arrays["theta_dot"], n_points)
        columns["theta_ddot"] = resample_signal(arrays["theta_ddot"], n_points)

    nearest = np.rint(np.linspace(0, len(cycle) - 1, n_points)).astype(int)
    frames = []
    for i in range(n_points):
        frames.append(KinematicFrame(
            t=float(columns["t"][i]),
            theta_th=float(columns["theta"][i]),
            theta_dot=float(columns["theta_dot"][i]) if has_derivs else None,
            theta_ddot=float(columns["theta_ddot"][i]) if has_derivs else None,
            grf=float(columns["grf"][i]),
            label=cycle[nearest[i]].label,
        ))
    return frames


def _check_cycles(measured_cycles, reference_cycles):
    reference = [np.asarray(r, dtype=float).ravel() for r in reference_cycles]
    if len(measured_cycles) != len(reference):
        raise InvalidInputError(f"{len(measured_cycles)} measured cycles but {len(reference)} reference cycles")
    if not measured_cycles:
        raise InvalidInputError("At least one cycle is required")
    for i, (cycle, ref) in enumerate(zip(measured_cycles, reference)):
        if len(cycle) != ref.size:
            raise InvalidInputError(
                f"Cycle {i}: measured length {len(cycle)} != reference length {ref.size}; resample both first")
    return reference


def fit_map_from_cycles(measured_cycles, reference_cycles):
    """Fit weights on stacked, equally long cycles. Returns (weights, report)."""
    reference = _check_cycles(measured_cycles, reference_cycles)
    X = np.vstack([design_matrix(c) for c in measured_cycles])
    t = np.concatenate(reference)
    weights = fit_weights(X, t)
    report = evaluate_map(weights, measured_cycles, reference)
    logger.info(f"Alignment map fitted on {len(measured_cycles)} cycles: "
                f"RMSE {report.rmse_before:.2f} -> {report.rmse_after:.2f} deg")
    return weights, report


def evaluate_map(w: MappingWeights, measured_cycles, reference_cycles) -> MappingFitReport:
    """
    Compare measured and mapped cycles against reference cycles.

    measured_cycles are frame sequences with derivatives; reference_cycles are
    angle arrays of the same length per cycle. Besides RMSE this reports the mean
    per-cycle maximum (MHF) and the across-cycle standard deviation averaged over
    phase, before and after mapping.
    """
    reference = _check_cycles(measured_cycles, reference_cycles)
    measured = [frames_to_arrays(c)["theta"] for c in measured_cycles]
    mapped = [apply_map_series(w, c) for c in measured_cycles]

    ref_all = np.concatenate(reference)
    before = np.concatenate(measured) - ref_all
    after = np.concatenate(mapped) - ref_all

    X = np.vstack([design_matrix(c) for c in measured_cycles])
    gradient_norm = float(np.linalg.norm(loss_gradient(w, X, ref_all)))

    report = MappingFitReport(
        rmse_before=float(np.sqrt(np.mean(before ** 2))),
        rmse_after=float(np.sqrt(np.mean(after ** 2))),
        residual_gradient_norm=gradient_norm,
        n_samples=int(ref_all.size),
        mhf_mean_before=float(np.mean([m.max() for m in measured])),
        mhf_mean_after=float(np.mean([m.max() for m in mapped])),
        mhf_mean_reference=float(np.mean([r.max() for r in reference])),
        rank_deficient=bool(getattr(w, "rank_deficient", False)),
    )

    if len({len(c) for c in measured_cycles}) == 1 and len(measured_cycles) > 1:
        report.cycle_std_before = float(np.mean(np.std(np.vstack(measured), axis=0)))
        report.cycle_std_after = float(np.mean(np.std(np.vstack(mapped), axis=0)))
    return report


# =============================================================================
# PERSISTENCE
# =============================================================================

def save_weights(weights: MappingWeights, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(list(weights.w), f, indent=2)
    return path


def load_weights(path) -> MappingWeights:
    with open(path, 'r', encoding='utf-8') as f:
        data = json.load(f)
    if isinstance(data, dict):
        data = data.get("w", data.get("weights"))
    if not isinstance(data, list):
        raise InvalidInputError(f"{path}: expected a JSON array of {N_WEIGHTS} weights")
    return MappingWeights(data)
