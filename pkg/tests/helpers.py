"""Frame builders for tests."""

import numpy as np

from signal_core import KinematicFrame, LocomotionState


def make_frames(theta, grf=None, fs=100.0, label=LocomotionState.WALK, derivatives=True):
    """Frames from an angle array; derivatives by finite differences when requested."""
    theta = np.asarray(theta, dtype=float)
    t = np.arange(theta.size) / fs
    grf = np.zeros_like(theta) if grf is None else np.asarray(grf, dtype=float)
    if derivatives:
        dot = np.gradient(theta, t)
        ddot = np.gradient(dot, t)
        return [KinematicFrame(t=float(t[i]), theta_th=float(theta[i]), theta_dot=float(dot[i]),
                               theta_ddot=float(ddot[i]), grf=float(grf[i]), label=label)
                for i in range(theta.size)]
    return [KinematicFrame(t=float(t[i]), theta_th=float(theta[i]), grf=float(grf[i]), label=label)
            for i in range(theta.size)]
