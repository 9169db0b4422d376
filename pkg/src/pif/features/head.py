"""Head movement from orientation quaternions.

Travel is the summed geodesic angle between consecutive unit quaternions:
for each step, 2*acos(|q1 . q2|) radians. The absolute value folds the
double cover (q and -q are the same rotation), so a sign flip in the
sensor stream contributes nothing.
"""

from __future__ import annotations

import numpy as np


def head_travel(quats: np.ndarray) -> float:
    """Total rotation in radians over an (n, 4) quaternion array."""
    q = np.asarray(quats, dtype=float)
    if q.ndim != 2 or q.shape[1] != 4 or len(q) < 2:
        return 0.0
    norms = np.linalg.norm(q, axis=1)
    norms[norms == 0.0] = 1.0
    q = q / norms[:, None]
    dots = np.abs(np.sum(q[:-1] * q[1:], axis=1))
    return float(np.sum(2.0 * np.arccos(np.clip(dots, -1.0, 1.0))))


def head_mean_speed(quats: np.ndarray, fs: float) -> float:
    """Average angular speed in radians per second."""
    q = np.asarray(quats, dtype=float)
    if len(q) < 2 or fs <= 0.0:
        return float("nan")
    span = (len(q) - 1) / fs
    return head_travel(q) / span
