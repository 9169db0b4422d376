"""Breathing rate and cycle-to-cycle variability.

Respiration lives in a narrow band (roughly 6 to 21 breaths per minute),
so everything starts with a 0.1-0.35 Hz zero-phase bandpass. Cycle peaks
must clear a prominence floor tied to the filtered signal's own scale and
respect a 2 s refractory gap, which rejects both ripple and double peaks
on a shoulder.

The *_int variants run the same analysis on the cumulative integral of
the raw signal. For a flow-like sensor the integral approximates lung
volume, which tends to have cleaner cycle peaks; the bandpass removes the
integration drift.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import find_peaks

from .filters import bandpass_reflect

BAND_LOW = 0.1  # Hz
BAND_HIGH = 0.35
MIN_CYCLE_GAP = 2.0  # seconds
PROMINENCE_FRACTION = 0.3  # of the 90th percentile of |filtered|


def cycle_peaks(x: np.ndarray, fs: float) -> np.ndarray:
    """Indices of breath-cycle peaks in the bandpassed signal."""
    filtered = bandpass_reflect(np.asarray(x, dtype=float), fs, BAND_LOW, BAND_HIGH)
    scale = np.percentile(np.abs(filtered), 90)
    if scale <= 0.0:
        return np.array([], dtype=int)
    indices, _ = find_peaks(
        filtered,
        distance=max(1, int(MIN_CYCLE_GAP * fs)),
        prominence=PROMINENCE_FRACTION * scale,
    )
    return indices


def rate_and_rmssd(x: np.ndarray, fs: float) -> tuple[float, float]:
    """Breaths per minute and RMSSD of cycle intervals, in seconds.

    Returns (nan, nan) when there are too few cycles to measure; rate
    needs two peaks, RMSSD needs three.
    """
    peaks = cycle_peaks(x, fs)
    if len(peaks) < 2:
        return float("nan"), float("nan")
    intervals = np.diff(peaks) / fs
    rate = 60.0 / float(np.mean(intervals))
    if len(intervals) < 2:
        return rate, float("nan")
    rmssd = float(np.sqrt(np.mean(np.diff(intervals) ** 2)))
    return rate, rmssd


def integrated(x: np.ndarray, fs: float) -> np.ndarray:
    return np.cumsum(np.asarray(x, dtype=float)) / fs


def rate_and_rmssd_integrated(x: np.ndarray, fs: float) -> tuple[float, float]:
    return rate_and_rmssd(integrated(x, fs), fs)
