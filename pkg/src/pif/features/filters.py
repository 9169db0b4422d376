"""Zero-phase filters tuned for slow physiological signals.

Plain filtfilt smears filter transients into the first and last seconds
of a window, which is fatal when the window itself is only a minute long.
Both helpers here extend the signal with synthetic context before
filtering: the lowpass extrapolates the local linear trend so a drifting
baseline stays a drifting baseline, and the bandpass mirrors the signal
around its endpoints so oscillations continue smoothly.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import bessel, butter, sosfiltfilt


def _trend_pad(x: np.ndarray, fs: float, n_pad: int, fit_seconds: float = 5.0) -> np.ndarray:
    """Extend both ends along the locally fitted linear trend."""
    n_fit = max(2, min(len(x), int(fit_seconds * fs)))
    idx = np.arange(n_fit)
    left_fit = np.polyfit(idx, x[:n_fit], 1)
    right_fit = np.polyfit(idx, x[-n_fit:], 1)
    left = np.polyval(left_fit, np.arange(-n_pad, 0))
    right = np.polyval(right_fit, np.arange(n_fit, n_fit + n_pad))
    return np.concatenate([left, x, right])


def lowpass_trend(
    x: np.ndarray, fs: float, cutoff: float, order: int = 4, kind: str = "butter"
) -> np.ndarray:
    """Zero-phase lowpass with linear-trend padding.

    ``kind`` is "butter" for a maximally flat response or "bessel" for a
    monotone step response (no ringing; the magnitude-matched variant so
    the cutoff means the same thing).
    """
    x = np.asarray(x, dtype=float)
    if len(x) < 8:
        return x.copy()
    if kind == "butter":
        sos = butter(order, cutoff, btype="lowpass", fs=fs, output="sos")
    elif kind == "bessel":
        sos = bessel(order, cutoff, btype="lowpass", fs=fs, output="sos", norm="mag")
    else:
        raise ValueError(f"unknown lowpass kind {kind!r}")
    n_pad = min(int(2.0 / cutoff * fs), len(x) - 1)
    padded = _trend_pad(x, fs, n_pad)
    return sosfiltfilt(sos, padded)[n_pad : n_pad + len(x)]


def bandpass_reflect(
    x: np.ndarray,
    fs: float,
    low: float,
    high: float,
    order: int = 4,
    pad_seconds: float = 20.0,
) -> np.ndarray:
    """Zero-phase Butterworth bandpass with odd-reflection padding.

    The signal is continued past each end by point-reflecting it around
    the end sample, which keeps both the value and the slope continuous,
    so slow oscillations enter the filter without an edge step.
    """
    x = np.asarray(x, dtype=float)
    n_pad = min(int(pad_seconds * fs), len(x) - 2)
    if len(x) < 16 or n_pad < 1:
        return x.copy()
    sos = butter(order, [low, high], btype="bandpass", fs=fs, output="sos")
    left = 2.0 * x[0] - x[n_pad:0:-1]
    right = 2.0 * x[-1] - x[-2 : -n_pad - 2 : -1]
    padded = np.concatenate([left, x, right])
    return sosfiltfilt(sos, padded)[n_pad : n_pad + len(x)]
