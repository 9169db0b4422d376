"""Electrodermal activity: tonic/phasic split, SCR peaks, sudomotor driver.

The tonic estimate has to ignore skin-conductance responses entirely, or
every SCR drags the baseline up and shrinks the next peak. The pipeline:

1. smooth at 1 Hz (Butterworth) to kill sensor noise,
2. knock out SCR bumps with a long running median, computed on a
   decimated copy because a 15 s median at full rate is pointless work,
3. lowpass the result at 0.05 Hz with a Bessel filter. Bessel, not
   Butterworth: its step response is monotone, so a steep SCR cluster
   cannot ring the baseline below the signal and fake a peak.

Peaks are then found on (smoothed - tonic) with floors on prominence and
height plus a refractory distance and a width ceiling, which together
reject drift, ripple, and double-counted shoulders.

The sudomotor driver is recovered separately by non-negative
deconvolution of the phasic signal against a biexponential SCR kernel
(FISTA with FFT operators, run at 32 Hz).
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import median_filter
from scipy.signal import fftconvolve, find_peaks, resample_poly

from .filters import lowpass_trend

SMOOTH_CUTOFF = 1.0  # Hz
TONIC_CUTOFF = 0.05  # Hz
MEDIAN_SECONDS = 15.0
MEDIAN_RATE = 32.0  # median runs on a copy decimated to this rate

MIN_PROMINENCE = 0.01  # microsiemens
MIN_HEIGHT = 0.01
MIN_SEPARATION = 1.0  # seconds between peaks
MAX_WIDTH = 6.0  # seconds at half prominence

KERNEL_RISE = 0.7  # seconds
KERNEL_DECAY = 2.0
SMNA_RATE = 32.0
SMNA_MAX_ITERS = 2000
SMNA_TOL = 1e-4  # stop when the residual stops improving relative to itself


def scr_kernel(fs: float, rise: float = KERNEL_RISE, decay: float = KERNEL_DECAY) -> np.ndarray:
    """Biexponential skin-conductance response, peak-normalized to 1."""
    t = np.arange(0.0, rise + 6.0 * decay, 1.0 / fs)
    h = np.exp(-t / decay) - np.exp(-t / rise)
    return h / h.max()


def _median_baseline(x: np.ndarray, fs: float) -> np.ndarray:
    stride = max(1, int(fs // MEDIAN_RATE))
    coarse = x[::stride]
    fs_coarse = fs / stride
    size = int(MEDIAN_SECONDS * fs_coarse) | 1
    smoothed = median_filter(coarse, size=size, mode="nearest")
    t_coarse = np.arange(len(coarse)) * stride
    return np.interp(np.arange(len(x)), t_coarse, smoothed)


def eda_components(x: np.ndarray, fs: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (smoothed, tonic, phasic)."""
    x = np.asarray(x, dtype=float)
    sm = lowpass_trend(x, fs, SMOOTH_CUTOFF, kind="butter")
    baseline = _median_baseline(sm, fs)
    tonic = lowpass_trend(baseline, fs, TONIC_CUTOFF, kind="bessel")
    return sm, tonic, x - tonic


def eda_peaks(x: np.ndarray, fs: float) -> tuple[np.ndarray, np.ndarray]:
    """Detect SCR peaks; returns (sample_indices, amplitudes).

    Amplitude is the peak's prominence on the detrended signal, which is
    the conventional trough-to-peak response size.
    """
    sm, tonic, _ = eda_components(x, fs)
    driver = sm - tonic
    indices, props = find_peaks(
        driver,
        prominence=MIN_PROMINENCE,
        height=MIN_HEIGHT,
        distance=max(1, int(MIN_SEPARATION * fs)),
        width=(None, int(MAX_WIDTH * fs)),
        rel_height=0.5,
    )
    return indices, props["prominences"]


def _resample_to(x: np.ndarray, fs: float, target: float) -> tuple[np.ndarray, float]:
    if fs == target:
        return x, fs
    from fractions import Fraction

    ratio = Fraction(target / fs).limit_denominator(1000)
    return resample_poly(x, ratio.numerator, ratio.denominator), fs * ratio.numerator / ratio.denominator


def smna_driver(x: np.ndarray, fs: float) -> tuple[np.ndarray, float]:
    """Non-negative sudomotor driver via FISTA deconvolution.

    Works on the phasic component, decimated to 32 Hz. Returns the driver
    and its sample rate. The driver is one value per sample: amplitude of
    nerve activity at that instant, with SCRs appearing as short bursts
    near their onsets.
    """
    _, _, phasic = eda_components(x, fs)
    p, fs_d = _resample_to(phasic, fs, SMNA_RATE)
    h = scr_kernel(fs_d)
    n = len(p)
    if n < len(h):
        return np.zeros(n), fs_d

    nfft = 1
    while nfft < n + len(h):
        nfft *= 2
    H = np.fft.rfft(h, nfft)
    lipschitz = float(np.max(np.abs(H)) ** 2)

    def forward(d):
        return fftconvolve(d, h)[:n]

    def adjoint(r):
        return fftconvolve(r, h[::-1])[len(h) - 1 : len(h) - 1 + n]

    d = np.zeros(n)
    z = d
    t_acc = 1.0
    prev_residual = np.inf
    for i in range(SMNA_MAX_ITERS):
        r = forward(z) - p
        d_next = np.maximum(z - adjoint(r) / lipschitz, 0.0)
        t_next = (1.0 + np.sqrt(1.0 + 4.0 * t_acc * t_acc)) / 2.0
        z = d_next + ((t_acc - 1.0) / t_next) * (d_next - d)
        d, t_acc = d_next, t_next
        if i % 10 == 9:
            residual = float(np.linalg.norm(forward(d) - p))
            if prev_residual < np.inf and abs(prev_residual - residual) <= SMNA_TOL * max(
                prev_residual, 1e-12
            ):
                break
            prev_residual = residual
    return d, fs_d
