"""Signal models behind the simulator.

Four generators, one per stream kind, each the simplest construction
whose extracted features are analytically steerable:

  breathing  frequency-modulated sinusoid plus pink noise
  eda        tonic random walk plus a rate-steered event train convolved
             with the same response kernel the extractor deconvolves
  gaze       fixation/saccade renewal process with off-screen gaps
  head       small-angle random rotations

Everything draws from a caller-provided Generator, so the caller owns
determinism.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.ndimage import uniform_filter1d
from scipy.spatial.transform import Rotation

from ..features.eda import scr_kernel

EDA_FS = 32.0
BREATH_FS = 32.0
GAZE_FS = 100.0
HEAD_FS = 50.0

# expected response events per 70 s at arousal 0 and 1; the Poisson draw
# is clamped to lambda +/- 2 so extreme levels can never overlap
SCR_RATE_FLOOR = 1.0
SCR_RATE_SPAN = 7.0
SCR_WINDOW = 70.0
SCR_COUNT_SLACK = 2.0

BREATH_SPAN_BPM = 6.0         # full valence swing, bottom to top
PUPIL_SPAN_MM = 0.8           # full arousal swing
FIXATION_SPAN_S = 0.22        # full difficulty swing


def pink_noise(n: int, rng: np.random.Generator) -> np.ndarray:
    """Unit-variance 1/f noise via spectral shaping."""
    if n < 2:
        return np.zeros(n)
    spectrum = np.fft.rfft(rng.standard_normal(n))
    f = np.fft.rfftfreq(n)
    f[0] = f[1]
    spectrum /= np.sqrt(f)
    out = np.fft.irfft(spectrum, n)
    sd = out.std()
    return out / sd if sd > 0 else out


def breathing_signal(
    rate_bpm: np.ndarray, fs: float, rng: np.random.Generator, noise: float = 1.0
) -> np.ndarray:
    """Sinusoid whose instantaneous rate follows ``rate_bpm`` (one value
    per sample) with a slow physiological wobble on top."""
    n = len(rate_bpm)
    t = np.arange(n) / fs
    wobble = 0.2 * np.sin(2 * math.pi * 0.013 * t + rng.uniform(0, 2 * math.pi))
    freq = (np.asarray(rate_bpm, dtype=float) + wobble) / 60.0
    phase = 2 * math.pi * np.cumsum(freq) / fs
    return np.sin(phase) + 0.15 * noise * pink_noise(n, rng)


def scr_count(lam: float, rng: np.random.Generator) -> int:
    """Poisson draw clamped to lambda +/- SCR_COUNT_SLACK.

    The clamp keeps dispersion bounded so the extreme arousal levels stay
    separated by construction; expectation remains monotone in lambda.
    """
    lo = max(0, math.ceil(lam - SCR_COUNT_SLACK))
    hi = max(lo, math.floor(lam + SCR_COUNT_SLACK))
    return int(min(max(rng.poisson(lam), lo), hi))


def scr_lambda(arousal: float, duration: float) -> float:
    return (SCR_RATE_FLOOR + SCR_RATE_SPAN * arousal) * duration / SCR_WINDOW


def scr_onsets(
    count: int,
    duration: float,
    rng: np.random.Generator,
    margin: float = 2.0,
    tail: float = 8.0,
    min_gap: float = 2.5,
) -> np.ndarray:
    """Event times within one segment: a Poisson train conditioned on its
    count, thinned to a refractory gap, kept clear of the edges so the
    responses land inside their own window."""
    if count <= 0:
        return np.empty(0)
    span = duration - margin - tail
    if span <= 0:
        return np.empty(0)
    for _ in range(200):
        onsets = np.sort(rng.uniform(0.0, span, count))
        if count == 1 or np.all(np.diff(onsets) >= min_gap):
            return margin + onsets
    # dense trains fall back to even spacing with a little jitter
    base = np.linspace(0.0, span, count, endpoint=False)
    jitter = rng.uniform(0.0, max(span / count - min_gap, 0.0), count)
    return margin + base + jitter


def eda_signal(
    n: int,
    fs: float,
    onsets: np.ndarray,
    amplitudes: np.ndarray,
    level: float,
    rng: np.random.Generator,
    noise: float = 1.0,
) -> np.ndarray:
    """Tonic random walk plus the event train convolved with the response
    kernel the extractor is built around."""
    # a 10 s boxcar keeps the walk strictly tonic: its residual above the
    # tonic band would otherwise masquerade as tiny responses
    walk = np.cumsum(rng.normal(0.0, 0.003 / math.sqrt(fs), n))
    walk = uniform_filter1d(walk, size=max(int(10 * fs), 1), mode="nearest")
    texture = 0.004 * noise * (pink_noise(n, rng) + rng.standard_normal(n))
    x = level + walk + texture
    kernel = scr_kernel(fs)
    for onset, amp in zip(onsets, amplitudes):
        start = int(round(onset * fs))
        if start >= n:
            continue
        stop = min(n, start + len(kernel))
        x[start:stop] += amp * kernel[: stop - start]
    return x


def head_signal(
    n: int, fs: float, rng: np.random.Generator, speed: float = 0.005
) -> np.ndarray:
    """Orientation quaternions (w, x, y, z) from integrated small random
    rotation steps."""
    steps = rng.normal(0.0, speed / math.sqrt(fs), (n, 3))
    angles = np.cumsum(steps, axis=0)
    quats = Rotation.from_euler("xyz", angles).as_quat()  # (x, y, z, w)
    return quats[:, [3, 0, 1, 2]]


class _GazeCursor:
    """Reading-scan position: left to right, wrap to the next line."""

    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self.x = float(rng.uniform(0.08, 0.16))
        self.y = float(rng.uniform(0.1, 0.2))

    def advance(self) -> tuple[float, float]:
        self.x += float(self.rng.uniform(0.07, 0.15))
        if self.x > 0.88:
            self.x = float(self.rng.uniform(0.08, 0.16))
            self.y += 0.08
            if self.y > 0.85:
                self.y = float(self.rng.uniform(0.1, 0.2))
        return self.x, self.y


def gaze_signal(
    n: int,
    fs: float,
    segment_starts: np.ndarray,
    fixation_means: np.ndarray,
    wander_rates: np.ndarray,
    pupil_levels: np.ndarray,
    rng: np.random.Generator,
    noise: float = 1.0,
) -> np.ndarray:
    """Four-channel gaze block (x, y, pupil, valid) from a renewal process.

    ``segment_starts`` gives each segment's first sample index; the three
    per-segment parameter arrays steer fixation length, off-screen
    wandering rate, and pupil level. Blinks run at a constant background
    rate; wandering gaps are long enough to be classified as such.
    """
    out = np.zeros((n, 4))
    slow = 0.05 * noise * pink_noise(n, rng)
    cursor = _GazeCursor(rng)
    seg = 0
    i = 0
    while i < n:
        while seg + 1 < len(segment_starts) and i >= segment_starts[seg + 1]:
            seg += 1
        mean_fix = fixation_means[seg]
        fix_dur = float(
            np.clip(rng.normal(mean_fix, 0.25 * mean_fix), 0.11, 3.0 * mean_fix)
        )
        n_fix = max(int(round(fix_dur * fs)), int(0.11 * fs))
        stop = min(n, i + n_fix)
        out[i:stop, 0] = cursor.x + rng.normal(0.0, 0.002, stop - i)
        out[i:stop, 1] = cursor.y + rng.normal(0.0, 0.002, stop - i)
        out[i:stop, 2] = pupil_levels[seg] + slow[i:stop] + rng.normal(0.0, 0.01, stop - i)
        out[i:stop, 3] = 1.0
        i = stop
        if i >= n:
            break
        # between fixations: a blink, a wander, or a plain saccade
        u = rng.random()
        if u < fix_dur / 4.0:
            gap = float(rng.uniform(0.10, 0.30))
            i += int(round(gap * fs))
        elif u < fix_dur / 4.0 + fix_dur * wander_rates[seg]:
            gap = float(rng.uniform(0.60, 0.95))
            i += int(round(gap * fs))
        else:
            x0, y0 = cursor.x, cursor.y
            x1, y1 = cursor.advance()
            n_move = max(int(round(rng.uniform(0.020, 0.045) * fs)), 1)
            stop = min(n, i + n_move)
            frac = np.linspace(0.0, 1.0, stop - i, endpoint=False)
            out[i:stop, 0] = x0 + frac * (x1 - x0)
            out[i:stop, 1] = y0 + frac * (y1 - y0)
            out[i:stop, 2] = pupil_levels[seg] + slow[i:stop]
            out[i:stop, 3] = 1.0
            i = stop
            continue
        cursor.advance()
    return out
