"""Gaze analysis: blinks, mind-wandering gaps, fixations, saccades, pupil.

Coordinates are normalized screen units in [0, 1]; a sample is either
valid or not (eyes closed, tracking lost). Invalid runs are partitioned
by duration: under 50 ms is tracker noise and ignored, 50-500 ms
inclusive is a blink, longer means the reader looked away, which we bank
as mind-wandering time.

Fixations come from dispersion thresholding (I-DT): a run of at least
100 ms whose bounding box, measured as x-extent plus y-extent, stays
within 0.02. Saccades are the jumps between consecutive fixation
centroids. Long saccades get chopped into 350 ms segments; regressive
line-return sweeps show up as these multi-segment moves, and their count
and segment length are features in their own right.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BLINK_MIN = 0.050  # seconds, inclusive
BLINK_MAX = 0.500  # seconds, inclusive; beyond this is mind wandering

FIXATION_MIN_DUR = 0.100  # seconds
FIXATION_DISPERSION = 0.02  # normalized units, x extent + y extent

SACCADE_SEGMENT = 0.350  # seconds


@dataclass(frozen=True)
class GapStats:
    n_blinks: int
    mean_blink_dur: float  # nan when no blinks
    mind_wandering_total: float  # seconds


@dataclass(frozen=True)
class Fixation:
    start: int  # sample indices, [start, end)
    end: int
    cx: float
    cy: float

    def duration(self, fs: float) -> float:
        return (self.end - self.start) / fs


@dataclass(frozen=True)
class Saccade:
    length: float
    angle: float  # degrees from horizontal, [0, 90]
    duration: float


def classify_gaps(valid: np.ndarray, fs: float) -> GapStats:
    """Partition invalid runs into ignored flickers, blinks, wandering."""
    valid = np.asarray(valid, dtype=bool)
    blink_durs = []
    wandering = 0.0
    n = len(valid)
    i = 0
    while i < n:
        if valid[i]:
            i += 1
            continue
        j = i
        while j < n and not valid[j]:
            j += 1
        dur = (j - i) / fs
        if dur > BLINK_MAX:
            wandering += dur
        elif dur >= BLINK_MIN:
            blink_durs.append(dur)
        i = j
    mean_dur = float(np.mean(blink_durs)) if blink_durs else float("nan")
    return GapStats(len(blink_durs), mean_dur, wandering)


def _dispersion(x: np.ndarray, y: np.ndarray) -> float:
    return (x.max() - x.min()) + (y.max() - y.min())


def detect_fixations(
    x: np.ndarray, y: np.ndarray, valid: np.ndarray, fs: float
) -> list[Fixation]:
    """I-DT over each run of valid samples."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    valid = np.asarray(valid, dtype=bool)
    n_min = max(2, int(round(FIXATION_MIN_DUR * fs)))
    fixations = []
    run_start = None
    for i in range(len(valid) + 1):
        if i < len(valid) and valid[i]:
            if run_start is None:
                run_start = i
            continue
        if run_start is not None:
            fixations.extend(_idt(x, y, run_start, i, n_min))
            run_start = None
    return fixations


def _idt(x, y, lo, hi, n_min) -> list[Fixation]:
    out = []
    i = lo
    while i + n_min <= hi:
        j = i + n_min
        if _dispersion(x[i:j], y[i:j]) > FIXATION_DISPERSION:
            i += 1
            continue
        while j < hi and _dispersion(x[i : j + 1], y[i : j + 1]) <= FIXATION_DISPERSION:
            j += 1
        out.append(Fixation(i, j, float(np.mean(x[i:j])), float(np.mean(y[i:j]))))
        i = j
    return out


def detect_saccades(fixations: list[Fixation], fs: float) -> list[Saccade]:
    """Jumps between consecutive fixation centroids."""
    out = []
    for a, b in zip(fixations, fixations[1:]):
        dx = b.cx - a.cx
        dy = b.cy - a.cy
        length = float(np.hypot(dx, dy))
        angle = float(np.degrees(np.arctan2(abs(dy), abs(dx))))
        out.append(Saccade(length, angle, (b.start - a.end) / fs))
    return out


def split_segments(saccades: list[Saccade]) -> list[float]:
    """Segment lengths from saccades longer than one segment duration.

    A saccade of duration d > 350 ms becomes ceil(d / 350 ms) segments:
    full 350 ms pieces plus the remainder, each carrying a share of the
    path length proportional to its share of the duration.
    """
    lengths = []
    for s in saccades:
        if s.duration <= SACCADE_SEGMENT:
            continue
        n_full = int(s.duration / SACCADE_SEGMENT)
        remainder = s.duration - n_full * SACCADE_SEGMENT
        pieces = [SACCADE_SEGMENT] * n_full
        if remainder > 1e-12:
            pieces.append(remainder)
        lengths.extend(s.length * (p / s.duration) for p in pieces)
    return lengths


def pupil_stats(pupil: np.ndarray, valid: np.ndarray) -> tuple[float, float]:
    """(mean, population SD) over valid samples; nan when none are valid."""
    pupil = np.asarray(pupil, dtype=float)
    valid = np.asarray(valid, dtype=bool)
    good = pupil[valid]
    if len(good) == 0:
        return float("nan"), float("nan")
    return float(np.mean(good)), float(np.std(good, ddof=0))
