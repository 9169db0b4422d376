"""The feature registry: every reading-behavior feature by name.

Each feature maps a PhysioWindow to one float. A feature whose modality
was not recorded, or that has nothing to average (say, mean blink
duration in a window with no blinks), comes out as NaN; downstream
imputation decides what to do about it. Counts over a present modality
are honest zeros.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import breathing as _breathing
from . import eda as _eda
from . import gaze as _gaze
from . import head as _head
from .windows import PhysioWindow

FEATURE_NAMES = (
    "n_blinks",
    "mean_blink_dur",
    "mind_wandering_total",
    "n_fixations",
    "mean_fixation_dur",
    "n_saccades",
    "mean_saccade_len",
    "mean_saccade_angle",
    "n_split_saccades",
    "mean_split_saccade_len",
    "pupil_mean",
    "pupil_sd",
    "head_travel",
    "head_mean_speed",
    "eda_n_peaks",
    "eda_mean_peak_amp",
    "eda_mean_smna",
    "breath_rate",
    "breath_rmssd",
    "breath_rate_int",
    "breath_rmssd_int",
    "reading_duration",
)

NAN = float("nan")


@dataclass(frozen=True)
class FeatureVector:
    values: dict[str, float] = field(default_factory=dict)

    def __getitem__(self, name: str) -> float:
        return self.values[name]

    def is_missing(self, name: str) -> bool:
        return np.isnan(self.values[name])

    @property
    def missing(self) -> tuple[str, ...]:
        return tuple(n for n in self.values if np.isnan(self.values[n]))

    def as_array(self, names=FEATURE_NAMES) -> np.ndarray:
        return np.array([self.values[n] for n in names], dtype=float)


def _mean_or_nan(values) -> float:
    return float(np.mean(values)) if len(values) else NAN


def _gaze_features(window: PhysioWindow) -> dict[str, float]:
    block = window.gaze
    if block is None or len(block) == 0:
        return {name: NAN for name in FEATURE_NAMES[:12]}
    x, y, pupil = block.column(0), block.column(1), block.column(2)
    valid = block.column(3) > 0.5
    gaps = _gaze.classify_gaps(valid, block.fs)
    fixations = _gaze.detect_fixations(x, y, valid, block.fs)
    saccades = _gaze.detect_saccades(fixations, block.fs)
    segments = _gaze.split_segments(saccades)
    pupil_mean, pupil_sd = _gaze.pupil_stats(pupil, valid)
    return {
        "n_blinks": float(gaps.n_blinks),
        "mean_blink_dur": gaps.mean_blink_dur,
        "mind_wandering_total": gaps.mind_wandering_total,
        "n_fixations": float(len(fixations)),
        "mean_fixation_dur": _mean_or_nan([f.duration(block.fs) for f in fixations]),
        "n_saccades": float(len(saccades)),
        "mean_saccade_len": _mean_or_nan([s.length for s in saccades]),
        "mean_saccade_angle": _mean_or_nan([s.angle for s in saccades]),
        "n_split_saccades": float(len(segments)),
        "mean_split_saccade_len": _mean_or_nan(segments),
        "pupil_mean": pupil_mean,
        "pupil_sd": pupil_sd,
    }


def _head_features(window: PhysioWindow) -> dict[str, float]:
    block = window.head
    if block is None or len(block) < 2:
        return {"head_travel": NAN, "head_mean_speed": NAN}
    return {
        "head_travel": _head.head_travel(block.data),
        "head_mean_speed": _head.head_mean_speed(block.data, block.fs),
    }


def _eda_features(window: PhysioWindow) -> dict[str, float]:
    block = window.eda
    if block is None or len(block) == 0:
        return {"eda_n_peaks": NAN, "eda_mean_peak_amp": NAN, "eda_mean_smna": NAN}
    signal = block.column(0)
    _, amps = _eda.eda_peaks(signal, block.fs)
    driver, _ = _eda.smna_driver(signal, block.fs)
    return {
        "eda_n_peaks": float(len(amps)),
        "eda_mean_peak_amp": _mean_or_nan(amps),
        "eda_mean_smna": float(np.mean(driver)) if len(driver) else NAN,
    }


def _breath_features(window: PhysioWindow) -> dict[str, float]:
    block = window.breath
    if block is None or len(block) == 0:
        return {n: NAN for n in ("breath_rate", "breath_rmssd", "breath_rate_int", "breath_rmssd_int")}
    signal = block.column(0)
    rate, rmssd = _breathing.rate_and_rmssd(signal, block.fs)
    rate_int, rmssd_int = _breathing.rate_and_rmssd_integrated(signal, block.fs)
    return {
        "breath_rate": rate,
        "breath_rmssd": rmssd,
        "breath_rate_int": rate_int,
        "breath_rmssd_int": rmssd_int,
    }


def extract_features(window: PhysioWindow) -> FeatureVector:
    values: dict[str, float] = {}
    values.update(_gaze_features(window))
    values.update(_head_features(window))
    values.update(_eda_features(window))
    values.update(_breath_features(window))
    values["reading_duration"] = float(window.duration)
    return FeatureVector({name: values[name] for name in FEATURE_NAMES})
