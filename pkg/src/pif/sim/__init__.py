"""Synthetic physiology: steerable signals for desk-scale studies."""

from .cohort import class_labels, make_cohort
from .generate import MARKER_STREAM, SimRecording, generate, truth_markers
from .profiles import SubjectProfile
from .scenario import (
    CONSTRUCTS,
    Scenario,
    Segment,
    SimError,
    reading_protocol,
    story_pair,
)
from .signals import (
    BREATH_FS,
    EDA_FS,
    GAZE_FS,
    HEAD_FS,
    breathing_signal,
    eda_signal,
    gaze_signal,
    head_signal,
    pink_noise,
    scr_count,
    scr_lambda,
    scr_onsets,
)

__all__ = [
    "BREATH_FS",
    "CONSTRUCTS",
    "EDA_FS",
    "GAZE_FS",
    "HEAD_FS",
    "MARKER_STREAM",
    "Scenario",
    "Segment",
    "SimError",
    "SimRecording",
    "SubjectProfile",
    "breathing_signal",
    "class_labels",
    "eda_signal",
    "gaze_signal",
    "generate",
    "head_signal",
    "make_cohort",
    "pink_noise",
    "reading_protocol",
    "scr_count",
    "scr_lambda",
    "scr_onsets",
    "story_pair",
    "truth_markers",
]
