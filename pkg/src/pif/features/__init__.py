"""Reading-behavior features from raw physiological windows."""

from .extract import (
    META_COLUMNS,
    FeatureRow,
    FeatureTable,
    read_feature_csv,
    write_feature_csv,
)
from .recordings import (
    RecordedSignals,
    SegmentStream,
    SegmentWindow,
    feature_rows,
    load_signals,
    read_signals,
    segment_windows,
    slice_window,
)
from .registry import FEATURE_NAMES, FeatureVector, extract_features
from .windows import (
    BREATH_CHANNELS,
    EDA_CHANNELS,
    GAZE_CHANNELS,
    HEAD_CHANNELS,
    STREAM_CHANNELS,
    PhysioWindow,
    SeriesBlock,
)

__all__ = [
    "BREATH_CHANNELS",
    "EDA_CHANNELS",
    "FEATURE_NAMES",
    "FeatureRow",
    "FeatureTable",
    "FeatureVector",
    "GAZE_CHANNELS",
    "HEAD_CHANNELS",
    "META_COLUMNS",
    "PhysioWindow",
    "RecordedSignals",
    "STREAM_CHANNELS",
    "SegmentStream",
    "SegmentWindow",
    "SeriesBlock",
    "extract_features",
    "feature_rows",
    "load_signals",
    "read_feature_csv",
    "read_signals",
    "segment_windows",
    "slice_window",
    "write_feature_csv",
]
