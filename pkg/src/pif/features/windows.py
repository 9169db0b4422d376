"""Fixed-rate signal blocks and the per-passage analysis window.

A PhysioWindow is everything recorded while one stretch of story was on
screen: whichever modality blocks exist, plus the wall duration of the
stretch. Channel layouts are pinned here so producers (simulator, live
devices) and consumers (feature functions, director) agree by name.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GAZE_CHANNELS = ("x", "y", "pupil", "valid")
HEAD_CHANNELS = ("qw", "qx", "qy", "qz")
EDA_CHANNELS = ("eda",)
BREATH_CHANNELS = ("breath",)

STREAM_CHANNELS = {
    "gaze": GAZE_CHANNELS,
    "head": HEAD_CHANNELS,
    "eda": EDA_CHANNELS,
    "breath": BREATH_CHANNELS,
}


@dataclass(frozen=True)
class SeriesBlock:
    """A contiguous fixed-rate recording of one stream."""

    fs: float
    data: np.ndarray  # (n, channels)
    t0: float = 0.0

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim == 1:
            data = data[:, None]
        object.__setattr__(self, "data", data)

    def __len__(self) -> int:
        return len(self.data)

    @property
    def duration(self) -> float:
        return 0.0 if len(self.data) < 2 else (len(self.data) - 1) / self.fs

    def column(self, index: int) -> np.ndarray:
        return self.data[:, index]


@dataclass(frozen=True)
class PhysioWindow:
    duration: float  # seconds the passage was on screen
    gaze: SeriesBlock | None = None
    head: SeriesBlock | None = None
    eda: SeriesBlock | None = None
    breath: SeriesBlock | None = None
