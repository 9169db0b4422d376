"""Signal transport: streams, clock sync, recording, and the TCP bridge."""

from .clock import MIN_EXCHANGES, ClockOffset, estimate_offset
from .net import (
    DEFAULT_HOST,
    DEFAULT_PORT,
    NetInlet,
    NetOutlet,
    TransportServer,
    registry,
)
from .recording import (
    MAX_SPEED,
    REALTIME,
    CorruptRecording,
    Recorder,
    RecordingReader,
    RecordingSummary,
    record,
    replay,
)
from .streams import (
    DEFAULT_BUFFER,
    MARKER,
    SIGNAL,
    Hub,
    Inlet,
    InletStats,
    Outlet,
    Sample,
    StreamInfo,
    Tap,
    TransportError,
)

__all__ = [
    "ClockOffset",
    "CorruptRecording",
    "DEFAULT_BUFFER",
    "DEFAULT_HOST",
    "DEFAULT_PORT",
    "Hub",
    "Inlet",
    "InletStats",
    "MARKER",
    "MAX_SPEED",
    "MIN_EXCHANGES",
    "NetInlet",
    "NetOutlet",
    "Outlet",
    "REALTIME",
    "Recorder",
    "RecordingReader",
    "RecordingSummary",
    "SIGNAL",
    "Sample",
    "StreamInfo",
    "Tap",
    "TransportError",
    "TransportServer",
    "estimate_offset",
    "record",
    "registry",
    "replay",
]
