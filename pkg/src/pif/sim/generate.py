"""Recording synthesis: profile + scenario in, four streams + markers out.

Draw order is fixed (breath, eda, gaze, head, in segment order within
each) so a profile seed pins every byte of the output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..features.windows import (
    BREATH_CHANNELS,
    EDA_CHANNELS,
    GAZE_CHANNELS,
    HEAD_CHANNELS,
    PhysioWindow,
    SeriesBlock,
)
from ..transport import MARKER, SIGNAL, Hub, Recorder, RecordingSummary, StreamInfo
from . import signals
from .profiles import SubjectProfile
from .scenario import Scenario

MARKER_STREAM = "pif-markers"

_CHANNELS = {
    "breath": BREATH_CHANNELS,
    "eda": EDA_CHANNELS,
    "gaze": GAZE_CHANNELS,
    "head": HEAD_CHANNELS,
}
_RATES = {
    "breath": signals.BREATH_FS,
    "eda": signals.EDA_FS,
    "gaze": signals.GAZE_FS,
    "head": signals.HEAD_FS,
}
_STREAM_ORDER = ("breath", "eda", "gaze", "head")

BREATH_REF = 13.0  # bpm pivot when a profile supplies no baseline


@dataclass
class SimRecording:
    profile: SubjectProfile
    scenario: Scenario
    blocks: dict[str, SeriesBlock]
    markers: list[tuple[float, str]]

    def window(self, index: int) -> PhysioWindow:
        """The feature-extraction window covering one scenario segment."""
        segment = self.scenario.segments[index]
        t0 = self.scenario.start_times()[index]
        sliced = {}
        for name, block in self.blocks.items():
            start = int(round(t0 * block.fs))
            count = int(round(segment.duration * block.fs))
            sliced[name] = SeriesBlock(block.fs, block.data[start : start + count], t0=t0)
        return PhysioWindow(duration=segment.duration, **sliced)

    def write(self, path) -> RecordingSummary:
        """Persist as a standard recording; same blocks give same bytes."""
        hub = Hub()
        outlets = {}
        for name in _STREAM_ORDER:
            block = self.blocks[name]
            info = StreamInfo(
                name=name,
                kind=SIGNAL,
                channel_count=block.data.shape[1],
                nominal_rate=block.fs,
                channel_labels=tuple(_CHANNELS[name]),
                source_id=f"sim-{name}",
            )
            outlets[name] = hub.open_outlet(info)
        marker_info = StreamInfo(name=MARKER_STREAM, kind=MARKER, source_id="sim-markers")
        outlets[MARKER_STREAM] = hub.open_outlet(marker_info)

        recorder = Recorder(
            hub, path, source_ids=[f"sim-{n}" for n in _STREAM_ORDER] + ["sim-markers"]
        )
        queue: list[tuple[float, int, int, str, object]] = []
        for order, name in enumerate(_STREAM_ORDER):
            block = self.blocks[name]
            for j in range(len(block)):
                t = block.t0 + j / block.fs
                queue.append((t, order, j, name, block.data[j]))
        for j, (t, label) in enumerate(self.markers):
            queue.append((t, len(_STREAM_ORDER), j, MARKER_STREAM, label))
        queue.sort(key=lambda item: (item[0], item[1], item[2]))
        try:
            for t, _, _, name, payload in queue:
                if name == MARKER_STREAM:
                    outlets[name].push_marker(str(payload), timestamp=t)
                else:
                    outlets[name].push_values(payload, timestamp=t)
                recorder.poll(timeout=0.0)
        finally:
            for outlet in outlets.values():
                outlet.close()
            recorder.drain()
        return recorder.close()


def _per_sample(levels: list[float], durations: list[float], fs: float) -> np.ndarray:
    """Step function over the timeline, one value per sample."""
    edges = np.round(np.cumsum([0.0] + list(durations)) * fs).astype(int)
    out = np.empty(edges[-1])
    for level, a, b in zip(levels, edges[:-1], edges[1:]):
        out[a:b] = level
    return out


def truth_markers(scenario: Scenario) -> list[tuple[float, str]]:
    """Ground-truth annotations: segment labels, construct levels, tags."""
    markers: list[tuple[float, str]] = []
    starts = scenario.start_times()
    for segment, t0 in zip(scenario.segments, starts):
        if segment.label:
            markers.append((t0, f"SEGMENT:{segment.label}"))
        markers.append(
            (
                t0,
                "TRUTH:arousal={:.3f};valence={:.3f};difficulty={:.3f}".format(
                    segment.arousal, segment.valence, segment.difficulty
                ),
            )
        )
        for tag in segment.tags:
            markers.append((t0, f"TAG_START:{tag}"))
        t1 = t0 + segment.duration
        for tag in reversed(segment.tags):
            markers.append((t1, f"TAG_STOP:{tag}"))
    return markers


def generate(profile: SubjectProfile, scenario: Scenario) -> SimRecording:
    """Synthesize one subject's recording of one scenario."""
    rng = np.random.default_rng(profile.seed)
    durations = [s.duration for s in scenario.segments]
    total = scenario.duration

    # breathing: rate steps with effective valence, then FM synthesis
    bpm_levels = [
        profile.breath_bpm
        + signals.BREATH_SPAN_BPM * (profile.effective("valence", s.valence) - 0.5)
        for s in scenario.segments
    ]
    n_breath = int(round(total * signals.BREATH_FS))
    bpm = _per_sample(bpm_levels, durations, signals.BREATH_FS)[:n_breath]
    breath = signals.breathing_signal(bpm, signals.BREATH_FS, rng, profile.noise)

    # eda: per-segment clamped-Poisson event trains
    n_eda = int(round(total * signals.EDA_FS))
    onsets: list[float] = []
    amps: list[float] = []
    t0 = 0.0
    for segment in scenario.segments:
        arousal = profile.effective("arousal", segment.arousal)
        lam = signals.scr_lambda(arousal, segment.duration)
        count = signals.scr_count(lam, rng)
        local = signals.scr_onsets(count, segment.duration, rng)
        onsets.extend(t0 + local)
        amps.extend(profile.scr_amp * rng.uniform(0.7, 1.3, len(local)))
        t0 += segment.duration
    eda = signals.eda_signal(
        n_eda,
        signals.EDA_FS,
        np.asarray(onsets),
        np.asarray(amps),
        profile.eda_level,
        rng,
        profile.noise,
    )

    # gaze: renewal process steered by difficulty (fixations, wandering)
    # and arousal (pupil)
    n_gaze = int(round(total * signals.GAZE_FS))
    seg_starts = np.round(
        np.cumsum([0.0] + durations[:-1]) * signals.GAZE_FS
    ).astype(int)
    fixation_means = np.array(
        [
            min(
                profile.fixation_s
                + signals.FIXATION_SPAN_S * profile.effective("difficulty", s.difficulty),
                0.8,
            )
            for s in scenario.segments
        ]
    )
    wander_rates = np.array(
        [
            (0.5 + 2.5 * profile.effective("difficulty", s.difficulty)) / 60.0
            for s in scenario.segments
        ]
    )
    pupil_levels = np.array(
        [
            profile.pupil_mm
            + signals.PUPIL_SPAN_MM * (profile.effective("arousal", s.arousal) - 0.5)
            for s in scenario.segments
        ]
    )
    gaze = signals.gaze_signal(
        n_gaze,
        signals.GAZE_FS,
        seg_starts,
        fixation_means,
        wander_rates,
        pupil_levels,
        rng,
        profile.noise,
    )

    # head: construct-neutral wander
    n_head = int(round(total * signals.HEAD_FS))
    head = signals.head_signal(n_head, signals.HEAD_FS, rng, profile.head_speed)

    blocks = {
        "breath": SeriesBlock(signals.BREATH_FS, breath),
        "eda": SeriesBlock(signals.EDA_FS, eda),
        "gaze": SeriesBlock(signals.GAZE_FS, gaze),
        "head": SeriesBlock(signals.HEAD_FS, head),
    }
    return SimRecording(
        profile=profile,
        scenario=scenario,
        blocks=blocks,
        markers=truth_markers(scenario),
    )
