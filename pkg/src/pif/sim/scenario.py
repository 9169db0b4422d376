"""Scenario timelines: what the simulated reader goes through, and when.

A scenario is a contiguous sequence of segments, each holding ground-truth
construct levels in [0, 1] plus optional tag annotations. Segment labels
double as class labels when a cohort is built from the timeline.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

CONSTRUCTS = ("arousal", "valence", "difficulty")


class SimError(ValueError):
    pass


@dataclass(frozen=True)
class Segment:
    duration: float
    arousal: float = 0.5
    valence: float = 0.5
    difficulty: float = 0.5
    tags: tuple[str, ...] = ()
    label: str = ""

    def __post_init__(self):
        if not self.duration > 0:
            raise SimError(f"segment duration must be positive, got {self.duration}")
        for construct in CONSTRUCTS:
            level = getattr(self, construct)
            if not 0.0 <= level <= 1.0:
                raise SimError(f"{construct} level {level} outside [0, 1]")
        object.__setattr__(self, "tags", tuple(self.tags))

    def level(self, construct: str) -> float:
        if construct not in CONSTRUCTS:
            raise SimError(f"unknown construct {construct!r}; pick one of {CONSTRUCTS}")
        return getattr(self, construct)


@dataclass(frozen=True)
class Scenario:
    segments: tuple[Segment, ...]
    name: str = "scenario"

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        if not self.segments:
            raise SimError("a scenario needs at least one segment")

    @property
    def duration(self) -> float:
        return sum(s.duration for s in self.segments)

    def start_times(self) -> list[float]:
        starts, t = [], 0.0
        for segment in self.segments:
            starts.append(t)
            t += segment.duration
        return starts

    def labels(self) -> list[str]:
        seen: list[str] = []
        for segment in self.segments:
            if segment.label and segment.label not in seen:
                seen.append(segment.label)
        return seen

    def segment_at(self, elapsed: float) -> Segment:
        """The segment on screen ``elapsed`` seconds in; clamped at the ends."""
        t = 0.0
        for segment in self.segments:
            t += segment.duration
            if elapsed < t:
                return segment
        return self.segments[-1]

    def levels_at(self, elapsed: float) -> dict[str, float]:
        segment = self.segment_at(elapsed)
        return {c: segment.level(c) for c in CONSTRUCTS}

    def spread(self, separability: float) -> Scenario:
        """Pull construct levels toward 0.5 by ``separability``.

        1.0 keeps the declared contrast, 0.0 collapses every segment to
        indistinguishable midpoints (the null scenario).
        """
        if not 0.0 <= separability <= 1.0:
            raise SimError(f"separability {separability} outside [0, 1]")
        scaled = tuple(
            replace(
                segment,
                **{
                    c: 0.5 + separability * (segment.level(c) - 0.5)
                    for c in CONSTRUCTS
                },
            )
            for segment in self.segments
        )
        return Scenario(scaled, name=self.name)

    def windowed(self, pieces: int) -> Scenario:
        """Split every segment into equal-length windows sharing its label.

        Multiplies observations per reading, which matters for permutation
        checks: with a single window per class, shuffling labels within a
        subject can only keep or exactly invert the feature ordering, and
        leave-one-subject-out evaluation then anti-learns instead of
        landing at chance.
        """
        if pieces < 1:
            raise SimError("pieces must be at least 1")
        split = []
        for segment in self.segments:
            split.extend(
                replace(segment, duration=segment.duration / pieces)
                for _ in range(pieces)
            )
        return Scenario(tuple(split), name=self.name)

    # structured-text round trip

    def to_json(self) -> str:
        payload = {
            "name": self.name,
            "segments": [
                {
                    "duration": s.duration,
                    "arousal": s.arousal,
                    "valence": s.valence,
                    "difficulty": s.difficulty,
                    "tags": list(s.tags),
                    "label": s.label,
                }
                for s in self.segments
            ],
        }
        return json.dumps(payload, indent=1)

    @classmethod
    def from_json(cls, text: str) -> Scenario:
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SimError(f"scenario is not valid JSON: {exc}") from exc
        if not isinstance(payload, dict) or "segments" not in payload:
            raise SimError("scenario JSON needs a top-level 'segments' list")
        segments = []
        for i, raw in enumerate(payload["segments"]):
            try:
                segments.append(
                    Segment(
                        duration=float(raw["duration"]),
                        arousal=float(raw.get("arousal", 0.5)),
                        valence=float(raw.get("valence", 0.5)),
                        difficulty=float(raw.get("difficulty", 0.5)),
                        tags=tuple(raw.get("tags", ())),
                        label=str(raw.get("label", "")),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise SimError(f"segment {i}: {exc}") from exc
        return cls(tuple(segments), name=str(payload.get("name", "scenario")))

    @classmethod
    def load(cls, path) -> Scenario:
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())

    def dump(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json() + "\n")


# the three stimulus pairs: one construct pushed to its extremes per pair,
# everything else held at the midpoint
_PAIRS = {
    "arousal": (("dungeon", 0.85), ("meadow", 0.15)),
    "valence": (("reunion", 0.85), ("loss", 0.15)),
    "difficulty": (("treatise", 0.85), ("picnic", 0.15)),
}


def _pair_segments(construct: str, duration: float) -> list[Segment]:
    if construct not in _PAIRS:
        raise SimError(f"unknown construct {construct!r}; pick one of {CONSTRUCTS}")
    segments = []
    for label, level in _PAIRS[construct]:
        segments.append(
            Segment(
                duration=duration,
                label=label,
                tags=(label.upper(),),
                **{construct: level},
            )
        )
    return segments


def story_pair(construct: str, duration: float = 70.0) -> Scenario:
    """Two readings contrasting one construct, midpoint on the others."""
    return Scenario(tuple(_pair_segments(construct, duration)), name=f"{construct}-pair")


def reading_protocol(duration: float = 70.0) -> Scenario:
    """Six readings, three construct pairs: the full desk-study timeline."""
    segments: list[Segment] = []
    for construct in CONSTRUCTS:
        segments.extend(_pair_segments(construct, duration))
    return Scenario(tuple(segments), name="reading-protocol")
