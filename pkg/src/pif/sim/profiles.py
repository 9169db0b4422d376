"""Subject profiles: per-person baselines, noise, and response gains.

Baselines are drawn wide on purpose. Absolute levels carry no class
information, so any pipeline that survives this cohort has to rely on
within-subject structure rather than raw magnitudes.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .scenario import CONSTRUCTS, SimError


def _clip(value: float, lo: float, hi: float) -> float:
    return float(min(max(value, lo), hi))


@dataclass(frozen=True)
class SubjectProfile:
    subject: str
    seed: int
    eda_level: float = 2.0       # tonic level, microsiemens
    scr_amp: float = 0.4         # typical response amplitude, microsiemens
    breath_bpm: float = 13.0     # resting breathing rate
    pupil_mm: float = 3.0        # resting pupil diameter
    fixation_s: float = 0.18     # mean fixation length at zero difficulty
    head_speed: float = 0.005    # wander scale, rad per sqrt(s)
    noise: float = 1.0           # multiplier on every additive noise term
    gains: dict[str, float] | None = None

    def __post_init__(self):
        if self.noise < 0:
            raise SimError("noise scale must be nonnegative")
        gains = dict(self.gains) if self.gains else {c: 1.0 for c in CONSTRUCTS}
        for construct in CONSTRUCTS:
            gains.setdefault(construct, 1.0)
            if gains[construct] < 0:
                raise SimError(f"{construct} gain must be nonnegative")
        object.__setattr__(self, "gains", gains)

    @classmethod
    def draw(cls, subject: str, seed: int) -> SubjectProfile:
        """A random but plausible subject, fully determined by the seed."""
        rng = np.random.default_rng(seed)
        return cls(
            subject=subject,
            seed=seed,
            eda_level=float(rng.uniform(1.0, 4.0)),
            scr_amp=float(rng.uniform(0.25, 0.55)),
            breath_bpm=float(rng.uniform(11.0, 15.0)),
            pupil_mm=float(rng.uniform(2.6, 3.4)),
            fixation_s=float(rng.uniform(0.15, 0.21)),
            head_speed=float(rng.uniform(0.001, 0.004)),
            noise=float(rng.uniform(0.8, 1.2)),
            gains={c: float(rng.uniform(0.7, 1.3)) for c in CONSTRUCTS},
        )

    def effective(self, construct: str, level: float) -> float:
        """The subject's response to a ground-truth level: gain applied to
        the deviation from midpoint, clipped back into [0, 1]."""
        return _clip(0.5 + self.gains[construct] * (level - 0.5), 0.0, 1.0)

    def with_baseline_scale(self, factor: float) -> SubjectProfile:
        """Shift every baseline by a common factor, clamped to ranges the
        extractors can still track (a breathing rate outside the breathing
        band is a broken sensor, not a shifted baseline)."""
        if factor <= 0:
            raise SimError("baseline scale must be positive")
        return replace(
            self,
            eda_level=_clip(self.eda_level * factor, 0.3, 8.0),
            scr_amp=_clip(self.scr_amp * factor, 0.15, 1.2),
            breath_bpm=_clip(self.breath_bpm * factor, 10.0, 16.0),
            pupil_mm=_clip(self.pupil_mm * factor, 1.5, 6.0),
            fixation_s=_clip(self.fixation_s * factor, 0.13, 0.35),
            head_speed=_clip(self.head_speed * factor, 0.001, 0.02),
        )
