"""Cohort assembly: many simulated subjects, one labeled feature table.

The round trip is honest: every observation goes through signal
synthesis and the real feature extractors before it reaches the
classifier. Nothing is written straight into the feature matrix.
"""

from __future__ import annotations

import numpy as np

from ..classify import Dataset
from ..features.extract import FeatureRow, FeatureTable
from ..features.registry import extract_features
from .generate import generate
from .profiles import SubjectProfile
from .scenario import Scenario, SimError, story_pair


def class_labels(scenario: Scenario, construct: str) -> tuple[str, str]:
    """The two segment labels at the extremes of one construct axis."""
    by_label: dict[str, list[float]] = {}
    for segment in scenario.segments:
        if segment.label:
            by_label.setdefault(segment.label, []).append(segment.level(construct))
    if len(by_label) < 2:
        raise SimError("scenario needs at least two labeled segments")
    means = {label: sum(v) / len(v) for label, v in by_label.items()}
    low = min(means, key=lambda k: (means[k], k))
    high = max(means, key=lambda k: (means[k], k))
    if means[low] == means[high]:
        raise SimError(f"scenario has no {construct} contrast between labels")
    return high, low


def make_cohort(
    n_subjects: int = 14,
    scenario: Scenario | None = None,
    separability: float = 1.0,
    construct: str = "arousal",
    seed: int = 0,
    baseline_scale: float = 1.0,
) -> Dataset:
    """Simulate a cohort and return its feature table as a labeled dataset.

    ``separability`` scales the class contrast: 1.0 keeps the scenario's
    declared levels, 0.0 collapses them to the midpoint so the labels
    carry no signal. Subject baselines are randomized either way, and
    ``baseline_scale`` shifts them further for robustness checks.
    """
    if n_subjects < 3:
        raise SimError("a cohort needs at least 3 subjects")
    scenario = scenario if scenario is not None else story_pair(construct)
    high, low = class_labels(scenario, construct)
    played = scenario.spread(separability)

    seeds = np.random.SeedSequence(seed).generate_state(n_subjects)
    rows: list[FeatureRow] = []
    starts = played.start_times()
    for k in range(n_subjects):
        profile = SubjectProfile.draw(f"s{k + 1:02d}", int(seeds[k]))
        if baseline_scale != 1.0:
            profile = profile.with_baseline_scale(baseline_scale)
        recording = generate(profile, played)
        for i, segment in enumerate(played.segments):
            if segment.label not in (high, low):
                continue
            rows.append(
                FeatureRow(
                    features=extract_features(recording.window(i)),
                    subject=profile.subject,
                    label=segment.label,
                    t_start=starts[i],
                    t_end=starts[i] + segment.duration,
                )
            )
    table = FeatureTable.from_rows(rows)
    return Dataset(
        names=table.names,
        matrix=table.matrix,
        subjects=table.subjects,
        labels=table.labels,
        construct=construct,
    )
