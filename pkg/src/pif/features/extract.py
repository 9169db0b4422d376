"""Feature tables: labeled rows of extracted features, and their CSV form.

The on-disk layout is one row per analysis window: the registry features
in registry order, then subject, label, t_start, t_end. Missing values
are empty cells. This is the interchange format between a live or
replayed session and the training pipeline.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .registry import FEATURE_NAMES, FeatureVector

META_COLUMNS = ("subject", "label", "t_start", "t_end")


@dataclass(frozen=True)
class FeatureRow:
    features: FeatureVector
    subject: str
    label: str
    t_start: float = 0.0
    t_end: float = 0.0


@dataclass(frozen=True)
class FeatureTable:
    names: tuple[str, ...]
    matrix: np.ndarray  # (n_rows, n_features), NaN for missing
    subjects: tuple[str, ...]
    labels: tuple[str, ...]
    spans: tuple[tuple[float, float], ...]

    def __len__(self) -> int:
        return len(self.matrix)

    @classmethod
    def from_rows(cls, rows: list[FeatureRow]) -> "FeatureTable":
        matrix = np.array([r.features.as_array(FEATURE_NAMES) for r in rows], dtype=float)
        if len(rows) == 0:
            matrix = np.empty((0, len(FEATURE_NAMES)))
        return cls(
            names=FEATURE_NAMES,
            matrix=matrix,
            subjects=tuple(r.subject for r in rows),
            labels=tuple(r.label for r in rows),
            spans=tuple((r.t_start, r.t_end) for r in rows),
        )


def _cell(value: float) -> str:
    return "" if np.isnan(value) else repr(float(value))


def write_feature_csv(path, rows: list[FeatureRow]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(FEATURE_NAMES) + list(META_COLUMNS))
        for row in rows:
            cells = [_cell(row.features.values[name]) for name in FEATURE_NAMES]
            writer.writerow(cells + [row.subject, row.label, repr(row.t_start), repr(row.t_end)])


def read_feature_csv(path) -> FeatureTable:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        expected = list(FEATURE_NAMES) + list(META_COLUMNS)
        if header != expected:
            raise ValueError(f"{path}: unexpected feature CSV header")
        matrix_rows, subjects, labels, spans = [], [], [], []
        for record in reader:
            feats = [float(c) if c else float("nan") for c in record[: len(FEATURE_NAMES)]]
            subject, label, t_start, t_end = record[len(FEATURE_NAMES) :]
            matrix_rows.append(feats)
            subjects.append(subject)
            labels.append(label)
            spans.append((float(t_start), float(t_end)))
    matrix = np.array(matrix_rows, dtype=float) if matrix_rows else np.empty((0, len(FEATURE_NAMES)))
    return FeatureTable(FEATURE_NAMES, matrix, tuple(subjects), tuple(labels), tuple(spans))
