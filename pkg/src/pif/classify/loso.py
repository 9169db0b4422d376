"""Leave-one-subject-out evaluation and the feature-weight report.

Each fold drops one subject entirely: imputation medians, rank
references, PCA, and the discriminant are fitted only on the remaining
subjects, then the held-out subject's observations are ranked among
themselves and scored. The per-feature weight report averages the
back-projected discriminant over folds and scales the result so the
largest magnitude is 1; positive means "pushes toward the first class
in sorted order".
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .pipeline import Dataset, PipelineError, fit, predict_subject


@dataclass(frozen=True)
class FeatureWeightReport:
    names: tuple[str, ...]
    weights: np.ndarray  # normalized to [-1, 1], max |.| = 1 unless all zero
    positive_class: str
    negative_class: str

    def ordered(self) -> list[tuple[str, float]]:
        order = np.argsort(-np.abs(self.weights))
        return [(self.names[i], float(self.weights[i])) for i in order]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["feature", "weight", "favors"])
            for name, weight in self.ordered():
                favors = self.positive_class if weight >= 0 else self.negative_class
                writer.writerow([name, f"{weight:.6f}", favors])


@dataclass(frozen=True)
class SubjectResult:
    subject: str
    n_correct: int
    n_total: int
    predicted: tuple[str, ...]
    actual: tuple[str, ...]

    @property
    def accuracy(self) -> float:
        return self.n_correct / self.n_total if self.n_total else float("nan")


@dataclass(frozen=True)
class LosoResult:
    construct: str
    classes: tuple[str, str]
    accuracy: float
    per_subject: tuple[SubjectResult, ...]
    report: FeatureWeightReport

    def write_subject_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["subject", "n_correct", "n_total", "accuracy"])
            for r in self.per_subject:
                writer.writerow([r.subject, r.n_correct, r.n_total, f"{r.accuracy:.4f}"])
            writer.writerow(["overall", sum(r.n_correct for r in self.per_subject),
                             sum(r.n_total for r in self.per_subject), f"{self.accuracy:.4f}"])


def normalize_weights(weights: np.ndarray) -> np.ndarray:
    peak = float(np.max(np.abs(weights))) if len(weights) else 0.0
    return weights / peak if peak > 0.0 else np.zeros_like(weights)


def loso_cv(dataset: Dataset, keep_variance: float = 0.95) -> LosoResult:
    subjects = sorted(set(dataset.subjects))
    if len(subjects) < 3:
        raise PipelineError(f"leave-one-subject-out needs at least 3 subjects, got {len(subjects)}")
    fold_weights = []
    results = []
    n_correct_total = 0
    n_total = 0
    for subject in subjects:
        try:
            model = fit(dataset.without_subject(subject), keep_variance)
        except Exception as exc:
            raise PipelineError(f"fold {subject!r}: {exc}") from exc
        rows, actual = dataset.only_subject(subject)
        predictions = predict_subject(model, rows)
        predicted = tuple(p.label for p in predictions)
        n_correct = sum(p == a for p, a in zip(predicted, actual))
        results.append(SubjectResult(subject, n_correct, len(actual), predicted, actual))
        n_correct_total += n_correct
        n_total += len(actual)
        fold_weights.append(model.feature_weights())
    mean_weights = np.mean(fold_weights, axis=0)
    report = FeatureWeightReport(
        names=dataset.names,
        weights=normalize_weights(mean_weights),
        positive_class=dataset.classes[0],
        negative_class=dataset.classes[1],
    )
    return LosoResult(
        construct=dataset.construct,
        classes=dataset.classes,
        accuracy=n_correct_total / n_total,
        per_subject=tuple(results),
        report=report,
    )


def render_weight_figure(report: FeatureWeightReport, path) -> None:
    """Horizontal bar chart of normalized feature weights."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    pairs = report.ordered()[::-1]  # biggest at the top
    names = [p[0] for p in pairs]
    values = [p[1] for p in pairs]
    colors = ["#2a6f97" if v >= 0 else "#bc4749" for v in values]
    fig, ax = plt.subplots(figsize=(7.5, 0.32 * len(names) + 1.2))
    ax.barh(range(len(names)), values, color=colors)
    ax.set_yticks(range(len(names)))
    ax.set_yticklabels(names, fontsize=8)
    ax.set_xlim(-1.05, 1.05)
    ax.axvline(0.0, color="black", linewidth=0.8)
    ax.set_xlabel(
        f"normalized weight  (+ favors {report.positive_class}, - favors {report.negative_class})"
    )
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
