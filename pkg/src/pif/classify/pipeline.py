"""Reader-state pipeline: per-subject ranks -> PCA (95%) -> Fisher LDA.

Raw feature scales differ wildly between people; converting each
subject's values to within-subject ranks removes every monotone
per-subject distortion, at the price of needing several observations
per subject before anything can be classified. PCA then drops the
rank matrix to the smallest component count that keeps 95% of the
variance, and a Fisher discriminant separates the two classes in
component space.

Everything here is deterministic: eigendecompositions instead of
iterative solvers, and a fixed sign convention on components.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata


class PipelineError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    """Labeled feature rows for one binary construct."""

    names: tuple[str, ...]
    matrix: np.ndarray  # (n, d) raw features, NaN = missing
    subjects: tuple[str, ...]
    labels: tuple[str, ...]
    construct: str = "custom"

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", matrix)
        n = len(matrix)
        if not (n == len(self.subjects) == len(self.labels)):
            raise PipelineError("matrix, subjects, and labels must align")
        if len(set(self.subjects)) < 2:
            raise PipelineError("need at least 2 subjects")
        if len(self.classes) != 2:
            raise PipelineError(f"need exactly 2 classes, got {sorted(set(self.labels))}")
        for subject in set(self.subjects):
            seen = {l for s, l in zip(self.subjects, self.labels) if s == subject}
            if len(seen) != 2:
                raise PipelineError(f"subject {subject!r} lacks observations of both classes")

    @property
    def classes(self) -> tuple[str, ...]:
        return tuple(sorted(set(self.labels)))

    def without_subject(self, subject: str) -> "Dataset":
        keep = [i for i, s in enumerate(self.subjects) if s != subject]
        return Dataset(
            self.names,
            self.matrix[keep],
            tuple(self.subjects[i] for i in keep),
            tuple(self.labels[i] for i in keep),
            self.construct,
        )

    def only_subject(self, subject: str) -> tuple[np.ndarray, tuple[str, ...]]:
        keep = [i for i, s in enumerate(self.subjects) if s == subject]
        return self.matrix[keep], tuple(self.labels[i] for i in keep)


def impute_subject_medians(matrix: np.ndarray, fallback: np.ndarray | None = None) -> np.ndarray:
    """Fill NaNs with the column median of the given rows."""
    out = np.array(matrix, dtype=float)
    for j in range(out.shape[1]):
        col = out[:, j]
        bad = np.isnan(col)
        if not bad.any():
            continue
        good = col[~bad]
        if len(good):
            col[bad] = np.median(good)
        elif fallback is not None and not np.isnan(fallback[j]):
            col[bad] = fallback[j]
        else:
            col[bad] = 0.0
    return out


def rank_rows(matrix: np.ndarray) -> np.ndarray:
    """Ranks 1..n down each column, ties averaged. Expects complete data."""
    return np.apply_along_axis(lambda c: rankdata(c, method="average"), 0, matrix)


def rank_normalize_matrix(
    matrix: np.ndarray, subjects, fallback: np.ndarray | None = None
) -> np.ndarray:
    """Per-subject imputation followed by per-subject ranking."""
    out = np.empty_like(matrix, dtype=float)
    for subject in set(subjects):
        idx = [i for i, s in enumerate(subjects) if s == subject]
        if len(idx) < 2:
            raise PipelineError(
                f"subject {subject!r} has a single observation; ranks are undefined"
            )
        block = impute_subject_medians(matrix[idx], fallback)
        out[idx] = rank_rows(block)
    return out


def rank_normalize(dataset: Dataset) -> Dataset:
    """The dataset with every feature replaced by within-subject ranks."""
    ranked = rank_normalize_matrix(dataset.matrix, dataset.subjects)
    return Dataset(dataset.names, ranked, dataset.subjects, dataset.labels, dataset.construct)


def pca_fit(matrix: np.ndarray, keep_variance: float = 0.95):
    """Centered PCA keeping the minimal component count at ``keep_variance``.

    Returns (center, basis, variance_ratios); basis is (d, k) with
    orthonormal columns. Uses the Gram matrix when rows are scarcer than
    features, so the decomposition is always on the smaller square matrix.
    """
    X = np.asarray(matrix, dtype=float)
    n, d = X.shape
    center = X.mean(axis=0)
    Xc = X - center
    dof = max(n - 1, 1)
    if n <= d:
        gram = Xc @ Xc.T / dof
        eigvals, eigvecs = np.linalg.eigh(gram)
    else:
        cov = Xc.T @ Xc / dof
        eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]
    total = float(eigvals.sum())
    if total <= 0.0:
        raise PipelineError("no variance to analyze after normalization")
    positive = eigvals > max(1e-12 * eigvals[0], 0.0)
    eigvals = eigvals[positive]
    eigvecs = eigvecs[:, positive]
    if n <= d:
        # lift Gram eigenvectors u into feature space: v = X^T u / sqrt(dof * lambda)
        basis = Xc.T @ eigvecs / np.sqrt(dof * eigvals)
    else:
        basis = eigvecs
    ratios = eigvals / total
    k = int(np.searchsorted(np.cumsum(ratios), keep_variance - 1e-12) + 1)
    k = min(k, basis.shape[1])
    basis = basis[:, :k]
    # deterministic orientation: largest-magnitude loading is positive
    for j in range(k):
        pivot = np.argmax(np.abs(basis[:, j]))
        if basis[pivot, j] < 0:
            basis[:, j] = -basis[:, j]
    return center, basis, ratios[:k]


def lda_fit(Z: np.ndarray, is_a: np.ndarray):
    """Fisher discriminant in component space.

    Returns (w, b, warned). w solves the pooled-covariance system, so
    w . z + b is the exact log-odds under the equal-covariance Gaussian
    model with equal priors; the decision boundary sits at the midpoint
    of the projected class means.
    """
    Z = np.asarray(Z, dtype=float)
    is_a = np.asarray(is_a, dtype=bool)
    k = Z.shape[1]
    mu_a = Z[is_a].mean(axis=0)
    mu_b = Z[~is_a].mean(axis=0)
    scatter = np.zeros((k, k))
    for mask, mu in ((is_a, mu_a), (~is_a, mu_b)):
        centered = Z[mask] - mu
        scatter += centered.T @ centered
    dof = max(len(Z) - 2, 1)
    pooled = scatter / dof
    warned = False
    delta = mu_a - mu_b
    if not np.any(delta):
        warnings.warn("identical class means: discriminant is degenerate")
        warned = True
    try:
        condition = np.linalg.cond(pooled)
    except np.linalg.LinAlgError:
        condition = np.inf
    if not np.isfinite(condition) or condition > 1e12:
        ridge = 1e-6 * np.trace(pooled) / k
        if ridge <= 0.0:
            ridge = 1e-12
        pooled = pooled + ridge * np.eye(k)
        if not warned:
            warnings.warn("singular within-class scatter: ridge-regularized")
            warned = True
    w = np.linalg.solve(pooled, delta)
    b = -float(w @ ((mu_a + mu_b) / 2.0))
    return w, b, warned


@dataclass(frozen=True)
class PipelineModel:
    """A fitted rank -> PCA -> LDA pipeline for one binary construct."""

    construct: str
    classes: tuple[str, str]  # positive scores mean classes[0]
    names: tuple[str, ...]
    medians: np.ndarray  # (d,) pooled training medians, imputation fallback
    rank_reference: list  # per-feature sorted training values (quantile fallback)
    rank_span: float  # typical per-subject observation count in training
    center: np.ndarray  # (d,)
    basis: np.ndarray  # (d, k)
    variance_ratios: np.ndarray  # (k,)
    w: np.ndarray  # (k,)
    b: float
    subjects: tuple[str, ...] = ()
    degenerate: bool = False

    @property
    def n_components(self) -> int:
        return self.basis.shape[1]

    def feature_weights(self) -> np.ndarray:
        """Discriminant weights back-projected to feature space."""
        return self.basis @ self.w


@dataclass(frozen=True)
class Prediction:
    label: str
    score: float
    posterior: float  # P(classes[0] | x) under the Gaussian model


def fit(dataset: Dataset, keep_variance: float = 0.95) -> PipelineModel:
    class_a, class_b = dataset.classes
    ranked = rank_normalize_matrix(dataset.matrix, dataset.subjects)
    center, basis, ratios = pca_fit(ranked, keep_variance)
    Z = (ranked - center) @ basis
    is_a = np.array([label == class_a for label in dataset.labels])
    w, b, warned = lda_fit(Z, is_a)

    finite = np.where(np.isnan(dataset.matrix), np.nan, dataset.matrix)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)  # all-NaN columns
        medians = np.nanmedian(finite, axis=0)
    reference = [np.sort(col[~np.isnan(col)]) for col in dataset.matrix.T]
    counts = [list(dataset.subjects).count(s) for s in set(dataset.subjects)]
    return PipelineModel(
        construct=dataset.construct,
        classes=(class_a, class_b),
        names=dataset.names,
        medians=medians,
        rank_reference=reference,
        rank_span=float(np.median(counts)),
        center=center,
        basis=basis,
        variance_ratios=ratios,
        w=w,
        b=b,
        subjects=tuple(sorted(set(dataset.subjects))),
        degenerate=warned,
    )


def _score_rows(model: PipelineModel, ranked_rows: np.ndarray) -> np.ndarray:
    Z = (ranked_rows - model.center) @ model.basis
    return Z @ model.w + model.b


def _classify(model: PipelineModel, score: float) -> str:
    # exact zero goes to the first class: deterministic replay
    return model.classes[0] if score >= 0.0 else model.classes[1]


def _sigmoid(scores: np.ndarray) -> np.ndarray:
    # evaluated on the negative side only, so large |score| cannot overflow
    out = np.empty_like(scores, dtype=float)
    pos = scores >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-scores[pos]))
    expd = np.exp(scores[~pos])
    out[~pos] = expd / (1.0 + expd)
    return out


def predict_subject(model: PipelineModel, rows: np.ndarray) -> list[Prediction]:
    """Predict every observation of one subject, ranked jointly."""
    rows = np.asarray(rows, dtype=float)
    if len(rows) < 2:
        raise PipelineError("per-subject ranking needs at least 2 observations")
    ranked = rank_rows(impute_subject_medians(rows, model.medians))
    scores = _score_rows(model, ranked)
    posteriors = _sigmoid(scores)
    return [
        Prediction(_classify(model, float(s)), float(s), float(p))
        for s, p in zip(scores, posteriors)
    ]


def _quantile_ranks(model: PipelineModel, row: np.ndarray) -> np.ndarray:
    """Pseudo-ranks from the training distribution, for lone observations."""
    ranked = np.empty(len(row))
    for j, value in enumerate(row):
        reference = model.rank_reference[j]
        if len(reference) == 0:
            ranked[j] = (model.rank_span + 1.0) / 2.0
            continue
        lo = np.searchsorted(reference, value, side="left")
        hi = np.searchsorted(reference, value, side="right")
        quantile = (lo + hi) / 2.0 / len(reference)
        ranked[j] = 1.0 + quantile * (model.rank_span - 1.0)
    return ranked


def predict(
    model: PipelineModel,
    vector: np.ndarray,
    subject_context: np.ndarray | None = None,
    normalize: str = "subject",
) -> Prediction:
    """Classify one observation.

    ``normalize="subject"`` ranks the vector jointly with
    ``subject_context`` (other observations of the same subject).
    ``normalize="train-quantiles"`` needs no context: the vector is
    placed on the training distribution instead. The two are different
    estimators; pick one and stick with it for a session.
    """
    vector = np.asarray(vector, dtype=float)
    if len(vector) != len(model.names):
        raise PipelineError(
            f"feature registry mismatch: got {len(vector)} values, model has {len(model.names)}"
        )
    if normalize == "subject":
        if subject_context is None or len(subject_context) == 0:
            raise PipelineError(
                "subject ranking needs context observations; "
                "pass subject_context or use normalize='train-quantiles'"
            )
        rows = np.vstack([np.asarray(subject_context, dtype=float), vector])
        return predict_subject(model, rows)[-1]
    if normalize == "train-quantiles":
        row = impute_subject_medians(vector[None, :], model.medians)[0]
        ranked = _quantile_ranks(model, row)
        score = float(_score_rows(model, ranked[None, :])[0])
        posterior = float(_sigmoid(np.array([score]))[0])
        return Prediction(_classify(model, score), score, posterior)
    raise PipelineError(f"unknown normalize mode {normalize!r}")
