"""Model persistence: a versioned, self-describing JSON document."""

from __future__ import annotations

import json

import numpy as np

from .pipeline import PipelineError, PipelineModel

MODEL_VERSION = 1


def save_model(model: PipelineModel, path) -> None:
    document = {
        "format": "pif-pipeline-model",
        "version": MODEL_VERSION,
        "construct": model.construct,
        "classes": list(model.classes),
        "names": list(model.names),
        "medians": model.medians.tolist(),
        "rank_reference": [np.asarray(r).tolist() for r in model.rank_reference],
        "rank_span": model.rank_span,
        "center": model.center.tolist(),
        "basis": model.basis.tolist(),
        "variance_ratios": model.variance_ratios.tolist(),
        "w": model.w.tolist(),
        "b": model.b,
        "subjects": list(model.subjects),
        "degenerate": model.degenerate,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(document, fh, indent=1)
        fh.write("\n")


def load_model(path) -> PipelineModel:
    with open(path, encoding="utf-8") as fh:
        document = json.load(fh)
    if document.get("format") != "pif-pipeline-model":
        raise PipelineError(f"{path}: not a pipeline model file")
    if document.get("version") != MODEL_VERSION:
        raise PipelineError(f"{path}: unsupported model version {document.get('version')!r}")
    return PipelineModel(
        construct=document["construct"],
        classes=tuple(document["classes"]),
        names=tuple(document["names"]),
        medians=np.array(document["medians"], dtype=float),
        rank_reference=[np.array(r, dtype=float) for r in document["rank_reference"]],
        rank_span=float(document["rank_span"]),
        center=np.array(document["center"], dtype=float),
        basis=np.array(document["basis"], dtype=float),
        variance_ratios=np.array(document["variance_ratios"], dtype=float),
        w=np.array(document["w"], dtype=float),
        b=float(document["b"]),
        subjects=tuple(document["subjects"]),
        degenerate=bool(document["degenerate"]),
    )
