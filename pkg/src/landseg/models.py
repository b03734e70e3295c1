"""Versioned JSON serialization and raster-wide prediction for the
pixel-classifier models."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .classical import DecisionTree, RandomForest, SvmClassifier
from .raster import LabelRaster, NODATA_ID, Raster

FORMAT = "landseg-model"
VERSION = 1

_KINDS = {
    "cart": DecisionTree,
    "forest": RandomForest,
    "svm": SvmClassifier,
}


def model_kind(model) -> str:
    for kind, cls in _KINDS.items():
        if isinstance(model, cls):
            return kind
    raise TypeError(f"not a serializable model: {type(model)!r}")


def save_model(model, path, band_names=None) -> None:
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "kind": model_kind(model),
        "band_names": list(band_names) if band_names else None,
        "model": model.to_json(),
    }
    Path(path).write_text(json.dumps(doc) + "\n")


def load_model(path):
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != FORMAT:
        raise ValueError(f"{path} is not a {FORMAT} document")
    if doc.get("version") != VERSION:
        raise ValueError(f"unsupported model version {doc.get('version')}")
    kind = doc["kind"]
    if kind not in _KINDS:
        raise ValueError(f"unknown model kind {kind!r}")
    return _KINDS[kind].from_json(doc["model"]), doc.get("band_names")


def predict_pixels(model, r: Raster, chunk: int = 65536):
    """Classify every raster pixel; invalid pixels come out as nodata.

    Returns (LabelRaster, probs (K, H, W) float64). Probabilities are vote
    fractions / leaf histograms, not calibrated.
    """
    n_classes = model.n_classes
    x = r.data.reshape(r.n_bands, -1).T.astype(np.float64)
    probs = np.zeros((x.shape[0], n_classes))
    for at in range(0, x.shape[0], chunk):
        probs[at:at + chunk] = model.predict_proba(x[at:at + chunk])
    labels = np.argmax(probs, axis=1).astype(np.uint8)
    labels[~r.valid_mask.reshape(-1)] = NODATA_ID
    return (
        LabelRaster(r.width, r.height, labels.reshape(r.height, r.width)),
        probs.T.reshape(n_classes, r.height, r.width),
    )
