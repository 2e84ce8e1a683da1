"""Versioned on-disk format for trained post-distorters.

A model file is an ``.npz`` archive holding the fitted arrays plus a JSON
header under the key ``meta`` with the format version, the estimator class,
its constructor parameters and any caller-supplied training metadata. No
pickling is involved, so files can be loaded across library versions.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from sklearn.utils.validation import check_is_fitted

from ..txchain import QamAlphabet
from .gpr import GPRPostDistorter, GprSegmentModel
from .mm import MMDetector
from .nn import NnModel, NNPostDistorter
from .volterra import VolterraPostDistorter

FORMAT_VERSION = 1
_CLASSES = {
    "GPRPostDistorter": GPRPostDistorter,
    "NNPostDistorter": NNPostDistorter,
    "VolterraPostDistorter": VolterraPostDistorter,
    "MMDetector": MMDetector,
}


def _params(model) -> dict:
    p = model.get_params()
    if isinstance(model, MMDetector):
        p["alphabet"] = None if model.alphabet is None else model.alphabet.order
    return p


def _arrays(model) -> dict:
    if isinstance(model, NNPostDistorter):
        m = model.model_
        return {"W1": m.W1, "b1": m.b1, "w_I": m.w_I, "w_Q": m.w_Q, "b2": np.array([m.b2_I, m.b2_Q]),
                "costs": np.asarray(model.history_.costs)}
    if isinstance(model, VolterraPostDistorter):
        return {"coef": model.coef_, "residual": np.array(model.residual_)}
    if isinstance(model, MMDetector):
        return {"table": model.table_, "hits": model.hits_}
    if isinstance(model, GPRPostDistorter):
        out = {}
        for part, segs in model.segments_.items():
            for i, s in enumerate(segs):
                key = f"{part}{i}"
                out[f"{key}_X"] = s.X
                out[f"{key}_y"] = s.y
                out[f"{key}_hyp"] = np.concatenate([[s.sigma_f, s.sigma_nu], s.lengthscales])
        return out
    raise TypeError(f"cannot serialise {type(model).__name__}")


def save_model(model, path, metadata: dict | None = None) -> Path:
    """Write a fitted post-distorter (or MM table) to ``path``."""
    check_is_fitted(model)
    meta = {
        "format_version": FORMAT_VERSION,
        "class": type(model).__name__,
        "params": _params(model),
        "n_features_in": getattr(model, "n_features_in_", None),
        "metadata": metadata or {},
    }
    path = Path(path)
    with open(path, "wb") as fh:
        np.savez(fh, meta=np.array(json.dumps(meta, sort_keys=True)), **_arrays(model))
    return path


def load_model(path):
    """Inverse of :func:`save_model`; returns ``(model, metadata)``."""
    with np.load(path, allow_pickle=False) as f:
        meta = json.loads(str(f["meta"]))
        arrays = {k: f[k] for k in f.files if k != "meta"}
    if meta.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {meta.get('format_version')}")
    cls = _CLASSES.get(meta["class"])
    if cls is None:
        raise ValueError(f"unknown model class {meta['class']!r}")
    params = dict(meta["params"])
    if cls is MMDetector and params.get("alphabet") is not None:
        params["alphabet"] = QamAlphabet.square(params["alphabet"])
    model = cls(**params)
    if meta["n_features_in"] is not None:
        model.n_features_in_ = meta["n_features_in"]
    if cls is NNPostDistorter:
        from .nn import LmHistory

        b2 = arrays["b2"]
        model.model_ = NnModel(arrays["W1"], arrays["b1"], arrays["w_I"], arrays["w_Q"], float(b2[0]), float(b2[1]))
        model.history_ = LmHistory(costs=list(arrays["costs"]))
    elif cls is VolterraPostDistorter:
        model.coef_ = arrays["coef"]
        model.residual_ = float(arrays["residual"])
    elif cls is MMDetector:
        model.table_ = arrays["table"]
        model.hits_ = arrays["hits"]
    else:
        model.segments_ = {}
        for part in ("I", "Q"):
            segs, i = [], 0
            while f"{part}{i}_X" in arrays:
                hyp = arrays[f"{part}{i}_hyp"]
                segs.append(GprSegmentModel.from_hyperparameters(
                    arrays[f"{part}{i}_X"], arrays[f"{part}{i}_y"], hyp[0], hyp[1], hyp[2:]))
                i += 1
            model.segments_[part] = segs
    return model, meta["metadata"]
