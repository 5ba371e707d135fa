# Copyright 2024 egosocial developers

import json
import logging
import math
import os

from typing import NamedTuple, Optional

import numpy as np

from .errors import *
from .errors import make_exception
from .lstm import PARAMETER_NAMES, Network, NetworkConfig
from .signals import PcaModel, QuadraticDistanceModel, Standardization, task_of

__all__ = ("ModelBundle", "TASKS", "save_bundle", "load_bundle")

__doc__ = """This module contains the model bundle: one JSON document per task
holding everything needed to classify new data (network configuration and
weights, standardization statistics, and the distance model or the descriptor
PCA with its quantization factor).

Weight matrices are stored row-major as ``{"shape": [...], "data": [...]}``.
A ``single`` precision bundle rounds every weight through 32-bit floats and is
meant for inference only.
"""

logger = logging.getLogger(__name__)

BUNDLE_FORMAT = "egosocial-model"
BUNDLE_SCHEMA_VERSION = "1"
TASKS = ("detection", "categorization")
PRECISIONS = ("double", "single")


class ModelBundle(NamedTuple):
    task: str
    setting: str
    network: Network
    distance_model: Optional[QuadraticDistanceModel] = None
    pca: Optional[PcaModel] = None
    quantization: Optional[int] = None
    precision: str = "double"


def _array_doc(value, precision):
    value = np.asarray(value, dtype=float)
    if precision == "single":
        value = value.astype(np.float32).astype(float)
    return {"shape": list(value.shape), "data": value.ravel().tolist()}


def _array(doc):
    return np.asarray(doc["data"], dtype=float).reshape(doc["shape"])


def save_bundle(path, task: str, network: Network, setting: str,
                distance_model: Optional[QuadraticDistanceModel] = None, pca: Optional[PcaModel] = None,
                quantization: Optional[int] = None, precision: str = "double") -> str:
    """Write a model bundle.

    :param path: Destination file.
    :param task: ``detection`` or ``categorization``; must agree with *setting*.
    :param network: Trained network.
    :param setting: Feature setting the network was trained on.
    :param distance_model: Distance model (detection).
    :param pca: Descriptor PCA (categorization).
    :param quantization: Quantization factor used with *pca*.
    :param precision: ``double`` or ``single``.
    :return: Path written.
    :raises ValueError: Unknown precision.
    :raises BundleError: *task* and *setting* disagree.
    """
    if precision not in PRECISIONS:
        raise make_exception(egosocial_err_bad_precision, precision=precision)
    if task_of(setting) != task:
        raise make_exception(egosocial_err_bundle_wrong_task, path=path, found=task_of(setting), expected=task)
    std = network.standardization
    doc = {
        "format": BUNDLE_FORMAT,
        "schema_version": BUNDLE_SCHEMA_VERSION,
        "task": task,
        "setting": setting,
        "precision": precision,
        "seed": network.config.rng_seed,
        "config": network.config._asdict(),
        "standardization": None if std is None else {
            "columns": list(std.columns), "mean": list(std.mean), "scale": list(std.scale)},
        "weights": {name: _array_doc(network.weights[name], precision) for name in PARAMETER_NAMES},
        "distance_model": None,
        "pca": None,
        "quantization": quantization,
    }
    if distance_model is not None:
        model = distance_model._asdict()
        if not math.isfinite(model["height_max"]):
            model["height_max"] = None
        doc["distance_model"] = model
    if pca is not None:
        doc["pca"] = {
            "mean": _array_doc(pca.mean, "double"),
            "components": _array_doc(pca.components, "double"),
            "variances": _array_doc(pca.variances, "double"),
            "retained_variance": pca.retained_variance,
            "threshold": pca.threshold,
        }
    path = os.fspath(path)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, sort_keys=True)
        f.write("\n")
    logger.info("Saved %s model bundle (%s, %s precision) to %s", task, setting, precision, path)
    return path


def load_bundle(path, task: Optional[str] = None) -> ModelBundle:
    """Read a model bundle, optionally insisting on its task.

    :raises BundleError: Unreadable, incomplete or of another task.
    :raises UnknownSchemaError: Unsupported ``schema_version``.
    """
    path = os.fspath(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            doc = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise make_exception(egosocial_err_bundle_unreadable, path=path, reason=e) from None
    if not isinstance(doc, dict) or doc.get("format") != BUNDLE_FORMAT:
        raise make_exception(egosocial_err_bundle_unreadable, path=path, reason="not an egosocial model bundle")
    if str(doc.get("schema_version")) != BUNDLE_SCHEMA_VERSION:
        raise make_exception(egosocial_err_unknown_schema, path=path, line=1, version=doc.get("schema_version"))
    for field in ("task", "setting", "config", "weights"):
        if field not in doc:
            raise make_exception(egosocial_err_bundle_missing, path=path, field=field)
    if task is not None and doc["task"] != task:
        raise make_exception(egosocial_err_bundle_wrong_task, path=path, found=doc["task"], expected=task)

    try:
        config = NetworkConfig(**doc["config"])
        weights = {name: _array(doc["weights"][name]) for name in PARAMETER_NAMES}
    except KeyError as e:
        raise make_exception(egosocial_err_bundle_missing, path=path, field=f"weights.{e.args[0]}") from None
    except (TypeError, ValueError) as e:
        raise make_exception(egosocial_err_bundle_unreadable, path=path, reason=e) from None
    std = doc.get("standardization")
    standardization = None if std is None else Standardization(
        columns=tuple(std["columns"]), mean=tuple(std["mean"]), scale=tuple(std["scale"]))

    distance_model = None
    if doc.get("distance_model") is not None:
        model = dict(doc["distance_model"])
        if model.get("height_max") is None:
            model["height_max"] = float("inf")
        distance_model = QuadraticDistanceModel(**model)
    pca = None
    if doc.get("pca") is not None:
        p = doc["pca"]
        pca = PcaModel(mean=_array(p["mean"]), components=_array(p["components"]),
                       variances=_array(p["variances"]), retained_variance=p["retained_variance"],
                       threshold=p["threshold"])
    return ModelBundle(
        task=doc["task"],
        setting=doc["setting"],
        network=Network(config=config, weights=weights, standardization=standardization),
        distance_model=distance_model,
        pca=pca,
        quantization=doc.get("quantization"),
        precision=doc.get("precision", "double"),
    )
