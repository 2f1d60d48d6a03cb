"""Versioned JSON persistence for trained search models.

A model file bundles the fitted principal components, the network weights
(when the system uses one), the training configuration, and fingerprints of
the vocabulary and corpus it was built from. Loading is fail-closed: version
or vocabulary mismatches are errors, not warnings.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import MacnetoError
from .network import NetworkParams, PcvNetwork
from .pca import InstructionPca

MODEL_FORMAT_VERSION = 1


class ModelFormatError(MacnetoError):
    """A model file has the wrong version, fingerprint, or structure."""


@dataclass
class TrainedModel:
    system: str  # "macneto" or "pure_pca"
    vocabulary_fingerprint: str
    pca: InstructionPca
    network: PcvNetwork | None
    seed: int
    corpus_fingerprint: str
    notes: dict

    def query_network(self) -> PcvNetwork | None:
        return self.network


def _pca_to_doc(pca: InstructionPca) -> dict:
    return {
        "n_components": pca.n_components,
        "mean": pca.mean_.tolist(),
        "components": pca.components_.tolist(),
        "explained_variance": pca.explained_variance_.tolist(),
        "n_features": pca.n_features_in_,
        "warnings": list(pca.warnings_),
    }


def _pca_from_doc(doc: dict) -> InstructionPca:
    pca = InstructionPca(n_components=doc["n_components"])
    pca.mean_ = np.asarray(doc["mean"], dtype=np.float64)
    pca.components_ = np.asarray(doc["components"], dtype=np.float64)
    pca.explained_variance_ = np.asarray(doc["explained_variance"], dtype=np.float64)
    pca.n_features_in_ = int(doc["n_features"])
    pca.warnings_ = list(doc["warnings"])
    return pca


def _network_to_doc(net: PcvNetwork) -> dict:
    return {
        "params": {
            "weights": [w.tolist() for w in net.params_.weights],
            "biases": [b.tolist() for b in net.params_.biases],
        },
        "config": {
            "hidden": list(net.hidden),
            "learning_rate": net.learning_rate,
            "beta1": net.beta1,
            "beta2": net.beta2,
            "epsilon": net.epsilon,
            "epochs": net.epochs,
            "batch_size": net.batch_size,
            "seed": net.seed,
            "input_scaling": net.input_scaling,
        },
        "loss_history": list(net.loss_history_),
        "n_features": net.n_features_in_,
        "target_scale": net.target_scale_.tolist(),
        "input_center": net.input_center_.tolist(),
        "input_spread": net.input_spread_.tolist(),
    }


def _network_from_doc(doc: dict) -> PcvNetwork:
    cfg = doc["config"]
    net = PcvNetwork(
        hidden=tuple(cfg["hidden"]),
        learning_rate=cfg["learning_rate"],
        beta1=cfg["beta1"],
        beta2=cfg["beta2"],
        epsilon=cfg["epsilon"],
        epochs=cfg["epochs"],
        batch_size=cfg["batch_size"],
        seed=cfg["seed"],
        input_scaling=cfg["input_scaling"],
    )
    net.params_ = NetworkParams(
        weights=[np.asarray(w, dtype=np.float64) for w in doc["params"]["weights"]],
        biases=[np.asarray(b, dtype=np.float64) for b in doc["params"]["biases"]],
    )
    net.loss_history_ = list(doc["loss_history"])
    net.n_features_in_ = int(doc["n_features"])
    net.target_scale_ = np.asarray(doc["target_scale"], dtype=np.float64)
    net.input_center_ = np.asarray(doc["input_center"], dtype=np.float64)
    net.input_spread_ = np.asarray(doc["input_spread"], dtype=np.float64)
    return net


def save_model(model: TrainedModel, path: str | Path) -> None:
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "system": model.system,
        "vocabulary_fingerprint": model.vocabulary_fingerprint,
        "pca": _pca_to_doc(model.pca),
        "network": _network_to_doc(model.network) if model.network is not None else None,
        "metadata": {
            "seed": model.seed,
            "corpus_fingerprint": model.corpus_fingerprint,
            "output_layer": "linear",
            **model.notes,
        },
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n", encoding="utf-8")


def load_model(path: str | Path, expected_vocabulary: str | None = None) -> TrainedModel:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"{path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise ModelFormatError(
            f"{path}: expected format_version {MODEL_FORMAT_VERSION}, "
            f"got {doc.get('format_version')!r}"
        )
    if expected_vocabulary is not None and doc["vocabulary_fingerprint"] != expected_vocabulary:
        raise ModelFormatError(
            f"{path}: model was built with a different instruction vocabulary"
        )
    try:
        metadata = dict(doc["metadata"])
        return TrainedModel(
            system=doc["system"],
            vocabulary_fingerprint=doc["vocabulary_fingerprint"],
            pca=_pca_from_doc(doc["pca"]),
            network=_network_from_doc(doc["network"]) if doc.get("network") else None,
            seed=metadata.pop("seed"),
            corpus_fingerprint=metadata.pop("corpus_fingerprint"),
            notes=metadata,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"{path}: malformed model document: {exc}") from exc
