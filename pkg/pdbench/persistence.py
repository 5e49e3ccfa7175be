"""
Self-describing JSON model files.

    {schema_version, kind, feature_names, preprocessing {scaler, pca}, model {...}, metadata {...}}

The preprocessing chain fitted at training time travels inside the file, so
scoring never depends on anything outside it.
"""

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from . import config
from .errors import CorruptModel, InvalidParameter, SchemaMismatch, SchemaVersionMismatch
from .ingest import FeatureMatrix, as_array
from .linear_models import LogRegModel, predict_logreg
from .neural import NeuralModel, predict_neural
from .preprocess import PreprocessChain
from .svm import SvmModel, predict_svm
from .tree_ensembles import ForestModel, GbdtModel, predict_forest, predict_gbdt

logger = logging.getLogger(__name__)

MODEL_KINDS = {
    "logreg": (LogRegModel, predict_logreg),
    "svm": (SvmModel, predict_svm),
    "forest": (ForestModel, predict_forest),
    "gbdt": (GbdtModel, predict_gbdt),
    "neural": (NeuralModel, predict_neural),
}


def kind_of(model):
    for kind, (model_type, _) in MODEL_KINDS.items():
        if isinstance(model, model_type):
            return kind
    raise TypeError(f"Not a trained model: {type(model).__name__}")


@dataclass(frozen=True)
class TrainedModel:
    """A fitted model plus the feature schema and preprocessing it was trained with."""
    model: object
    feature_names: tuple
    chain: PreprocessChain = field(default_factory=PreprocessChain)
    metadata: dict = field(default_factory=dict)

    @property
    def kind(self):
        return kind_of(self.model)

    @property
    def has_probability(self):
        # SVM decision values are uncalibrated margins
        return self.kind != "svm"

    def transform(self, X):
        if isinstance(X, FeatureMatrix):
            missing = [f for f in self.feature_names if f not in X.columns]
            if missing:
                raise SchemaMismatch(missing)
            order = [X.columns.index(f) for f in self.feature_names]
            X = X.with_values(X.values[:, order], self.feature_names)
        else:
            X = FeatureMatrix(values=as_array(X), columns=tuple(self.feature_names))
        return self.chain.apply(X)

    def predict(self, X):
        """(scores, labels) on raw features: probabilities, or decision values for SVM."""
        _, predict = MODEL_KINDS[self.kind]
        return predict(self.model, self.transform(X))

    def to_dict(self):
        return {
            "schema_version": config.SCHEMA_VERSION,
            "kind": self.kind,
            "feature_names": list(self.feature_names),
            "preprocessing": self.chain.to_dict(),
            "model": self.model.to_dict(),
            "metadata": self.metadata,
        }


def save_model(trained, path):
    """Write the model file and return its SHA256."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(trained.to_dict(), indent=2, ensure_ascii=False)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text + "\n")
    logger.info("Saved %s model to %s", trained.kind, path)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


# Loads a model file; everything is validated before any object is built.
def load_model(path):
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise CorruptModel(path, f"invalid JSON ({e.msg} at line {e.lineno})")
    except OSError as e:
        raise CorruptModel(path, str(e))

    if not isinstance(data, dict):
        raise CorruptModel(path, "top level is not an object")
    version = data.get("schema_version")
    if version != config.SCHEMA_VERSION:
        raise SchemaVersionMismatch(config.SCHEMA_VERSION, version)
    kind = data.get("kind")
    if kind not in MODEL_KINDS:
        raise CorruptModel(path, f"unknown model kind {kind!r}")

    model_type, _ = MODEL_KINDS[kind]
    try:
        model = model_type.from_dict(data["model"])
        chain = PreprocessChain.from_dict(data.get("preprocessing") or {})
        feature_names = tuple(data["feature_names"])
    except (KeyError, TypeError, ValueError, AttributeError, InvalidParameter) as e:
        raise CorruptModel(path, f"{type(e).__name__}: {e}")
    return TrainedModel(model=model, feature_names=feature_names, chain=chain,
                        metadata=data.get("metadata") or {})
