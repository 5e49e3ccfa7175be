import json

import numpy as np
import pytest

from pdbench import config
from pdbench.errors import CorruptModel, SchemaMismatch, SchemaVersionMismatch
from pdbench.linear_models import train_logreg
from pdbench.neural import default_spec, train_neural
from pdbench.persistence import TrainedModel, kind_of, load_model, save_model
from pdbench.preprocess import fit_chain
from pdbench.svm import train_svm
from pdbench.tree_ensembles import train_forest, train_gbdt

FITTERS = {
    "logreg": lambda X, y: train_logreg(X, y, 10.0),
    "svm": lambda X, y: train_svm(X, y, 10.0),
    "forest": lambda X, y: train_forest(X, y, n_estimators=5, seed=1),
    "gbdt": lambda X, y: train_gbdt(X, y, n_estimators=5, style="histogram"),
    "neural": lambda X, y: train_neural(X, y, default_spec("lstm", hidden=(3,), epochs=2)),
}


def _trained(dataset, kind, use_pca=False):
    matrix = dataset.to_matrix()
    chain = fit_chain(matrix, use_pca=use_pca)
    model = FITTERS[kind](chain.apply(matrix).values, matrix.labels)
    return TrainedModel(model=model, feature_names=matrix.columns, chain=chain, metadata={"seed": 42})


@pytest.mark.parametrize("kind", sorted(FITTERS))
def test_round_trip_is_bit_identical(tmp_path, small_voice_dataset, kind):
    trained = _trained(small_voice_dataset, kind, use_pca=kind == "logreg")
    path = tmp_path / f"{kind}.json"
    save_model(trained, path)
    loaded = load_model(path)

    matrix = small_voice_dataset.to_matrix()
    before_scores, before_labels = trained.predict(matrix)
    after_scores, after_labels = loaded.predict(matrix)
    np.testing.assert_array_equal(after_labels, before_labels)
    np.testing.assert_array_equal(after_scores, before_scores)
    assert loaded.kind == kind == kind_of(trained.model)
    assert loaded.metadata == {"seed": 42}


def test_file_layout_and_digest(tmp_path, small_voice_dataset):
    path = tmp_path / "m.json"
    digest = save_model(_trained(small_voice_dataset, "logreg"), path)
    data = json.loads(path.read_text(encoding="utf-8"))
    assert set(data) == {"schema_version", "kind", "feature_names", "preprocessing", "model", "metadata"}
    assert data["schema_version"] == config.SCHEMA_VERSION
    assert data["preprocessing"]["pca"] is None
    assert len(digest) == 64


def test_truncated_file_is_corrupt(tmp_path, small_voice_dataset):
    path = tmp_path / "m.json"
    save_model(_trained(small_voice_dataset, "forest"), path)
    text = path.read_text(encoding="utf-8")
    path.write_text(text[: len(text) // 2], encoding="utf-8")
    with pytest.raises(CorruptModel):
        load_model(path)


def test_missing_file_is_corrupt(tmp_path):
    with pytest.raises(CorruptModel):
        load_model(tmp_path / "absent.json")


def test_newer_schema_version_is_rejected(tmp_path, small_voice_dataset):
    path = tmp_path / "m.json"
    save_model(_trained(small_voice_dataset, "svm"), path)
    data = json.loads(path.read_text(encoding="utf-8"))
    data["schema_version"] = config.SCHEMA_VERSION + 1
    path.write_text(json.dumps(data), encoding="utf-8")
    with pytest.raises(SchemaVersionMismatch):
        load_model(path)


@pytest.mark.parametrize("mutate", [
    lambda d: d.update(kind="knn"),
    lambda d: d.pop("model"),
    lambda d: d["model"].pop("weights"),
])
def test_malformed_contents_are_corrupt(tmp_path, small_voice_dataset, mutate):
    path = tmp_path / "m.json"
    save_model(_trained(small_voice_dataset, "logreg"), path)
    data = json.loads(path.read_text(encoding="utf-8"))
    mutate(data)
    path.write_text(json.dumps(data), encoding="utf-8")
    with pytest.raises(CorruptModel):
        load_model(path)


def test_columns_are_matched_by_name(small_voice_dataset):
    trained = _trained(small_voice_dataset, "logreg")
    matrix = small_voice_dataset.to_matrix()
    reversed_matrix = matrix.with_values(matrix.values[:, ::-1], matrix.columns[::-1])
    np.testing.assert_array_equal(trained.predict(reversed_matrix)[0], trained.predict(matrix)[0])


def test_missing_feature_is_reported(small_voice_dataset):
    trained = _trained(small_voice_dataset, "logreg")
    matrix = small_voice_dataset.to_matrix()
    narrowed = matrix.with_values(matrix.values[:, 1:], matrix.columns[1:])
    with pytest.raises(SchemaMismatch) as excinfo:
        trained.predict(narrowed)
    assert matrix.columns[0] in str(excinfo.value)


def test_svm_has_no_probability(small_voice_dataset):
    assert not _trained(small_voice_dataset, "svm").has_probability
    assert _trained(small_voice_dataset, "gbdt").has_probability
