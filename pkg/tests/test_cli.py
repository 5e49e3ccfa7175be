import json

import pytest

from pdbench import config
from pdbench.cli import VERBS, main, parse_args, resolve_settings
from pdbench.errors import UsageError
from pdbench.ingest import FEATURE_NAMES
from pdbench.persistence import load_model
from pdbench.preprocess import stratified_split
from pdbench.tables import read_csv_table

from conftest import make_voice_frame, write_voice_csv


class TestParsing:
    def test_train_flags(self):
        command = parse_args(["train", "--model", "svm", "--kernel", "poly", "--c", "0.5", "--data", "d.csv",
                              "--save", "m.json", "--max-depth", "None"])
        assert command.verb == "train"
        assert command.options["kernel"] == "poly"
        assert command.options["c"] == 0.5
        assert command.options["max_depth"] is None

    def test_suites_accept_commas_and_repeats(self):
        command = parse_args(["bench", "--suite", "gcf,svm", "--suite", "neural", "--no-timing"])
        assert command.options["suites"] == ["gcf", "svm", "neural"]
        assert command.options["record_timing"] is False

    def test_timing_flag_absent_means_unset(self):
        assert parse_args(["bench"]).options["record_timing"] is None

    def test_unknown_verb_lists_verbs(self):
        with pytest.raises(UsageError) as excinfo:
            parse_args(["plot"])
        for verb in VERBS:
            assert verb in str(excinfo.value)

    def test_bad_max_depth(self):
        with pytest.raises(UsageError):
            parse_args(["train", "--model", "forest", "--save", "m.json", "--max-depth", "0"])

    def test_missing_required_flag(self):
        with pytest.raises(UsageError):
            parse_args(["train", "--model", "logreg"])


class TestSettings:
    def test_defaults(self, monkeypatch):
        monkeypatch.setattr(config, "DEFAULT_SEED", 42)
        settings = resolve_settings({})
        assert settings["seed"] == 42
        assert settings["suites"] == ["all"]
        assert settings["record_timing"] is True

    def test_flags_beat_file_beat_environment(self, tmp_path, monkeypatch):
        monkeypatch.setattr(config, "DEFAULT_SEED", 7)
        monkeypatch.setattr(config, "DEFAULT_CV_FOLDS", 3)
        path = tmp_path / "settings.json"
        path.write_text(json.dumps({"seed": 11, "test_fraction": 0.3}), encoding="utf-8")
        settings = resolve_settings({"config": str(path), "seed": 99, "test_fraction": None})
        assert settings["seed"] == 99
        assert settings["test_fraction"] == 0.3
        assert settings["cv_folds"] == 3

    def test_unknown_config_key(self, tmp_path):
        path = tmp_path / "settings.json"
        path.write_text(json.dumps({"sead": 1}), encoding="utf-8")
        with pytest.raises(UsageError):
            resolve_settings({"config": str(path)})

    def test_unreadable_config(self, tmp_path):
        with pytest.raises(UsageError):
            resolve_settings({"config": str(tmp_path / "absent.json")})


class TestExitCodes:
    def test_validate_ok(self, voice_csv, capsys):
        assert main(["validate", "--data", str(voice_csv)]) == 0
        out = capsys.readouterr().out
        assert "195 records" in out
        assert "status=1 (PD): 147" in out

    def test_usage_error(self, capsys):
        assert main(["frobnicate"]) == 2

    def test_no_data_file(self, monkeypatch, capsys):
        monkeypatch.setattr(config, "DATA_PATH", None)
        assert main(["validate"]) == 2
        assert "PDBENCH_DATA" in capsys.readouterr().err

    def test_data_error(self, tmp_path, capsys):
        frame = make_voice_frame(n_pd=5, n_healthy=5).drop(columns=["HNR"])
        path = write_voice_csv(tmp_path / "bad.data", frame)
        assert main(["validate", "--data", str(path)]) == 3
        assert "HNR" in capsys.readouterr().err

    def test_ragged_row_is_data_error(self, tmp_path, capsys):
        path = write_voice_csv(tmp_path / "ragged.data", make_voice_frame(n_pd=5, n_healthy=5))
        lines = path.read_text(encoding="utf-8").splitlines()
        lines[3] += ",0.5"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        assert main(["validate", "--data", str(path)]) == 3
        assert "line 4" in capsys.readouterr().err

    def test_model_error(self, tmp_path, voice_csv, capsys):
        path = tmp_path / "broken.json"
        path.write_text("{\"schema_version\": 1, \"kind\"", encoding="utf-8")
        assert main(["predict", "--model", str(path), "--input", str(voice_csv)]) == 4


@pytest.fixture
def trained_path(tmp_path, voice_csv):
    path = tmp_path / "model.json"
    code = main(["train", "--model", "logreg", "--data", str(voice_csv), "--save", str(path), "--c", "10"])
    assert code == 0
    return path


class TestTrainPredict:
    def test_train_writes_metadata(self, trained_path):
        trained = load_model(trained_path)
        assert trained.kind == "logreg"
        assert trained.feature_names == FEATURE_NAMES
        metadata = trained.metadata
        assert metadata["label"] == "logreg newton C=10"
        assert len(metadata["split_sha256"]) == 64
        assert metadata["pca_components"] is None
        assert float(metadata["test_accuracy"]) >= 0.5

    def test_predict_whole_file(self, tmp_path, trained_path, voice_csv):
        out = tmp_path / "scores.csv"
        assert main(["predict", "--model", str(trained_path), "--input", str(voice_csv), "--out", str(out)]) == 0
        header, rows = read_csv_table(out)
        assert header == ["name", "probability", "label"]
        assert len(rows) == 195
        assert rows[0][0] == "phon_R01_S01_1"
        for _, probability, label in rows:
            assert 0.0 <= float(probability) <= 1.0
            assert label == str(int(float(probability) >= 0.5))

    def test_single_row_to_stdout(self, tmp_path, trained_path, capsys):
        frame = make_voice_frame(n_pd=1, n_healthy=0)[["name"] + list(FEATURE_NAMES)]
        path = write_voice_csv(tmp_path / "one.csv", frame)
        capsys.readouterr()
        assert main(["predict", "--model", str(trained_path), "--input", str(path)]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "name,probability,label"
        assert len(lines) == 2
        assert lines[1].startswith("phon_R01_S01_1,")

    def test_missing_column_is_a_data_error(self, tmp_path, trained_path, capsys):
        frame = make_voice_frame(n_pd=2, n_healthy=2).drop(columns=["PPE"])
        path = write_voice_csv(tmp_path / "narrow.csv", frame)
        assert main(["predict", "--model", str(trained_path), "--input", str(path)]) == 3
        assert "PPE" in capsys.readouterr().err

    def test_svm_scores_have_no_probability(self, tmp_path, voice_csv):
        model = tmp_path / "svm.json"
        out = tmp_path / "scores.csv"
        assert main(["train", "--model", "svm", "--data", str(voice_csv), "--save", str(model)]) == 0
        assert main(["predict", "--model", str(model), "--input", str(voice_csv), "--out", str(out)]) == 0
        _, rows = read_csv_table(out)
        assert {row[1] for row in rows} == {"NA"}

    @pytest.mark.parametrize("flags", [
        ["--model", "forest", "--n-estimators", "5"],
        ["--model", "gbdt", "--style", "oblivious", "--n-estimators", "5", "--pca"],
        ["--model", "neural", "--kind", "rnn", "--epochs", "2"],
    ])
    def test_other_models_train(self, tmp_path, small_voice_csv, flags):
        path = tmp_path / "m.json"
        assert main(["train", "--data", str(small_voice_csv), "--save", str(path)] + flags) == 0
        assert load_model(path).metadata["train_time_s"] >= 0

    def test_gbdt_unlimited_depth_is_kept(self, tmp_path, small_voice_csv):
        path = tmp_path / "deep.json"
        assert main(["train", "--data", str(small_voice_csv), "--save", str(path), "--model", "gbdt",
                     "--n-estimators", "3", "--max-depth", "None"]) == 0
        assert load_model(path).metadata["label"].endswith("depth=None")

    def test_oblivious_unlimited_depth_rejected(self, tmp_path, small_voice_csv, capsys):
        path = tmp_path / "obl.json"
        assert main(["train", "--data", str(small_voice_csv), "--save", str(path), "--model", "gbdt",
                     "--style", "oblivious", "--n-estimators", "3", "--max-depth", "None"]) == 2
        assert "max_depth" in capsys.readouterr().err
        assert not path.exists()


class TestOtherVerbs:
    def test_summarize_writes_table(self, tmp_path, small_voice_csv, capsys):
        assert main(["summarize", "--data", str(small_voice_csv), "--out", str(tmp_path)]) == 0
        header, rows = read_csv_table(tmp_path / "table1.csv")
        assert header[1:] == list(FEATURE_NAMES)
        assert rows[0][0] == "count"
        assert "Strongest correlations with status" in capsys.readouterr().out

    def test_summarize_and_heatmap_record_split(self, tmp_path, small_voice_dataset, small_voice_csv):
        digest = stratified_split(small_voice_dataset, 0.2, 5).digest()
        common = ["--data", str(small_voice_csv), "--seed", "5", "--test-fraction", "0.2"]
        assert main(["summarize", "--out", str(tmp_path)] + common) == 0
        assert main(["heatmap", "--out", str(tmp_path / "heatmap.svg")] + common) == 0
        for name in ("table1.csv", "table1.md", "heatmap.svg"):
            text = (tmp_path / name).read_text(encoding="utf-8")
            assert "seed=5" in text, name
            assert f"split_sha256={digest}" in text, name

    def test_heatmap_into_directory(self, tmp_path, small_voice_csv):
        assert main(["heatmap", "--data", str(small_voice_csv), "--out", str(tmp_path / "figs")]) == 0
        assert (tmp_path / "figs" / "heatmap.svg").exists()

    def test_bench_without_suites(self, tmp_path, small_voice_csv, capsys):
        settings = tmp_path / "settings.json"
        settings.write_text(json.dumps({"suites": []}), encoding="utf-8")
        code = main(["bench", "--data", str(small_voice_csv), "--config", str(settings),
                     "--out", str(tmp_path / "out")])
        assert code == 0
        assert "nothing written" in capsys.readouterr().out
        assert not (tmp_path / "out").exists()

    def test_bench_table1(self, tmp_path, small_voice_csv, capsys):
        out = tmp_path / "out"
        assert main(["bench", "--data", str(small_voice_csv), "--suite", "table1", "--out", str(out)]) == 0
        assert (out / "table1.csv").exists()
        assert (out / "provenance.json").exists()

    def test_bench_unknown_suite(self, tmp_path, small_voice_csv):
        assert main(["bench", "--data", str(small_voice_csv), "--suite", "knn", "--out", str(tmp_path)]) == 2
