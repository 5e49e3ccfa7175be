import sys

import auto_pipeline


def test_steps_pass_arguments_through():
    steps = auto_pipeline.pipeline_steps(["--data", "voice.csv"])
    assert [description for _, description in steps] == [
        "Data validation", "Summary statistics", "Correlation heatmap", "Benchmark suites",
    ]
    for command, _ in steps:
        assert command[:3] == [sys.executable, "-m", "pdbench.cli"]
        assert command[-2:] == ["--data", "voice.csv"]
    assert steps[-1][0][3:6] == ["bench", "--suite", "all"]


def test_failed_step_stops_pipeline(monkeypatch):
    calls = []

    def fake_run(command, description):
        calls.append(description)
        return description != "Summary statistics"

    monkeypatch.setattr(auto_pipeline, "run_command", fake_run)
    assert auto_pipeline.main([]) != 0
    assert calls == ["Data validation", "Summary statistics"]
