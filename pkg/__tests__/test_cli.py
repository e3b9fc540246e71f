import json

import pytest

from kacspec.cli import build_parser, main
from kacspec.errors import ConsistencyError
from kacspec.experiments import EXPERIMENTS
from kacspec.experiments.models import ExperimentRecord
from kacspec.experiments.schemas import ExperimentCheck, ExperimentReport


def _register(monkeypatch, name, runner):
    record = ExperimentRecord(name=name, runner=runner, description="test record")
    monkeypatch.setitem(EXPERIMENTS._records, name, record)


def test_parser_has_one_command_per_experiment():
    parser = build_parser()
    args = parser.parse_args(["spectrum", "--s", "0.4", "--K", "12", "--format", "json"])
    assert args.command == "spectrum"
    assert args.output_format == "json"
    assert args.half_width is None
    with pytest.raises(SystemExit):
        parser.parse_args(["not-an-experiment"])


def test_spectrum_to_file(tmp_path):
    target = tmp_path / "spectrum.csv"
    assert main(["spectrum", "--s", "0.5", "--K", "20", "--out", str(target)]) == 0
    lines = target.read_text().splitlines()
    header = json.loads(lines[0][2:])
    assert header["experiment"] == "spectrum"
    assert header["config"]["K"] == 20
    assert lines[1] == "k,lambda,lambda_prime,lambda_doubleprime,ratio_to_c0_ks,deviation_from_c0_ks"
    assert len(lines) == 2 + 21


def test_output_is_deterministic(tmp_path):
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    for target in (first, second):
        assert main(["spectrum", "--K", "16", "--out", str(target)]) == 0
    assert first.read_bytes() == second.read_bytes()


def test_json_to_stdout(capsys):
    assert main(["spectrum", "--K", "8", "--format", "json"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["experiment"] == "spectrum"
    assert len(data["rows"]) == 9


def test_invalid_input_exits_2(capsys):
    assert main(["spectrum", "--s", "1.5"]) == 2
    assert main(["mehler-check", "--points", "100"]) == 2
    assert capsys.readouterr().out == ""


def test_unwritable_output_exits_5(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["spectrum", "--K", "8", "--out", str(blocker / "spectrum.csv")]) == 5


def test_tolerance_breach_exits_3(monkeypatch, capsys):
    def runner(config):
        return ExperimentReport(
            experiment="breach",
            columns=["x"],
            rows=[[1.0]],
            checks=[ExperimentCheck(name="gate", value=1.0, threshold=0.1, passed=False)],
        )

    _register(monkeypatch, "breach", runner)
    assert main(["breach"]) == 3
    # the artifact is still written so the breach can be inspected
    assert capsys.readouterr().out.startswith("# ")


def test_disagreeing_routes_exit_4(monkeypatch):
    def runner(config):
        raise ConsistencyError("routes disagree", {"gap": 1.0})

    _register(monkeypatch, "disagree", runner)
    assert main(["disagree"]) == 4


def test_matrix_out_writes_the_operator(tmp_path):
    target, matrix = tmp_path / "mehler.csv", tmp_path / "matrix.csv"
    argv = ["mehler-check", "--K", "4", "--t", "1", "--out", str(target), "--matrix-out", str(matrix)]
    assert main(argv) == 0
    lines = matrix.read_text().splitlines()
    header = json.loads(lines[0][2:])
    assert header["experiment"] == "operator-matrix"
    assert header["config"]["symbol"] == "mehler"
    assert header["config"]["K"] == 4
    assert lines[1] == "i,j,re,im"
    assert len(lines) == 2 + 25
    assert "matrix_output" not in json.loads(target.read_text().splitlines()[0][2:])["config"]


def test_matrix_out_needs_a_matrix(tmp_path, capsys):
    assert main(["spectrum", "--K", "8", "--matrix-out", str(tmp_path / "m.csv")]) == 2
    assert capsys.readouterr().out == ""
    assert not (tmp_path / "m.csv").exists()
