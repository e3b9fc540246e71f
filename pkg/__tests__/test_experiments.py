import json
import math

import pytest

from kacspec.errors import ArtifactIOError, CapabilityError, ConfigValidationError, DomainError
from kacspec.experiments import EXPERIMENTS, ExperimentRegistry
from kacspec.experiments.artifacts import render, render_csv, render_json, write_artifact
from kacspec.experiments.models import ExperimentRecord
from kacspec.experiments.schemas import ExperimentCheck, ExperimentReport, RunConfig, build_config


def _report(passed=True):
    return ExperimentReport(
        experiment="dummy",
        config={"s": 0.5},
        columns=["k", "value"],
        rows=[[0, 1.5], [1, float("nan")], [2, None]],
        checks=[ExperimentCheck(name="gate", value=0.1, threshold=0.5, passed=passed)],
        summary={"inf": float("inf"), "nested": {1: [float("nan"), 2.0]}},
    )


def test_config_defaults_and_validation():
    config = build_config(s=0.3, K=None)
    assert config.s == 0.3
    assert config.K == 20
    assert config.model_fields_set == {"s"}
    for bad in ({"s": 1.5}, {"points": 100}, {"d": 4}, {"symbol": "l3"}, {"unknown": 1}):
        with pytest.raises(ConfigValidationError):
            build_config(**bad)
    assert "output" not in build_config(output="x.csv").echo()


def test_profile_defaults_fill_unset_fields():
    record = ExperimentRecord(name="x", runner=lambda c: _report(), description="", defaults={"quick": {"K": 7, "order": 4}})
    resolved = record.resolve(build_config(profile="quick", K=3))
    assert resolved.K == 3
    assert resolved.order == 4
    assert record.resolve(build_config(profile="full")).K == 20


def test_report_sanitizes_non_finite_values():
    report = _report()
    assert report.rows[1] == [1.0, None]
    assert report.summary == {"inf": None, "nested": {"1": [None, 2.0]}}
    assert report.passed
    assert _report(passed=False).failed_checks() == ["gate"]


def test_registry_register_and_run():
    registry = ExperimentRegistry()
    seen = []

    def runner(config):
        seen.append(config)
        return _report()

    registry.register(ExperimentRecord(name="b", runner=runner, description="second", defaults={"quick": {"K": 5}}))
    registry.register(ExperimentRecord(name="a", runner=runner, description="first"))
    assert registry.names() == ["a", "b"]
    with pytest.raises(DomainError):
        registry.register(ExperimentRecord(name="a", runner=runner, description="again"))
    registry.register(ExperimentRecord(name="a", runner=runner, description="again"), replace=True)
    assert registry.get("a").description == "again"

    registry.run("b", build_config(profile="quick"))
    assert seen[-1].K == 5
    with pytest.raises(DomainError):
        registry.run("missing", RunConfig())


def test_registry_records_runner_errors():
    registry = ExperimentRegistry()

    def broken(config):
        raise RuntimeError("boom")

    registry.register(ExperimentRecord(name="broken", runner=broken, description=""))
    with pytest.raises(RuntimeError):
        registry.run("broken", RunConfig())
    assert registry.get("broken").error == "boom"


def test_builtin_experiments_are_registered():
    assert EXPERIMENTS.names() == [
        "asymptotics",
        "bobylev-check",
        "diag-check",
        "evolve",
        "mehler-check",
        "spectrum",
        "symbol-grid",
    ]


def test_csv_artifact_layout():
    text = render_csv(_report())
    lines = text.split("\n")
    assert lines[0].startswith("# ")
    header = json.loads(lines[0][2:])
    assert header["experiment"] == "dummy"
    assert "rows" not in header
    assert lines[1] == "k,value"
    assert lines[2] == "0,1.5"
    assert lines[3] == "1,nan"
    assert text.endswith("\n")
    assert render(_report(), "csv") == text


def test_csv_uses_round_trip_precision():
    report = ExperimentReport(experiment="x", columns=["v"], rows=[[0.1 + 0.2]])
    assert render_csv(report).split("\n")[2] == "0.30000000000000004"


def test_json_artifact_is_strict():
    data = json.loads(render_json(_report()))
    assert data["rows"][1] == [1.0, None]
    assert data["summary"]["inf"] is None
    with pytest.raises(ArtifactIOError):
        render(_report(), "xml")


def test_write_artifact(tmp_path):
    target = write_artifact("a,b\n", tmp_path / "out" / "table.csv")
    assert target.read_text() == "a,b\n"
    assert not (tmp_path / "out" / "table.csv.tmp").exists()
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(ArtifactIOError):
        write_artifact("x", blocker / "table.csv")


def test_spectrum_experiment():
    report = EXPERIMENTS.run("spectrum", build_config(K=30))
    assert report.passed
    assert len(report.rows) == 31
    assert report.rows[0][1] == 0.0
    assert report.rows[1][3] is None
    assert report.summary["smallest_active_eigenvalue"] > 0.0
    assert report.config["K"] == 30


def test_symbol_grid_experiment():
    report = EXPERIMENTS.run("symbol-grid", build_config(profile="quick"))
    assert report.columns == ["v", "xi", "lambda", "l1", "l2", "expansion_N", "residual"]
    assert len(report.rows) == 41 * 41
    assert [check.name for check in report.checks] == ["finite", "gaussian_decay_ratio"]
    assert report.passed
    assert report.summary["order"] == 2
    for v, xi, lam, l1, l2, expansion, residual in report.rows[::97]:
        assert lam == pytest.approx(1.0 + xi ** 2 + v ** 2 / 4.0, rel=1e-14)
        assert residual == pytest.approx(l1 - expansion, abs=1e-12)


def test_symbol_grid_expansion_tracks_l1_far_out():
    report = EXPERIMENTS.run("symbol-grid", build_config(points=8, half_width=20.0, order=2))
    assert len(report.rows) == 9 * 9
    corner = max(report.rows, key=lambda row: row[2])
    assert corner[2] == pytest.approx(1.0 + 20.0 ** 2 * 1.25)
    assert abs(corner[6]) <= 1e-3 * abs(corner[3])


@pytest.mark.parametrize("t", [0.1, 1.0])
def test_mehler_check_experiment(t):
    report = EXPERIMENTS.run("mehler-check", build_config(K=10, t=t))
    assert report.passed
    assert ("kernel_route_deviation" in report.summary) == (t == 1.0)
    for k, diagonal, expected, deviation, laguerre in report.rows:
        assert expected == pytest.approx(math.exp(-t * (k + 0.5)), rel=1e-14)
        assert abs(deviation) <= 1e-7
        assert laguerre == pytest.approx(expected, abs=1e-10)


def test_mehler_check_attaches_the_matrix():
    report = EXPERIMENTS.run("mehler-check", build_config(K=4, t=1.0))
    matrix = report.attachments["matrix"]
    assert matrix.experiment == "operator-matrix"
    assert matrix.columns == ["i", "j", "re", "im"]
    assert len(matrix.rows) == 25
    assert matrix.config["symbol"] == "mehler"
    assert matrix.config["s"] is None
    assert matrix.config["t"] == 1.0
    assert matrix.config["K"] == 4
    assert {"half_width", "xi_half_width", "points"} <= set(matrix.config)
    i, j, re, im = matrix.rows[6]
    assert (i, j) == (1, 1)
    assert re == pytest.approx(math.exp(-1.5), abs=1e-7)
    assert "attachments" not in json.loads(render_json(report))


@pytest.mark.parametrize("symbol", ["l1", "l2", "full"])
def test_diag_check_experiment(symbol):
    report = EXPERIMENTS.run("diag-check", build_config(K=20, symbol=symbol))
    assert report.passed
    assert report.summary["symbol"] == symbol
    assert report.summary["max_offdiag"] <= 1e-6
    assert max(abs(row[3]) for row in report.rows) <= 1e-6
    assert report.attachments["matrix"].config["s"] == 0.5


def test_diag_check_is_one_dimensional():
    with pytest.raises(CapabilityError):
        EXPERIMENTS.run("diag-check", build_config(K=4, d=2))


def test_bobylev_check_experiment():
    report = EXPERIMENTS.run("bobylev-check", build_config(K=4))
    assert report.passed
    assert [row[0] for row in report.rows] == [0, 1, 2, 3, 4]


def test_evolve_experiment_is_seeded():
    first = EXPERIMENTS.run("evolve", build_config(K=10, seed=5))
    second = EXPERIMENTS.run("evolve", build_config(K=10, seed=5))
    assert first.passed
    assert first.rows == second.rows
    assert first.summary["c_min"] > 0.0


def test_asymptotics_experiment():
    report = EXPERIMENTS.run("asymptotics", build_config(order=1))
    assert report.columns == ["lambda", "residual_0", "residual_1"]
    assert report.passed
    assert set(report.summary["leading_fits"]) == {"1", "2", "3"}


def test_asymptotics_gates_slopes_through_order_two():
    report = EXPERIMENTS.run("asymptotics", build_config(order=2))
    names = [check.name for check in report.checks]
    assert names[:3] == ["residual_slope_0", "residual_slope_1", "residual_slope_2"]
    assert report.passed
    assert report.summary["slopes"]["1"] == pytest.approx(-1.5, abs=0.15)
    assert report.summary["slopes"]["2"] == pytest.approx(-2.5, abs=0.15)


def test_bobylev_check_errors_are_relative_off_the_kernel():
    report = EXPERIMENTS.run("bobylev-check", build_config(K=6, s=0.25))
    assert report.passed
    assert [check.name for check in report.checks] == ["max_relative_error", "max_kernel_error", "max_offdiag"]
    for k, lam, oracle, error, _ in report.rows:
        if k in (0, 2):
            assert error == pytest.approx(abs(oracle - lam), abs=0.0)
        else:
            assert error == pytest.approx(abs(oracle - lam) / abs(lam), rel=1e-12)


def test_evolve_in_two_dimensions_uses_radial_modes():
    report = EXPERIMENTS.run("evolve", build_config(K=10, d=2, seed=3))
    assert report.passed
    assert report.summary["c_min"] > 0.0


def test_config_needs_two_hermite_modes():
    with pytest.raises(ConfigValidationError):
        build_config(K=1)
    assert build_config(K=2).K == 2
