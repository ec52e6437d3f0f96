import json

import pytest

from degenflow.errors import ReportIOError
from degenflow.models import CroccoReport, ErrorResponse, ExperimentConfig, StabilityReport
from degenflow.utils.reports import (
    canonical_json,
    emit_report,
    run_id_for,
    write_csv,
    write_error,
    write_json,
)


def _stability() -> StabilityReport:
    return StabilityReport(
        times=[0.0, 0.5], l1_distances=[0.25, 0.125], initial_distance=0.25, final_distance=0.125,
        ratio=0.5, c_declared=0.0, gronwall_holds=True, worst_gronwall_violation=-0.125,
        nonincreasing=True, passed=True,
    )


class TestEmitReport:
    def test_empty_list_writes_nothing(self, tmp_path):
        out = tmp_path / "never"
        assert emit_report([], out) == []
        assert not out.exists()

    def test_unknown_report_type(self, tmp_path):
        with pytest.raises(TypeError):
            emit_report([ErrorResponse(detail="not a report")], tmp_path)

    def test_files_in_order(self, tmp_path):
        crocco = CroccoReport(profile="linear", samples=10, w_law_error=0.0, round_trip_error=0.0,
                              tolerance=1e-3, passed=True)
        files = emit_report([_stability(), crocco], tmp_path)
        assert files == ["stability_report.json", "l1_series.csv", "crocco_report.json"]
        assert (tmp_path / "l1_series.csv").read_text() == "t,l1_distance\n0,0.25\n0.5,0.125\n"
        data = json.loads((tmp_path / "crocco_report.json").read_text())
        assert data["profile"] == "linear"

    def test_json_is_canonical(self, tmp_path):
        emit_report([_stability()], tmp_path)
        text = (tmp_path / "stability_report.json").read_text()
        assert text == canonical_json(_stability().model_dump(mode="json"))
        assert text.endswith("\n")
        keys = list(json.loads(text))
        assert keys == sorted(keys)


class TestCsv:
    def test_value_formatting(self, tmp_path):
        write_csv(tmp_path, "values.csv", ("a", "b", "c", "d", "e"), [(0.1, True, None, 3, False)])
        assert (tmp_path / "values.csv").read_text() == "a,b,c,d,e\n0.10000000000000001,true,,3,false\n"

    def test_header_only(self, tmp_path):
        write_csv(tmp_path, "empty.csv", ("x", "u"), [])
        assert (tmp_path / "empty.csv").read_text() == "x,u\n"


class TestRunId:
    def test_stable_and_sensitive(self):
        a = ExperimentConfig(kind="crocco_demo")
        b = ExperimentConfig(kind="crocco_demo")
        c = ExperimentConfig(kind="crocco_demo", seed=1)
        assert run_id_for(a) == run_id_for(b)
        assert run_id_for(a) != run_id_for(c)
        assert len(run_id_for(a)) == 16
        int(run_id_for(a), 16)


class TestWriteFailures:
    def test_directory_under_a_file(self, tmp_path):
        blocker = tmp_path / "blocker"
        blocker.write_text("occupied")
        with pytest.raises(ReportIOError) as excinfo:
            write_json(blocker / "run", "report.json", {})
        assert excinfo.value.error_code == "report_io"

    def test_error_file_is_best_effort(self, tmp_path):
        blocker = tmp_path / "blocker"
        blocker.write_text("occupied")
        assert write_error(ErrorResponse(detail="boom"), blocker / "run") is None
        assert write_error(ErrorResponse(detail="boom", error_code="x"), tmp_path) == "error.json"
        assert json.loads((tmp_path / "error.json").read_text())["error_code"] == "x"
