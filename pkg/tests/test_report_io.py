import json

import numpy as np
import pytest

from relicov.bench import BenchRow, BenchTable, ScenarioConfig
from relicov.dataio import ingest_csv, load_matrix, load_scenario, save_scenario
from relicov.exceptions import DataValidationError
from relicov.mcmc import McmcChain
from relicov.report import (
    emit_report,
    emit_trace_plot,
    parse_csv_report,
    parse_json_report,
    render_text,
    table_to_json,
)

SAMPLE_TABLE = BenchTable(
    rows=(
        BenchRow("KR20", 12.3, 2.1, 1000),
        BenchRow("EFA", 8.7, 1.9, 1000),
        BenchRow("COVMLE", 4.5, 0.8, 1000),
    )
)


class TestReports:
    def test_text_layout_has_three_columns(self):
        text = render_text(SAMPLE_TABLE)
        lines = text.splitlines()
        assert lines[0].split("  ")[0].strip() == "Method"
        assert "Average Error (%)" in lines[0]
        assert "Standard deviation" in lines[0]
        assert "KR20" in lines[2] and "12.3" in lines[2] and "2.1" in lines[2]

    def test_csv_round_trip_is_exact(self, tmp_path):
        table = BenchTable(
            rows=(BenchRow("EFA", 8.70000000001, 1.8999999999999999, 77, 3),)
        )
        path = tmp_path / "report.csv"
        emit_report(table, "csv", path)
        assert parse_csv_report(path).rows == table.rows

    def test_json_emit_parse_emit_is_byte_identical(self, tmp_path):
        p1 = tmp_path / "a.json"
        p2 = tmp_path / "b.json"
        emit_report(SAMPLE_TABLE, "json", p1)
        parsed = parse_json_report(p1)
        emit_report(parsed, "json", p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_json_keys_sorted(self):
        payload = json.loads(table_to_json(SAMPLE_TABLE))
        keys = list(payload["rows"][0].keys())
        assert keys == sorted(keys)

    def test_unknown_format(self, tmp_path):
        with pytest.raises(DataValidationError):
            emit_report(SAMPLE_TABLE, "xml", tmp_path / "x")

    def test_unwritable_path(self):
        with pytest.raises(DataValidationError):
            emit_report(SAMPLE_TABLE, "json", "/nonexistent-dir/report.json")


class TestTracePlot:
    def _chain(self, samples):
        return McmcChain(
            samples=np.asarray(samples, dtype=float),
            acceptance_rate=0.5,
            seed=0,
            proposal_sd=0.5,
        )

    def test_png_written(self, tmp_path):
        path = tmp_path / "trace.png"
        emit_trace_plot(self._chain(np.sin(np.linspace(0, 20, 1000))), path)
        data = path.read_bytes()
        assert len(data) > 0
        assert data[:8] == b"\x89PNG\r\n\x1a\n"

    def test_constant_chain_plots(self, tmp_path):
        path = tmp_path / "flat.png"
        emit_trace_plot(self._chain(np.full(100, 1.5)), path)
        assert path.exists()

    def test_empty_chain_rejected(self, tmp_path):
        with pytest.raises(DataValidationError):
            emit_trace_plot(self._chain([]), tmp_path / "x.png")

    def test_bench_bar_summary(self, tmp_path):
        from relicov.report import emit_bench_plot

        path = tmp_path / "bars.png"
        emit_bench_plot(SAMPLE_TABLE, path)
        assert path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


class TestIngestCsv:
    def _write(self, tmp_path, text, name="data.csv"):
        path = tmp_path / name
        path.write_text(text)
        return path

    def test_binary_items(self, tmp_path):
        path = self._write(tmp_path, "a,b\n1,1\n0,0\n")
        matrix = ingest_csv(path, "items")
        assert matrix.kind == "binary"
        assert matrix.n == 2 and matrix.k == 2

    def test_real_items_detected(self, tmp_path):
        from relicov.reliability import kr20

        path = self._write(tmp_path, "a,b\n0.5,1\n0,1\n")
        matrix = ingest_csv(path, "items")
        assert matrix.kind == "real"
        with pytest.raises(DataValidationError):
            kr20(matrix)

    def test_groups_layout(self, tmp_path):
        path = self._write(tmp_path, "group,value\ng1,1.0\ng2,2.0\ng1,3.0\ng3,4.0\n")
        groups = ingest_csv(path, "groups")
        assert groups.k == 3
        assert list(groups.sizes) == [2, 1, 1]
        assert groups.groups[0] == pytest.approx([1.0, 3.0])

    def test_samples_layout_uses_column_means(self, tmp_path):
        path = self._write(tmp_path, "x,y\n1,10\n3,30\n")
        samples = ingest_csv(path, "samples")
        assert samples.mu == pytest.approx([2.0, 20.0])

    def test_ragged_row_line_number(self, tmp_path):
        path = self._write(tmp_path, "a,b\n1,2\n3\n")
        with pytest.raises(DataValidationError, match="line 3"):
            ingest_csv(path, "items")

    def test_non_numeric_cell_line_number(self, tmp_path):
        path = self._write(tmp_path, "a,b\n1,2\nx,4\n")
        with pytest.raises(DataValidationError, match="line 3"):
            ingest_csv(path, "items")

    def test_empty_file(self, tmp_path):
        path = self._write(tmp_path, "")
        with pytest.raises(DataValidationError):
            ingest_csv(path, "items")

    def test_unknown_layout(self, tmp_path):
        path = self._write(tmp_path, "a\n1\n")
        with pytest.raises(DataValidationError):
            ingest_csv(path, "wide")


class TestScenarioFiles:
    def test_save_load_round_trip(self, tmp_path):
        cfg = ScenarioConfig(
            d=3,
            basis_specs=({"kind": "ar1", "rho": 0.4}, {"kind": "identity"}),
            sigma_true=np.array([0.6, 0.4]),
            n=50,
            replications=2,
            seed=5,
        )
        path = tmp_path / "scenario.json"
        save_scenario(cfg, path)
        assert load_scenario(path).to_dict() == cfg.to_dict()

    def test_matrix_from_json_and_csv(self, tmp_path):
        mat = np.array([[1.0, 0.2], [0.2, 1.0]])
        jpath = tmp_path / "m.json"
        jpath.write_text(json.dumps(mat.tolist()))
        cpath = tmp_path / "m.csv"
        cpath.write_text("1.0,0.2\n0.2,1.0\n")
        assert np.allclose(load_matrix(jpath), mat)
        assert np.allclose(load_matrix(cpath), mat)

    def test_non_square_matrix_rejected(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("1.0,0.2\n")
        with pytest.raises(DataValidationError):
            load_matrix(path)
