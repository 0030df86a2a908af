"""Artifact writer tests: formats, round trips, byte determinism."""

import json

import numpy as np
import pytest

from nlslab import reporting
from nlslab.errors import ConfigError

STAMP = {"code_version": "0.1.0", "config_sha256": "abc123"}


class TestTables:
    def test_round_trip_preserves_doubles(self, tmp_path):
        rows = [
            (0.1, 1.0 / 3.0),
            (1e-300, -0.0),
            (np.pi, 2.0**-52),
        ]
        path = reporting.write_table(tmp_path / "t.csv", ("a", "b"), rows, STAMP)
        cols, data = reporting.read_table(path)
        assert cols == ["a", "b"]
        assert data.shape == (3, 2)
        for (xa, xb), (ya, yb) in zip(rows, data):
            assert float(xa) == ya
            assert float(xb) == yb

    def test_header_carries_stamp(self, tmp_path):
        path = reporting.write_table(tmp_path / "t.csv", ("a",), [(1.5,)], STAMP)
        text = path.read_text()
        assert "# code_version = 0.1.0" in text
        assert "# config_sha256 = abc123" in text
        assert text.splitlines()[2] == "a"

    def test_mixed_cell_types(self, tmp_path):
        path = reporting.write_table(
            tmp_path / "t.csv", ("m", "kind", "v"), [(3, "plus", 1.25)], None
        )
        assert path.read_text().splitlines()[1] == "3,plus,1.25"

    def test_ragged_row_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            reporting.write_table(tmp_path / "t.csv", ("a", "b"), [(1.0,)], None)

    def test_body_excludes_header(self, tmp_path):
        pa = reporting.write_table(tmp_path / "a.csv", ("x",), [(2.0,)], STAMP)
        pb = reporting.write_table(
            tmp_path / "b.csv", ("x",), [(2.0,)], {"config_sha256": "other"}
        )
        assert pa.read_bytes() != pb.read_bytes()
        assert reporting.table_body(pa) == reporting.table_body(pb)

    def test_byte_determinism(self, tmp_path):
        rows = np.linspace(0.0, 1.0, 50).reshape(25, 2)
        pa = reporting.write_table(tmp_path / "a.csv", ("x", "y"), rows, STAMP)
        pb = reporting.write_table(tmp_path / "b.csv", ("x", "y"), rows, STAMP)
        assert pa.read_bytes() == pb.read_bytes()

    def test_matrix_dump(self, tmp_path):
        mat = np.arange(6.0).reshape(2, 3)
        path = reporting.write_matrix(tmp_path / "m.csv", mat, None)
        lines = path.read_text().splitlines()
        assert lines[0] == "0,1,2"
        with pytest.raises(ConfigError):
            reporting.write_matrix(tmp_path / "bad.csv", np.arange(3.0), None)

    def test_read_requires_header(self, tmp_path):
        empty = tmp_path / "e.csv"
        empty.write_text("# only a comment\n")
        with pytest.raises(ConfigError):
            reporting.read_table(empty)


class TestJson:
    def test_sorted_keys_and_provenance(self, tmp_path):
        path = reporting.write_json(tmp_path / "o.json", {"b": 1, "a": 2}, STAMP)
        doc = json.loads(path.read_text())
        assert doc["provenance"] == STAMP
        keys = list(json.loads(path.read_text()).keys())
        assert keys == sorted(keys)

    def test_nan_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            reporting.write_json(tmp_path / "o.json", {"x": float("nan")}, None)


class TestPlots:
    @pytest.fixture
    def table(self, tmp_path):
        x = np.linspace(1.0, 10.0, 20)
        return reporting.write_table(
            tmp_path / "data.csv",
            ("s", "f", "g"),
            np.column_stack([x, x**2, np.exp(-x)]),
            STAMP,
        )

    def test_svg_written_and_deterministic(self, table, tmp_path):
        pa = reporting.line_plot(table, "s", ["f", "g"], tmp_path / "a.svg", logy=True)
        pb = reporting.line_plot(table, "s", ["f", "g"], tmp_path / "b.svg", logy=True)
        body = pa.read_bytes()
        assert body.startswith(b"<?xml")
        assert body == pb.read_bytes()

    def test_missing_column(self, table, tmp_path):
        with pytest.raises(ConfigError, match="missing column"):
            reporting.line_plot(table, "s", ["nope"], tmp_path / "x.svg")

    def test_empty_table(self, tmp_path):
        path = reporting.write_table(tmp_path / "empty.csv", ("s", "f"), [], None)
        with pytest.raises(ConfigError, match="no data rows"):
            reporting.line_plot(path, "s", ["f"], tmp_path / "x.svg")
