import numpy as np
import pytest
from pytest import approx

from core.errors import DataFormatError
from core.io import (
    read_edge_list,
    read_omega_csv,
    read_signal_csv,
    write_edge_list,
    write_omega_csv,
    write_signal_csv,
)
from models.graph import ConnectionGraph
from tests.graphs import weighted_path


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


class TestEdgeList:
    def test_round_trip(self, tmp_path):
        graph = ConnectionGraph.build([(0, 1, 0.1, 1 / 3), (1, 3, 2.5, -np.pi / 7)], n_nodes=5)
        path = tmp_path / "graph.txt"
        write_edge_list(graph, path)
        assert path.read_text().splitlines()[0] == "# nodes: 5"
        loaded = read_edge_list(path)
        assert loaded.n_nodes == 5
        for read, written in zip(loaded.edge_list(), graph.edge_list()):
            assert read == approx(written, abs=1e-15)

    def test_comments_and_blank_lines(self, tmp_path):
        path = _write(tmp_path / "g.txt", "# a comment\n\n0 1 1.0 0.5\n  \n1 2 2.0 -0.7\n")
        graph = read_edge_list(path)
        assert graph.n_nodes == 3
        assert graph.angle(1, 0) == approx(-0.5)

    @pytest.mark.parametrize(
        "body, line, fragment",
        [
            ("0 1 1.0 0.5\n0 2 1.0\n", 2, "got 3 fields"),
            ("0 1 1.0 0.5\n# x\n1 x 1.0 0.2\n", 3, "Cannot parse"),
            ("0 0 1.0 0.5\n", 1, "Self-loop"),
            ("0 1 0.0 0.5\n", 1, "nonpositive weight"),
            ("0 -1 1.0 0.5\n", 1, "Negative node id"),
        ],
    )
    def test_malformed_lines_report_their_number(self, tmp_path, body, line, fragment):
        path = _write(tmp_path / "bad.txt", body)
        with pytest.raises(DataFormatError, match=fragment) as info:
            read_edge_list(path)
        assert info.value.line == line
        assert f"bad.txt:{line}" in str(info.value)

    def test_duplicate_edge_points_to_first_line(self, tmp_path):
        path = _write(tmp_path / "dup.txt", "0 1 1.0 0.5\n1 2 1.0 0.1\n1 0 1.0 -0.5\n")
        with pytest.raises(DataFormatError, match="first given on line 1") as info:
            read_edge_list(path)
        assert info.value.line == 3

    def test_node_outside_declared_range(self, tmp_path):
        path = _write(tmp_path / "g.txt", "# nodes: 2\n0 2 1.0 0.5\n")
        with pytest.raises(DataFormatError):
            read_edge_list(path)

    def test_bad_header_and_missing_file(self, tmp_path):
        with pytest.raises(DataFormatError, match="header"):
            read_edge_list(_write(tmp_path / "h.txt", "# nodes: many\n"))
        with pytest.raises(DataFormatError, match="not found"):
            read_edge_list(tmp_path / "absent.txt")


class TestSignals:
    def test_signal_round_trip(self, tmp_path, signal_rng):
        signal = signal_rng.standard_normal(6) + 1j * signal_rng.standard_normal(6)
        path = tmp_path / "g.csv"
        write_signal_csv(signal, path)
        assert path.read_text().splitlines()[0] == "node,re,im"
        assert np.array_equal(read_signal_csv(path, 6), signal)

    def test_rows_may_come_in_any_order(self, tmp_path):
        path = _write(tmp_path / "g.csv", "node,re,im\n1,2.0,0.0\n0,0.0,1.0\n")
        assert read_signal_csv(path).tolist() == [1j, 2.0]

    def test_missing_node(self, tmp_path):
        path = _write(tmp_path / "g.csv", "node,re,im\n0,1.0,0.0\n2,1.0,0.0\n")
        with pytest.raises(DataFormatError, match="Missing values for nodes \\[1\\]"):
            read_signal_csv(path, 3)

    def test_wrong_header(self, tmp_path):
        path = _write(tmp_path / "g.csv", "id,real,imag\n0,1.0,0.0\n")
        with pytest.raises(DataFormatError, match="node,re,im"):
            read_signal_csv(path)

    def test_bad_rows(self, tmp_path):
        with pytest.raises(DataFormatError, match="columns") as info:
            read_signal_csv(_write(tmp_path / "a.csv", "node,re,im\n0,1.0\n"))
        assert info.value.line == 2
        with pytest.raises(DataFormatError, match="Duplicate node id 0"):
            read_signal_csv(_write(tmp_path / "b.csv", "node,re,im\n0,1,0\n0,2,0\n"))
        with pytest.raises(DataFormatError, match="out of range"):
            read_signal_csv(_write(tmp_path / "c.csv", "node,re,im\n0,1,0\n5,2,0\n"), 2)

    def test_omega_round_trip(self, tmp_path):
        omega = np.array([0.0, np.pi, -1 / 3])
        path = tmp_path / "omega.csv"
        write_omega_csv(omega, path)
        assert path.read_text().splitlines()[0] == "node,omega"
        assert np.array_equal(read_omega_csv(path, 3), omega)

    def test_edge_list_of_fixture_graph(self, tmp_path):
        path = tmp_path / "path.txt"
        write_edge_list(weighted_path(), path)
        assert read_edge_list(path).weight(1, 2) == 2.0
