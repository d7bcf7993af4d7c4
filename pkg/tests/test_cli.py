import csv
import json
from pathlib import Path

import pytest

from cli import main


def _records(capsys):
    return [json.loads(line) for line in capsys.readouterr().out.splitlines() if line.startswith("{")]


@pytest.fixture
def generated(tmp_path, capsys):
    out = tmp_path / "graph.txt"
    code = main(
        [
            "generate", "--model", "er", "--param", "mean_degree=6", "--n", "40",
            "--eta", "0", "--bandwidth", "5", "--out", str(out), "--seed", "4",
        ]
    )
    assert code == 0
    (record,) = _records(capsys)
    return record


class TestGenerate:
    def test_writes_every_file(self, generated, tmp_path):
        assert generated["model"] == "er"
        assert generated["n_nodes"] <= 40
        for key in ("graph", "omega", "signal", "truth"):
            assert Path(generated[key]).exists()
        assert generated["signal"].endswith("graph.signal.csv")
        assert (tmp_path / "omega.csv").read_text().startswith("node,omega")

    def test_preset_with_overrides(self, tmp_path, capsys):
        out = tmp_path / "sbm.txt"
        assert main(["generate", "--preset", "sbm", "--n", "80", "--out", str(out)]) == 0
        (record,) = _records(capsys)
        assert record["model"] == "sbm"
        assert record["weakly_inconsistent"] is True

    def test_bad_param_syntax(self, tmp_path):
        with pytest.raises(SystemExit):
            main(["generate", "--model", "er", "--param", "mean_degree", "--out", str(tmp_path / "x.txt")])


class TestSmooth:
    @pytest.mark.parametrize("method", ["exact", "mtsf_gs"])
    def test_reports_errors(self, method, generated, tmp_path, capsys):
        out = tmp_path / "smoothed.csv"
        code = main(
            [
                "smooth", generated["graph"], generated["signal"], "--method", method,
                "--m", "20", "--q", "1.0", "--truth", generated["truth"], "--out", str(out),
            ]
        )
        assert code == 0
        (record,) = _records(capsys)
        assert record["method"] == method
        assert record["e_a"] >= 0 and record["e_r"] >= 0
        if method == "exact":
            assert record["e_a"] == pytest.approx(0.0, abs=1e-12)
        assert out.read_text().startswith("node,re,im")

    def test_auto_q_needs_truth(self, generated, capsys):
        code = main(["smooth", generated["graph"], generated["signal"], "--q", "auto"])
        assert code == 2
        assert "--truth" in capsys.readouterr().err

    def test_signal_of_wrong_size(self, generated, tmp_path, capsys):
        signal = tmp_path / "short.csv"
        signal.write_text("node,re,im\n0,1.0,0.0\n", encoding="utf-8")
        assert main(["smooth", generated["graph"], str(signal)]) == 2
        assert "Missing values" in capsys.readouterr().err


class TestSync:
    @pytest.mark.parametrize("smoother", ["ust", "exact"])
    def test_recovers_clean_phases(self, smoother, generated, capsys):
        code = main(["sync", generated["graph"], "--smoother", smoother, "--k", "30", "--truth", generated["omega"]])
        assert code == 0
        (record,) = _records(capsys)
        assert record["e_s"] < 1e-6
        if smoother == "exact":
            assert len(record["history"]) == 31
        else:
            assert "history" not in record


class TestOracleCheck:
    def test_triangle_passes(self, tmp_path, capsys):
        graph = tmp_path / "triangle.txt"
        graph.write_text("0 1 1.0 0.3\n1 2 1.0 0.3\n2 0 1.0 0.3\n", encoding="utf-8")
        assert main(["oracle-check", str(graph), "--q", "0.5"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["passed"] is True
        assert report["n_forests"] == 17

    def test_too_large_for_enumeration(self, tmp_path, capsys):
        graph = tmp_path / "path.txt"
        graph.write_text("".join(f"{k} {k + 1} 1.0 0.0\n" for k in range(9)), encoding="utf-8")
        assert main(["oracle-check", str(graph)]) == 2
        assert "Enumeration is limited" in capsys.readouterr().err


class TestBench:
    def test_writes_rows(self, tmp_path):
        config = tmp_path / "bench.json"
        config.write_text(
            json.dumps(
                {
                    "graph": {"params": {"model": "er", "n": 50, "mean_degree": 6.0}},
                    "signal": {"bandwidth": 4},
                    "q": 1.0,
                    "arms": [
                        {"method": "exact", "values": [1]},
                        {"method": "cg", "values": [2, 8]},
                        {"method": "mtsf_rb", "values": [2, 4]},
                    ],
                    "trials": 2,
                }
            ),
            encoding="utf-8",
        )
        out = tmp_path / "bench.csv"
        assert main(["bench", str(config), "--out", str(out)]) == 0
        with out.open(newline="") as handle:
            rows = list(csv.DictReader(handle))
        assert len(rows) == 5
        assert [row["arm"] for row in rows] == ["exact", "cg", "cg", "mtsf_rb", "mtsf_rb"]

    def test_invalid_config(self, tmp_path, capsys):
        config = tmp_path / "bad.json"
        config.write_text(
            json.dumps({"graph": {"preset": "er"}, "arms": [{"method": "nope"}]}), encoding="utf-8"
        )
        assert main(["bench", str(config)]) == 2
        assert "arms.0.method" in capsys.readouterr().err


class TestReproducibility:
    def _generate(self, directory, capsys):
        directory.mkdir()
        out = directory / "graph.txt"
        argv = [
            "generate", "--model", "er", "--param", "mean_degree=6", "--n", "60",
            "--bandwidth", "5", "--out", str(out), "--seed", "12",
        ]
        assert main(argv) == 0
        (record,) = _records(capsys)
        return record

    def test_same_seed_gives_identical_files(self, tmp_path, capsys):
        first = self._generate(tmp_path / "a", capsys)
        second = self._generate(tmp_path / "b", capsys)
        for key in ("graph", "omega", "signal", "truth"):
            assert Path(first[key]).read_bytes() == Path(second[key]).read_bytes()

        outputs = []
        for name in ("first.csv", "second.csv"):
            out = tmp_path / name
            argv = [
                "smooth", first["graph"], first["signal"], "--method", "mtsf_gs",
                "--m", "8", "--seed", "5", "--out", str(out),
            ]
            assert main(argv) == 0
            outputs.append(out.read_bytes())
        assert outputs[0] == outputs[1]

        phases = []
        for name in ("first-sync.csv", "second-sync.csv"):
            out = tmp_path / name
            argv = ["sync", first["graph"], "--smoother", "mtsf_rb", "--k", "10", "--seed", "5", "--out", str(out)]
            assert main(argv) == 0
            phases.append(out.read_bytes())
        assert phases[0] == phases[1]
