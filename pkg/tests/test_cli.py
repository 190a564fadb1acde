import csv
import io

import numpy as np
import pytest

from fastmm.algo_spec import get_algorithm, serialize_algorithm
from fastmm.cli import ERROR_COLUMNS, PERF_COLUMNS, main, parse_levels
from fastmm.matrices import read_matrix


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


class TestValidate:
    def test_valid(self, tmp_path, capsys):
        path = tmp_path / "s.alg"
        path.write_text(serialize_algorithm(get_algorithm("442")))
        assert main(["validate", str(path)]) == 0
        assert "valid <4,4,2> rank 26" in capsys.readouterr().out

    def test_invalid(self, tmp_path, capsys):
        text = serialize_algorithm(get_algorithm("strassen"))
        lines = text.splitlines()
        idx = lines.index("W") + 1
        lines[idx] = " ".join("0" for _ in lines[idx].split())
        path = tmp_path / "bad.alg"
        path.write_text("\n".join(lines) + "\n")
        assert main(["validate", str(path)]) == 1
        assert "INVALID" in capsys.readouterr().out

    def test_parse_error(self, tmp_path, capsys):
        path = tmp_path / "bad.alg"
        path.write_text("name t\ndims 1 1\n")
        assert main(["validate", str(path)]) == 2
        assert "line 2" in capsys.readouterr().err


class TestAnalyze:
    def test_text(self, capsys):
        assert main(["analyze", "442"]) == 0
        out = capsys.readouterr().out
        assert "E 89" in out and "legacyE 125" in out

    def test_csv(self, capsys):
        assert main(["analyze", "strassen", "323", "--format", "csv", "--levels", "1..2"]) == 0
        got = rows(capsys.readouterr().out)
        assert len(got) == 4 and got[0]["Q"] == "8" and got[2]["E"] == "20"

    def test_plan(self, capsys):
        assert main(["analyze", "--plan", "strassen:L=2", "--k", "4"]) == 0
        assert "xi_max 144" in capsys.readouterr().out


class TestRuns:
    def test_gen_and_multiply(self, tmp_path, capsys):
        a, b, c = (str(tmp_path / x) for x in ("a.bin", "b.bin", "c.bin"))
        assert main(["gen", "--m", "20", "--k", "16", "--n", "12", "--out-a", a, "--out-b", b]) == 0
        assert main(["multiply", a, b, "--algo", "strassen", "--levels", "2",
                     "--out", c, "--check"]) == 0
        out = capsys.readouterr().out
        err = float(out.split("max_abs_err ")[1].split()[0])
        bound = float(out.split("bound ")[1].split()[0])
        assert err <= bound
        np.testing.assert_allclose(read_matrix(c), read_matrix(a) @ read_matrix(b), rtol=1e-13)

    def test_check_finite(self, tmp_path):
        a = tmp_path / "a.txt"
        a.write_text("1 nan\n2 3\n")
        assert main(["multiply", str(a), str(a), "--check-finite"]) == 2

    def test_bench_error(self, capsys):
        assert main(["bench-error", "--m", "32", "--k", "32", "--n", "32", "--levels", "0..2",
                     "--scaling", "none,repeated:2", "--algo", "strassen,323"]) == 0
        got = rows(capsys.readouterr().out)
        assert list(got[0]) == ERROR_COLUMNS
        assert len(got) == 12
        assert all(float(r["max_abs_err"]) <= float(r["bound"]) for r in got)
        assert {r["scaling"] for r in got} == {"none", "repeated:2"}

    def test_bench_perf(self, capsys):
        assert main(["bench-perf", "--m", "32", "--k", "32", "--n", "32", "--reps", "1"]) == 0
        got = rows(capsys.readouterr().out)
        assert list(got[0]) == PERF_COLUMNS
        assert got[0]["algo"] == "classical" and got[1]["algo"] == "strassen"

    def test_scale_trace(self, capsys):
        assert main(["scale", "--dist", "3", "--scaling", "repeated", "--no-pow2"]) == 0
        captured = capsys.readouterr()
        got = rows(captured.out)
        assert got[0]["kind"] == "O" and got[0]["tested"] == "0"
        assert "steps_taken" in captured.err

    def test_bad_algorithm(self, capsys):
        assert main(["bench-error", "--algo", "nope", "--m", "4", "--k", "4", "--n", "4"]) == 2

    def test_strict_fast_exclusive(self):
        with pytest.raises(SystemExit):
            main(["bench-error", "--strict", "--fast"])

    def test_levels(self):
        assert parse_levels("1..3") == [1, 2, 3]
        assert parse_levels("0,2") == [0, 2]
