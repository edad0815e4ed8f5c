import json
import subprocess
import sys

import pytest

from tsconsensus.cli import EXIT_ERROR, EXIT_INCONCLUSIVE, EXIT_OK, main, run_example
from tsconsensus.scenario import (
    BUILTIN,
    Scenario,
    ScenarioError,
    UnknownExample,
    load_builtin,
    parse_scenario,
)


def _cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def ex9_file(tmp_path):
    path = tmp_path / "ex9.json"
    path.write_text(load_builtin("ex9").to_json(), encoding="utf-8")
    return path


class TestDecompose:
    def test_inline(self, capsys):
        code, out, _ = _cli(capsys, "decompose", "--example", "inline1")
        assert code == EXIT_OK
        assert out.splitlines()[0] == "T0=1 T1=2 T2=3 T3=6 T4=inf"
        assert "[1, 2): 1 scattered points" in out

    def test_ex9_from_file(self, capsys, ex9_file):
        code, out, _ = _cli(capsys, "decompose", "--scenario", str(ex9_file))
        assert code == EXIT_OK
        assert out.splitlines()[0] == "T0=1 T1=12 T2=inf"

    def test_malformed_json(self, capsys, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{"name": "x",\n  "B": [1, }', encoding="utf-8")
        code, _, err = _cli(capsys, "decompose", "--scenario", str(bad))
        assert code == EXIT_ERROR
        assert "line 2" in err

    def test_schema_error_names_field(self, capsys, tmp_path):
        d = load_builtin("ex9").to_dict()
        d["gamma"] = {"kind": "constant"}
        path = tmp_path / "s.json"
        path.write_text(json.dumps(d), encoding="utf-8")
        code, _, err = _cli(capsys, "decompose", "--scenario", str(path))
        assert code == EXIT_ERROR
        assert "gamma" in err

    def test_missing_file(self, capsys, tmp_path):
        code, _, err = _cli(capsys, "decompose", "--scenario", str(tmp_path / "nope.json"))
        assert code == EXIT_ERROR
        assert err.startswith("tsconsensus: error:")

    def test_usage_error_exits_one(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["decompose"])
        assert info.value.code == EXIT_ERROR


class TestCertify:
    def test_ex5_text(self, capsys):
        code, out, _ = _cli(capsys, "certify", "--example", "ex5")
        assert code == EXIT_OK
        assert "ConstantGammaRemark" in out
        assert "-0.72" in out

    def test_ex9_json(self, capsys):
        code, out, _ = _cli(capsys, "certify", "--example", "ex9", "--json")
        assert code == EXIT_OK
        d = json.loads(out)
        assert d["route"] == "R6"
        corollary = next(r for r in d["routes"] if r["route"] == "Corollary1")
        assert any(c["name"].startswith("(e1)") and not c["pass"] for c in corollary["conditions"])

    def test_ex1(self, capsys):
        code, out, _ = _cli(capsys, "certify", "--example", "ex1", "--json")
        assert code == EXIT_OK
        assert json.loads(out)["route"] == "Corollary1"

    def test_inconclusive_exit_code(self, capsys):
        code, out, _ = _cli(capsys, "certify", "--example", "inline1")
        assert code == EXIT_INCONCLUSIVE
        assert "Inconclusive" in out


class TestSimulate:
    def test_csv_to_stdout(self, capsys):
        code, out, err = _cli(capsys, "simulate", "--example", "ex9", "--horizon", "14")
        assert code == EXIT_OK
        assert out.startswith("t,class,eps_norm,envelope,eps_1,eps_2,eps_3,eps_4\n")
        assert "final |eps|" in err
        assert "empirical c" in err

    def test_out_file(self, capsys, tmp_path):
        dest = tmp_path / "ex9.csv"
        code, out, _ = _cli(capsys, "simulate", "--example", "ex9", "--out", str(dest), "--step", "0.01")
        assert code == EXIT_OK
        assert "final |eps|" in out
        rows = dest.read_text().splitlines()
        assert rows[0].startswith("t,class")
        assert rows[-1].startswith("25,")

    def test_zero_start(self, capsys, tmp_path):
        d = load_builtin("ex9").to_dict()
        d["epsilon0"] = [0, 0, 0, 0]
        path = tmp_path / "zero.json"
        path.write_text(json.dumps(d), encoding="utf-8")
        code, out, _ = _cli(capsys, "simulate", "--scenario", str(path), "--step", "0.01")
        assert code == EXIT_OK
        norms = [float(row.split(",")[2]) for row in out.splitlines()[1:]]
        assert norms and all(v == 0.0 for v in norms)


class TestExample:
    def test_writes_files(self, capsys, tmp_path):
        code, out, _ = _cli(capsys, "example", "ex9", "--out", str(tmp_path), "--horizon", "15")
        assert code == EXIT_OK
        assert (tmp_path / "ex9.csv").exists()
        cert = json.loads((tmp_path / "ex9.certificate.json").read_text())
        assert cert["route"] == "R6"
        assert "== ex9 ==" in out

    def test_three_names(self, capsys):
        routes = {}
        for name in ("ex1", "ex5", "ex9"):
            code, out, _ = _cli(capsys, "example", name, "--json", "--step", "0.05", "--horizon", "15")
            routes[name] = json.loads(out)["route"]
        assert routes == {"ex1": "Corollary1", "ex5": "ConstantGammaRemark", "ex9": "R6"}

    def test_needs_a_name(self, capsys):
        code, _, err = _cli(capsys, "example")
        assert code == EXIT_ERROR
        assert "--all-examples" in err

    def test_all_examples_reports_inconclusive(self, capsys):
        code, out, _ = _cli(capsys, "example", "--all-examples", "--step", "0.05", "--horizon", "6")
        assert code == EXIT_INCONCLUSIVE
        for name in BUILTIN:
            assert f"== {name} ==" in out

    def test_unknown_example(self):
        with pytest.raises(UnknownExample):
            run_example("ex3", None)

    def test_module_entry_point(self):
        proc = subprocess.run(
            [sys.executable, "-m", "tsconsensus.cli", "decompose", "--example", "ex9"],
            capture_output=True, text=True, check=False,
        )
        assert proc.returncode == 0
        assert proc.stdout.startswith("T0=1 T1=12 T2=inf")


class TestScenarioFiles:
    @pytest.mark.parametrize("name", BUILTIN)
    def test_round_trip(self, name):
        sc = load_builtin(name)
        again = parse_scenario(sc.to_json())
        assert again.to_dict() == sc.to_dict()

    def test_dimension_mismatch(self):
        d = load_builtin("ex9").to_dict()
        d["epsilon0"] = [1.0, 2.0]
        with pytest.raises(ScenarioError, match="epsilon0"):
            Scenario.from_dict(d)

    def test_horizon_must_exceed_start(self):
        d = load_builtin("ex9").to_dict()
        d["horizon"] = 0.5
        with pytest.raises(ScenarioError, match="horizon"):
            Scenario.from_dict(d)

    def test_unknown_field(self):
        d = load_builtin("ex9").to_dict()
        d["colour"] = "blue"
        with pytest.raises(ScenarioError):
            Scenario.from_dict(d)

    def test_builtins_note_the_leader(self):
        for name in BUILTIN:
            assert any("Leader" in n for n in load_builtin(name).notes), name
