import json
import subprocess
import sys

import pytest

from wco import __version__
from wco.cli import main
from wco.generators import generate_instance
from wco.scenario import save_scenario


@pytest.fixture
def scenario_file(tmp_path):
    def make(kind, size=3, seed=0, family=None):
        sc = generate_instance(kind, size, seed)
        if family is not None:
            sc.family = family(sc)
        path = tmp_path / f"{kind}-{size}-{seed}.json"
        save_scenario(sc, path)
        return str(path)

    return make


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def run_json(capsys, *argv):
    code, out = run(capsys, *argv, "--format", "json")
    return code, json.loads(out)


def test_certify_multiplication(capsys, scenario_file):
    code, rep = run_json(capsys, "certify", "--scenario", scenario_file("multiplication", 4, 1))
    assert code == 0 and rep["exit_code"] == 0
    assert rep["certificate"]["certified"] is True
    assert rep["certificate"]["normal"] is True
    assert rep["version"] == __version__
    assert rep["tolerances"]["abs"] == 1e-10


def test_certify_collapse(capsys, scenario_file):
    code, rep = run_json(capsys, "certify", "--scenario", scenario_file("collapse", 2))
    assert code == 1
    assert "h = 0 on {w != 0}" in rep["certificate"]["reason"]


def test_analyze_text_has_h_table(capsys, scenario_file):
    code, out = run(capsys, "analyze", "--scenario", scenario_file("collapse", 2), "--format", "text")
    assert code == 0
    header = next(line for line in out.splitlines() if "atom" in line and " h " in f"{line} ")
    assert "sqrt_h" in header


def test_analyze_json_derived(capsys, scenario_file):
    code, rep = run_json(capsys, "analyze", "--scenario", scenario_file("collapse", 2), "--nmax", "3")
    assert code == 0
    assert rep["derived"]["h"] == {"a": 9.0, "b": 0.0}
    assert set(rep["derived"]["h_n"]) == {"0", "1", "2", "3"}
    assert rep["derived"]["kernel"] == ["b"]
    assert rep["scenario"]["name"] == "collapse-2-s0"


def test_classify(capsys, scenario_file):
    code, rep = run_json(capsys, "classify", "--scenario", scenario_file("collapse", 2))
    assert code == 0
    cls = rep["classification"]
    assert not cls["hyponormal"] and not cls["quasinormal"]
    assert cls["witnesses"]["quasinormal"]["atom"] == "b"
    assert set(cls["injectivity_conditions"].values()) == {False}


def test_check_cc_requires_family(capsys, scenario_file):
    code, rep = run_json(capsys, "check-cc", "--scenario", scenario_file("collapse", 2))
    assert code == 2
    assert rep["status"] == "input-error"


def test_check_cc_and_extend(capsys, scenario_file):
    from wco.calculus import compute_h
    from wco.subnormality import ProbabilityFamily

    dirac = lambda sc: ProbabilityFamily.dirac(sc.space, compute_h(sc.instance).values)  # noqa: E731
    path = scenario_file("quasinormal", 6, 3, family=dirac)
    code, rep = run_json(capsys, "check-cc", "--scenario", path)
    assert code == 0
    assert set(rep["cc"]["main1_battery"].values()) == {True}
    code, rep = run_json(capsys, "extend", "--scenario", path)
    assert code == 0 and rep["extension"]["quasinormal"]

    bad = scenario_file("collapse", 2, family=dirac)
    code, rep = run_json(capsys, "check-cc", "--scenario", bad)
    assert code == 1 and rep["cc"]["satisfied"] is False
    code, rep = run_json(capsys, "extend", "--scenario", bad)
    assert code == 1 and rep["extension"]["defined"] is False


def test_solve_cc(capsys, scenario_file):
    path = scenario_file("collapse", 2)
    code, rep = run_json(capsys, "solve-cc", "--scenario", path, "--grid", "0,1,2,9")
    assert code == 1 and rep["solution"]["feasible"] is False
    code, rep = run_json(capsys, "solve-cc", "--scenario", path, "--grid", "0,1,2,9", "--bare")
    assert code == 0 and rep["solution"]["family"] == {"a": [{"t": 9.0, "p": 1.0}], "b": [{"t": 9.0, "p": 1.0}]}
    code, _ = run_json(capsys, "solve-cc", "--scenario", path, "--grid", "0,-1")
    assert code == 2


def test_tolerance_precedence(capsys, scenario_file, monkeypatch):
    path = scenario_file("cycle", 3)
    monkeypatch.setenv("WCO_TOL", "1e-7")
    _, rep = run_json(capsys, "classify", "--scenario", path)
    assert rep["tolerances"]["abs"] == 1e-7
    _, rep = run_json(capsys, "classify", "--scenario", path, "--tol", "1e-6")
    assert rep["tolerances"]["abs"] == 1e-6
    monkeypatch.setenv("WCO_TOL", "abc")
    code, _ = run_json(capsys, "classify", "--scenario", path)
    assert code == 2


def test_input_errors_exit_2(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"atoms": [{"id": "a", "mass": 0}], "phi": {"a": "a"}, "w": {"a": 1}}')
    code, rep = run_json(capsys, "analyze", "--scenario", str(bad))
    assert code == 2 and rep["error"]["field"] == "atoms[0].mass"
    code, _ = run_json(capsys, "analyze")
    assert code == 2
    with pytest.raises(SystemExit) as err:
        main(["frobnicate"])
    assert err.value.code == 2


def test_generate_command(capsys, tmp_path):
    code, out = run(capsys, "generate", "--kind", "collapse", "--size", "2")
    assert code == 0
    assert json.loads(out)["phi"] == {"a": "a", "b": "a"}
    code, _ = run(capsys, "generate")
    assert code == 2


def test_selftest_small(capsys):
    code, rep = run_json(capsys, "selftest", "--count", "24", "--seed", "5")
    assert code == 0
    assert rep["selftest"]["failed"] == 0
    assert rep["selftest"]["instances"] == 24


def test_selftest_workers_merge_counts(capsys):
    code, rep = run_json(capsys, "selftest", "--count", "12", "--workers", "2")
    assert code == 0
    assert all(v["passed"] == 12 for v in rep["selftest"]["checks"].values())


def test_console_script_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "wco.cli", "generate", "--kind", "cycle", "--size", "2"],
                         capture_output=True, text=True, check=True)
    assert json.loads(out.stdout)["name"] == "cycle-2-s0"
